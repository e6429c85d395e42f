#pragma once

#include <string>

#include "latentalpha/config.hpp"

namespace latentalpha {

/// Monte Carlo study; writes summary.csv, grid_<name>.csv, histogram.csv,
/// curves.csv, per_path.csv and sample_paths.csv into `out_dir`.
void cmd_simulate(const RunConfig& config, const std::string& out_dir);

/// EM fits for each J in the configured range; writes params_J<j>.csv,
/// trace_J<j>.csv, model_selection.csv and data_report.csv.
void cmd_calibrate(const RunConfig& config, const std::string& data_csv, const std::string& out_dir);

/// Posterior trajectory per day: filter.csv, or filter_day<d>.csv for several days.
void cmd_filter(const RunConfig& config, const std::string& data_csv, const std::string& out_dir);

/// Writes a `day,t,F` dataset: censored-jump data when synthetic parameters
/// are configured, otherwise market paths of the configured model.
void cmd_synthesize(const RunConfig& config, const std::string& out_csv);

}  // namespace latentalpha
