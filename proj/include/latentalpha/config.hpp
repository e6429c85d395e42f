#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "latentalpha/calibration.hpp"
#include "latentalpha/simulator.hpp"

namespace latentalpha {

/// Parameters of a synthetic censored-jump dataset (per-second rates).
struct SyntheticSpec {
  Vector prior;
  Matrix transition;
  std::vector<EmissionParams> psi;
  std::size_t days = 50;
  std::size_t steps = 3600;
  double start_price = 0.0;
};

struct RunConfig {
  /// Study settings; rates, horizon and dt are per hour after loading.
  StudyConfig study;
  bool has_model = false;  ///< false for calibration-only configs
  std::size_t paths = 1000;
  std::uint64_t seed = 1;

  std::size_t states_lo = 1;
  std::size_t states_hi = 1;
  EMOptions em;
  double tick = 0.01;

  std::optional<SyntheticSpec> synthetic;
};

/// Parses a flat JSON object. Unknown keys, wrong types and invalid model
/// parameters raise Error{Config}.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// "3" or "1..4" into an inclusive range.
void parse_state_range(const std::string& text, std::size_t& lo, std::size_t& hi);

}  // namespace latentalpha
