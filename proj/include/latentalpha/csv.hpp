#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace latentalpha {

/// 17 significant digits, enough to parse back to the same double.
std::string format_number(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line;  ///< 1-based source line of each row
};

/// Reads a comma-separated file with a header row. Row width mismatches raise
/// Error{DataFormat} naming the line.
CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

double parse_number(const std::string& text, std::size_t line, const std::string& column);

/// One day of a `day,t,F` price file; t in seconds.
struct DayPrices {
  long day = 0;
  std::vector<double> t;
  std::vector<double> F;
};

/// Reads `day,t,F`; rows of a day must be contiguous with uniform spacing.
std::vector<DayPrices> read_price_csv(const std::string& path);
void write_price_csv(const std::string& path, const std::vector<DayPrices>& days);

}  // namespace latentalpha
