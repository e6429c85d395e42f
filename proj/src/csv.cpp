#include "latentalpha/csv.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "latentalpha/error.hpp"

namespace latentalpha {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::string format_number(double v) { return fmt::format("{:.17g}", v); }

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split(line);
    for (auto& c : cells) c = trim(c);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size())
      throw Error(ErrorKind::DataFormat, fmt::format("{}:{}: expected {} columns, found {}", path, number,
                                                     table.header.size(), cells.size()));
    table.rows.push_back(std::move(cells));
    table.line.push_back(number);
  }
  if (table.header.empty()) throw Error(ErrorKind::DataFormat, path + ": missing header");
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  const auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  emit(header);
  for (const auto& r : rows) emit(r);
  if (!out) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

double parse_number(const std::string& text, std::size_t line, const std::string& column) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    throw Error(ErrorKind::DataFormat, fmt::format("line {}: column '{}' is not a finite number: '{}'", line, column, text));
  return v;
}

std::vector<DayPrices> read_price_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.header != std::vector<std::string>{"day", "t", "F"})
    throw Error(ErrorKind::DataFormat, path + ": header must be day,t,F");
  if (table.rows.empty()) throw Error(ErrorKind::DataFormat, path + ": no data rows");

  std::vector<DayPrices> days;
  std::set<long> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.line[r];
    const double day_value = parse_number(row[0], line, "day");
    if (day_value != std::floor(day_value))
      throw Error(ErrorKind::DataFormat, fmt::format("line {}: day must be an integer", line));
    const long day = static_cast<long>(day_value);
    if (days.empty() || days.back().day != day) {
      if (!seen.insert(day).second)
        throw Error(ErrorKind::DataFormat, fmt::format("line {}: rows of day {} are not contiguous", line, day));
      days.push_back(DayPrices{day, {}, {}});
    }
    DayPrices& d = days.back();
    const double t = parse_number(row[1], line, "t");
    if (!d.t.empty()) {
      if (!(t > d.t.back())) throw Error(ErrorKind::DataFormat, fmt::format("line {}: t must increase", line));
      if (d.t.size() >= 2) {
        const double first = d.t[1] - d.t[0];
        if (std::abs((t - d.t.back()) - first) > 1e-6 * std::max(1.0, first))
          throw Error(ErrorKind::DataFormat, fmt::format("line {}: sampling is not uniform", line));
      }
    }
    d.t.push_back(t);
    d.F.push_back(parse_number(row[2], line, "F"));
  }
  return days;
}

void write_price_csv(const std::string& path, const std::vector<DayPrices>& days) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& d : days)
    for (std::size_t k = 0; k < d.t.size(); ++k)
      rows.push_back({std::to_string(d.day), format_number(d.t[k]), format_number(d.F[k])});
  write_csv(path, {"day", "t", "F"}, rows);
}

}  // namespace latentalpha
