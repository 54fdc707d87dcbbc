#pragma once

#include <istream>
#include <string>
#include <vector>

namespace tonematch {

// Minimal CSV: comma-separated fields, no quoting or escaping. Lines that are
// blank or start with '#' are surfaced separately (comments) so headers like
// "# seed=42" survive a round trip.
struct CsvTable {
  std::vector<std::string> comments;             // leading-'#' lines, verbatim
  std::vector<std::vector<std::string>> rows;    // includes any header row
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

std::string join_csv(const std::vector<std::string>& fields);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

// strtod/strtol with a DataError naming the offending field on failure.
double parse_double_field(const std::string& s, const std::string& what);
long parse_long_field(const std::string& s, const std::string& what);

}  // namespace tonematch
