#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ermasym::csv {

// A parsed CSV file. Lines starting with '#' are kept verbatim (without the
// marker) in `comments`; the first non-comment line is the header.
struct Table {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws ParseError when absent.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  // Numeric column; throws ParseError on malformed cells.
  std::vector<double> numeric(const std::string& name) const;
};

Table read(std::istream& in);
Table read_file(const std::filesystem::path& path);

std::vector<std::string> split(const std::string& line, char sep = ',');

// Shortest round-trippable-enough text for a double (%.12g); non-finite
// values print as NA, inf or -inf.
std::string num(double x);

}  // namespace ermasym::csv
