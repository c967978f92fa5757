#pragma once

#include <map>
#include <string>
#include <vector>

namespace mrag::tsv {

/// Header + rows, with cells looked up by column name.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws ConfigError when absent
  bool has_column(const std::string& name) const;
};

Table read(const std::string& path);
void write(const std::string& path, const Table& table);
std::string to_string(const Table& table);

/// Fixed-point with `digits` decimals; NaN renders as "NA".
std::string fixed(double value, int digits = 6);
/// Scientific notation with `digits` mantissa decimals; NaN renders as "NA".
std::string sci(double value, int digits = 6);

}  // namespace mrag::tsv
