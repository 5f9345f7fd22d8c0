#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace desatscan {

/// Header-first tab-separated table. Fields never contain tabs or newlines.
struct TsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws ParseError if absent.
  std::size_t column(std::string_view name) const;
};

TsvTable parse_tsv(std::string_view text);
TsvTable read_tsv(const std::filesystem::path& path);
std::string format_tsv(const TsvTable& table);
void write_tsv(const std::filesystem::path& path, const TsvTable& table);

double parse_double(std::string_view field, std::string_view what);
long long parse_int(std::string_view field, std::string_view what);
/// Fixed "%.6f"-style rendering so outputs are byte-stable.
std::string format_fixed(double v, int precision = 6);

}  // namespace desatscan
