#include "desatscan/tsv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "desatscan/common.hpp"

namespace desatscan {
namespace {

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.emplace_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

}  // namespace

std::size_t TsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ParseError("TSV: missing column '" + std::string(name) + "'");
}

TsvTable parse_tsv(std::string_view text) {
  TsvTable t;
  bool first = true;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (first) {
      t.header = std::move(fields);
      first = false;
      continue;
    }
    if (fields.size() != t.header.size())
      throw ParseError("TSV: row has " + std::to_string(fields.size()) + " fields, header has " +
                       std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  return t;
}

TsvTable read_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError(path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_tsv(ss.str());
}

std::string format_tsv(const TsvTable& table) {
  std::string out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += '\t';
      out += fields[i];
    }
    out += '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  return out;
}

void write_tsv(const std::filesystem::path& path, const TsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << format_tsv(table);
}

double parse_double(std::string_view field, std::string_view what) {
  const auto t = trim(field);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ParseError("bad number for " + std::string(what) + ": '" + std::string(t) + "'");
  return v;
}

long long parse_int(std::string_view field, std::string_view what) {
  const auto t = trim(field);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ParseError("bad integer for " + std::string(what) + ": '" + std::string(t) + "'");
  return v;
}

std::string format_fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

}  // namespace desatscan
