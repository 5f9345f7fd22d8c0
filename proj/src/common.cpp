#include "desatscan/common.hpp"

#include <algorithm>
#include <cctype>

namespace desatscan {

std::string_view to_string(SleepStage stage) {
  switch (stage) {
    case SleepStage::Wake: return "Wake";
    case SleepStage::N1: return "N1";
    case SleepStage::N2: return "N2";
    case SleepStage::N3: return "N3";
    case SleepStage::REM: return "REM";
  }
  return "?";
}

std::string_view table_name(SleepStage stage) {
  switch (stage) {
    case SleepStage::Wake: return "Wake";
    case SleepStage::N1: return "NREM1";
    case SleepStage::N2: return "NREM2";
    case SleepStage::N3: return "NREM3";
    case SleepStage::REM: return "REM";
  }
  return "?";
}

std::optional<SleepStage> parse_stage(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "wake" || t == "w") return SleepStage::Wake;
  if (t == "n1" || t == "nrem1") return SleepStage::N1;
  if (t == "n2" || t == "nrem2") return SleepStage::N2;
  if (t == "n3" || t == "nrem3") return SleepStage::N3;
  if (t == "rem" || t == "r") return SleepStage::REM;
  return std::nullopt;
}

std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && to_lower(a) == to_lower(b);
}

}  // namespace desatscan
