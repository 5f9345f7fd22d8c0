#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace desatscan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input bytes or text (EDF, TSV, DSTF, config).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or argument values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A required upstream file or directory does not exist.
class MissingInputError : public Error {
 public:
  explicit MissingInputError(std::string path)
      : Error("missing input: " + path), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class SleepStage : std::uint8_t { Wake, N1, N2, N3, REM };

/// Stages used for classification; Wake epochs never enter a dataset.
inline constexpr std::array<SleepStage, 4> kAnalysisStages = {
    SleepStage::N1, SleepStage::N2, SleepStage::N3, SleepStage::REM};

std::string_view to_string(SleepStage stage);
/// Accepts the short names ("N1", "REM", "Wake"); case-insensitive.
std::optional<SleepStage> parse_stage(std::string_view text);
/// Table caption used in reports: NREM1, NREM2, NREM3, REM.
std::string_view table_name(SleepStage stage);

inline bool is_analysis_stage(SleepStage s) { return s != SleepStage::Wake; }

// String helpers shared by the text parsers.
std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

}  // namespace desatscan
