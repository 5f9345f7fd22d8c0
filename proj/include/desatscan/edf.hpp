#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace desatscan {

/// Per-signal block of a classic EDF header.
struct SignalDef {
  std::string label;
  std::string transducer;
  std::string physical_dimension;
  double physical_min = 0.0;
  double physical_max = 0.0;
  int digital_min = 0;
  int digital_max = 0;
  std::string prefiltering;
  int samples_per_record = 0;
  double sample_rate = 0.0;  // samples_per_record / record_duration
};

struct RecordingHeader {
  std::string subject_id;
  std::string recording_id;
  std::string start_date;
  std::string start_time;
  int record_count = 0;
  double record_duration = 0.0;  // seconds
  std::vector<SignalDef> signals;

  std::size_t signal_count() const { return signals.size(); }
};

/// One channel in physical units.
struct SignalTrace {
  std::string label;
  double sample_rate = 0.0;
  std::vector<double> samples;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

struct Recording {
  RecordingHeader header;
  std::vector<SignalTrace> traces;
  /// Digital samples outside [digital_min, digital_max] that were clamped.
  std::size_t clamped_samples = 0;

  /// Case-insensitive, whitespace-trimmed label lookup; nullptr if absent.
  const SignalTrace* find(std::string_view label) const;
};

/// The seven EEG derivations used for featurization, in tensor channel order.
inline const std::vector<std::string> kEegChannels = {
    "F3-M2", "F4-M1", "C3-M2", "C4-M1", "O1-M2", "O2-M1", "Cz-O1"};
inline constexpr std::string_view kSpo2Label = "SpO2";

/// Label comparison key: surrounding whitespace stripped, lower-cased.
std::string normalize_label(std::string_view label);

/// Decodes a classic 16-bit EDF byte stream. Throws ParseError on a
/// truncated header, degenerate calibration, or inconsistent record sizes.
Recording parse_edf(std::span<const std::uint8_t> bytes);
Recording read_edf(const std::filesystem::path& path);

/// Labels from `required` not present in the header (after normalization).
std::vector<std::string> required_channels_check(
    const RecordingHeader& header, std::span<const std::string> required);

/// A trace plus the calibration used to quantize it on write.
struct EdfChannel {
  SignalTrace trace;
  double physical_min = -1.0;
  double physical_max = 1.0;
  int digital_min = -32768;
  int digital_max = 32767;
  std::string physical_dimension;
};

/// Encodes traces as classic EDF. Every trace must span the same whole
/// number of data records. Physical limits are rounded to what fits the
/// 8-character header field and quantization uses the rounded values.
std::vector<std::uint8_t> encode_edf(std::string_view subject_id,
                                     std::span<const EdfChannel> channels,
                                     double record_duration = 1.0);
void write_edf(const std::filesystem::path& path, std::string_view subject_id,
               std::span<const EdfChannel> channels, double record_duration = 1.0);

}  // namespace desatscan
