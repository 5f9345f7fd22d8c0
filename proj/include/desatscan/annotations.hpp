#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "desatscan/common.hpp"

namespace desatscan {

enum class EventKind : std::uint8_t { SleepStage, Desaturation, Apnea, Other };

struct AnnotationEvent {
  double onset = 0.0;     // seconds from recording start
  double duration = 0.0;  // seconds
  EventKind kind = EventKind::Other;
  SleepStage stage = SleepStage::Wake;  // meaningful only for EventKind::SleepStage
  std::string description;

  double end() const { return onset + duration; }
};

/// Description-to-kind mapping. Matching is case-insensitive on trimmed text.
struct LabelMapping {
  std::vector<std::pair<std::string, SleepStage>> stage_labels;
  std::string desaturation_label;
  std::string apnea_substring;

  static LabelMapping defaults();
};

/// Parses `onset<TAB>duration<TAB>description` lines. A leading header line
/// starting with "onset" is skipped; blank lines are ignored.
std::vector<AnnotationEvent> parse_annotations(
    std::string_view text, const LabelMapping& mapping = LabelMapping::defaults());

std::vector<AnnotationEvent> read_annotations(
    const std::string& path, const LabelMapping& mapping = LabelMapping::defaults());

/// Writes events with a header line, using each event's description verbatim.
std::string format_annotations(std::span<const AnnotationEvent> events);

}  // namespace desatscan
