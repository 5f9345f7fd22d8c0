#include "desatscan/annotations.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace desatscan {
namespace {

double parse_seconds(std::string_view field, std::size_t line_no, std::string_view what) {
  const auto t = trim(field);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    throw ParseError("annotations line " + std::to_string(line_no) + ": non-numeric " +
                     std::string(what) + " '" + std::string(t) + "'");
  return v;
}

void classify(AnnotationEvent& ev, const LabelMapping& mapping) {
  const auto key = to_lower(trim(ev.description));
  for (const auto& [label, stage] : mapping.stage_labels) {
    if (key == to_lower(trim(label))) {
      ev.kind = EventKind::SleepStage;
      ev.stage = stage;
      return;
    }
  }
  if (key == to_lower(trim(mapping.desaturation_label))) {
    ev.kind = EventKind::Desaturation;
  } else if (!mapping.apnea_substring.empty() &&
             key.find(to_lower(mapping.apnea_substring)) != std::string::npos) {
    ev.kind = EventKind::Apnea;
  } else {
    ev.kind = EventKind::Other;
  }
}

}  // namespace

LabelMapping LabelMapping::defaults() {
  return LabelMapping{
      {{"Sleep stage N1", SleepStage::N1},
       {"Sleep stage N2", SleepStage::N2},
       {"Sleep stage N3", SleepStage::N3},
       {"Sleep stage R", SleepStage::REM},
       {"REM", SleepStage::REM},
       {"Sleep stage W", SleepStage::Wake}},
      "Oxygen Desaturation",
      "apnea"};
}

std::vector<AnnotationEvent> parse_annotations(std::string_view text, const LabelMapping& mapping) {
  std::vector<AnnotationEvent> events;
  std::size_t line_no = 0;
  bool first_content = true;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;

    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (first_content) {
      first_content = false;
      if (iequals(trim(line.substr(0, t1)), "onset")) continue;
    }
    if (t2 == std::string_view::npos)
      throw ParseError("annotations line " + std::to_string(line_no) +
                       ": expected onset<TAB>duration<TAB>description");

    AnnotationEvent ev;
    ev.onset = parse_seconds(line.substr(0, t1), line_no, "onset");
    ev.duration = parse_seconds(line.substr(t1 + 1, t2 - t1 - 1), line_no, "duration");
    if (ev.onset < 0)
      throw ParseError("annotations line " + std::to_string(line_no) + ": negative onset");
    if (ev.duration < 0)
      throw ParseError("annotations line " + std::to_string(line_no) + ": negative duration");
    ev.description = std::string(trim(line.substr(t2 + 1)));
    classify(ev, mapping);
    events.push_back(std::move(ev));
  }
  return events;
}

std::vector<AnnotationEvent> read_annotations(const std::string& path, const LabelMapping& mapping) {
  std::ifstream in(path);
  if (!in) throw MissingInputError(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_annotations(ss.str(), mapping);
}

std::string format_annotations(std::span<const AnnotationEvent> events) {
  std::string out = "onset\tduration\tdescription\n";
  char buf[64];
  for (const auto& ev : events) {
    std::snprintf(buf, sizeof buf, "%.10g\t%.10g\t", ev.onset, ev.duration);
    out += buf;
    out += ev.description;
    out += '\n';
  }
  return out;
}

}  // namespace desatscan
