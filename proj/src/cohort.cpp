#include "desatscan/cohort.hpp"

#include <algorithm>
#include <cmath>

#include "desatscan/epochs.hpp"
#include "desatscan/tsv.hpp"

namespace desatscan {
namespace {

constexpr std::array<std::string_view, 5> kBandLabels = {"0-2", "2-5", "5-8", "8-12", "12-18"};

}  // namespace

std::string_view to_string(Gender g) { return g == Gender::Male ? "M" : "F"; }

std::optional<Gender> parse_gender(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "m" || t == "male") return Gender::Male;
  if (t == "f" || t == "female") return Gender::Female;
  return std::nullopt;
}

std::string GroupId::label() const {
  return std::string(kBandLabels[static_cast<std::size_t>(band)]) +
         (gender == Gender::Female ? " Female" : " Male");
}

std::optional<GroupId> GroupId::parse(std::string_view label) {
  const auto t = trim(label);
  const auto sp = t.find(' ');
  if (sp == std::string_view::npos) return std::nullopt;
  const auto band = t.substr(0, sp);
  const auto g = parse_gender(t.substr(sp + 1));
  if (!g) return std::nullopt;
  for (std::size_t i = 0; i < kBandLabels.size(); ++i)
    if (band == kBandLabels[i]) return GroupId{static_cast<AgeBand>(i), *g};
  return std::nullopt;
}

std::vector<GroupId> all_groups() {
  std::vector<GroupId> out;
  for (std::size_t b = 0; b < kBandLabels.size(); ++b)
    for (auto g : {Gender::Female, Gender::Male}) out.push_back({static_cast<AgeBand>(b), g});
  return out;
}

std::string_view to_string(SubjectClass c) {
  switch (c) {
    case SubjectClass::Desaturated: return "Desaturated";
    case SubjectClass::Undesaturated: return "Undesaturated";
    case SubjectClass::Excluded: return "Excluded";
  }
  return "?";
}

std::optional<SubjectClass> parse_subject_class(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "desaturated") return SubjectClass::Desaturated;
  if (t == "undesaturated") return SubjectClass::Undesaturated;
  if (t == "excluded") return SubjectClass::Excluded;
  return std::nullopt;
}

void CohortThresholds::validate() const {
  if (!(desat_spo2 > 0 && desat_spo2 < 100) || !(undesat_spo2 > 0 && undesat_spo2 < 100))
    throw ConfigError("thresholds must lie in (0, 100)");
  if (!(desat_spo2 < undesat_spo2)) throw ConfigError("desat_spo2 must be below undesat_spo2");
}

std::optional<GroupId> assign_group(double age, Gender gender) {
  if (!(age >= kAgeBandEdges.front()) || !(age < kAgeBandEdges.back())) return std::nullopt;
  for (std::size_t b = 0; b + 1 < kAgeBandEdges.size(); ++b)
    if (age < kAgeBandEdges[b + 1]) return GroupId{static_cast<AgeBand>(b), gender};
  return std::nullopt;
}

double min_spo2_during(const AnnotationEvent& event, const SignalTrace& spo2) {
  if (spo2.sample_rate <= 0 || spo2.samples.empty())
    throw Error("min_spo2_during: empty SpO2 trace");
  const auto n = static_cast<long long>(spo2.samples.size());
  const auto first = std::max(0LL, static_cast<long long>(std::ceil(event.onset * spo2.sample_rate)));
  const auto last = std::min(n - 1, static_cast<long long>(std::floor(event.end() * spo2.sample_rate)));
  if (first > last)
    throw Error("min_spo2_during: no SpO2 samples inside event at " + std::to_string(event.onset) + " s");
  return *std::min_element(spo2.samples.begin() + first, spo2.samples.begin() + last + 1);
}

StageClass classify_stage(const SubjectRecord& subject, SleepStage stage,
                          const CohortThresholds& thresholds) {
  StageClass out{stage, SubjectClass::Excluded};
  std::vector<EpochInterval> epochs;
  for (const auto& e : stage_epochs(subject.annotations))
    if (e.stage == stage) epochs.push_back(e);
  if (epochs.empty()) return out;

  bool any_apnea = false;
  bool qualifying_desat = false;
  bool below_floor_event = false;
  for (const auto& ev : subject.annotations) {
    if (ev.kind == EventKind::Apnea) any_apnea = true;
    if (ev.kind != EventKind::Desaturation) continue;
    double nadir;
    try {
      nadir = min_spo2_during(ev, subject.spo2);
    } catch (const Error&) {
      continue;  // event outside the recorded oximetry
    }
    if (nadir < thresholds.undesat_spo2) below_floor_event = true;
    if (nadir < thresholds.desat_spo2 && !qualifying_desat) {
      qualifying_desat = std::any_of(epochs.begin(), epochs.end(), [&](const EpochInterval& e) {
        return share_sample(ev.onset, ev.end(), e.start, e.end);
      });
    }
  }

  if (qualifying_desat && any_apnea) {
    out.cls = SubjectClass::Desaturated;
    return out;
  }
  if (any_apnea) return out;
  bool floor_ok;
  if (thresholds.floor == UndesatFloor::WholeTrace) {
    floor_ok = std::none_of(subject.spo2.samples.begin(), subject.spo2.samples.end(),
                            [&](double v) { return v < thresholds.undesat_spo2; });
    floor_ok = floor_ok && !below_floor_event;
  } else {
    floor_ok = !below_floor_event;
  }
  if (floor_ok) out.cls = SubjectClass::Undesaturated;
  return out;
}

Cohort build_cohort(std::span<const SubjectRecord> subjects, std::span<const SleepStage> stages,
                    const CohortThresholds& thresholds) {
  thresholds.validate();
  const auto n = static_cast<std::ptrdiff_t>(subjects.size());
  std::vector<std::vector<CohortEntry>> per_subject(subjects.size());
  std::vector<char> in_range(subjects.size(), 0);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& s = subjects[static_cast<std::size_t>(i)];
    const auto group = assign_group(s.age, s.gender);
    if (!group) continue;
    in_range[static_cast<std::size_t>(i)] = 1;
    for (auto stage : stages) {
      const auto c = classify_stage(s, stage, thresholds);
      per_subject[static_cast<std::size_t>(i)].push_back(
          {s.subject_id, s.age, s.gender, *group, stage, c.cls});
    }
  }
  Cohort cohort;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (!in_range[i]) ++cohort.out_of_range;
    for (auto& e : per_subject[i]) cohort.entries.push_back(std::move(e));
  }
  return cohort;
}

void write_cohort_tsv(const std::filesystem::path& path, std::span<const CohortEntry> entries) {
  TsvTable t;
  t.header = {"subject_id", "age", "gender", "group", "stage", "class"};
  for (const auto& e : entries)
    t.rows.push_back({e.subject_id, format_fixed(e.age, 3), std::string(to_string(e.gender)),
                      e.group.label(), std::string(to_string(e.stage)),
                      std::string(to_string(e.cls))});
  write_tsv(path, t);
}

std::vector<CohortEntry> read_cohort_tsv(const std::filesystem::path& path) {
  const auto t = read_tsv(path);
  const auto c_id = t.column("subject_id"), c_age = t.column("age"), c_g = t.column("gender"),
             c_grp = t.column("group"), c_stage = t.column("stage"), c_cls = t.column("class");
  std::vector<CohortEntry> out;
  for (const auto& r : t.rows) {
    CohortEntry e;
    e.subject_id = r[c_id];
    e.age = parse_double(r[c_age], "age");
    const auto g = parse_gender(r[c_g]);
    const auto grp = GroupId::parse(r[c_grp]);
    const auto st = parse_stage(r[c_stage]);
    const auto cls = parse_subject_class(r[c_cls]);
    if (!g || !grp || !st || !cls) throw ParseError("cohort TSV: bad row for " + e.subject_id);
    e.gender = *g;
    e.group = *grp;
    e.stage = *st;
    e.cls = *cls;
    out.push_back(std::move(e));
  }
  return out;
}

GroupedSubjects group_subjects(std::span<const CohortEntry> entries, SleepStage stage) {
  GroupedSubjects out;
  for (const auto& e : entries) {
    if (e.stage != stage) continue;
    if (e.cls == SubjectClass::Desaturated) out[e.group].desaturated.push_back(e.subject_id);
    else if (e.cls == SubjectClass::Undesaturated) out[e.group].undesaturated.push_back(e.subject_id);
  }
  return out;
}

std::map<std::string, SubjectClass> stage_classes(std::span<const CohortEntry> entries,
                                                  SleepStage stage) {
  std::map<std::string, SubjectClass> out;
  for (const auto& e : entries)
    if (e.stage == stage) out[e.subject_id] = e.cls;
  return out;
}

}  // namespace desatscan
