#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "desatscan/annotations.hpp"
#include "desatscan/edf.hpp"

namespace desatscan {

enum class Gender : std::uint8_t { Male, Female };

/// Half-open pediatric age bands: [0,2) [2,5) [5,8) [8,12) [12,18).
enum class AgeBand : std::uint8_t { Infant, Preschool, EarlySchool, LateSchool, Adolescent };
inline constexpr std::array<double, 6> kAgeBandEdges = {0, 2, 5, 8, 12, 18};

struct GroupId {
  AgeBand band = AgeBand::Infant;
  Gender gender = Gender::Male;

  auto operator<=>(const GroupId&) const = default;
  /// e.g. "2-5 Female"
  std::string label() const;
  static std::optional<GroupId> parse(std::string_view label);
};

/// All ten groups in table order (band-major, female before male).
std::vector<GroupId> all_groups();

std::string_view to_string(Gender g);
std::optional<Gender> parse_gender(std::string_view text);

struct SubjectRecord {
  std::string subject_id;
  double age = 0.0;
  Gender gender = Gender::Male;
  std::vector<AnnotationEvent> annotations;
  SignalTrace spo2;
};

enum class SubjectClass : std::uint8_t { Desaturated, Undesaturated, Excluded };
std::string_view to_string(SubjectClass c);
std::optional<SubjectClass> parse_subject_class(std::string_view text);

struct StageClass {
  SleepStage stage = SleepStage::N1;
  SubjectClass cls = SubjectClass::Excluded;
};

/// How the undesaturated group's 95% floor is checked.
enum class UndesatFloor : std::uint8_t {
  WholeTrace,  // SpO2 never below the floor anywhere in the night
  EventsOnly,  // no desaturation event whose minimum is below the floor
};

struct CohortThresholds {
  double desat_spo2 = 90.0;
  double undesat_spo2 = 95.0;
  UndesatFloor floor = UndesatFloor::WholeTrace;

  void validate() const;
};

/// Group for an age/gender pair; nullopt when age < 0 or age >= 18.
std::optional<GroupId> assign_group(double age, Gender gender);

/// Minimum SpO2 over samples whose timestamps lie in [onset, onset+duration].
/// Throws Error when no sample falls in that window.
double min_spo2_during(const AnnotationEvent& event, const SignalTrace& spo2);

/// Per-stage group membership.
///   Desaturated: some desaturation event reaching below desat_spo2 shares a
///     sample with an epoch of this stage, and the night has an apnea event.
///   Undesaturated: no apnea event anywhere and the SpO2 floor check passes.
///   Excluded: otherwise, or when the subject has no epoch of this stage.
StageClass classify_stage(const SubjectRecord& subject, SleepStage stage,
                          const CohortThresholds& thresholds = {});

/// One row of the cohort table.
struct CohortEntry {
  std::string subject_id;
  double age = 0.0;
  Gender gender = Gender::Male;
  GroupId group;
  SleepStage stage = SleepStage::N1;
  SubjectClass cls = SubjectClass::Excluded;
};

struct Cohort {
  std::vector<CohortEntry> entries;
  std::size_t out_of_range = 0;  // subjects skipped for age outside [0, 18)
};

/// Classifies every in-range subject for every listed stage (parallel map).
Cohort build_cohort(std::span<const SubjectRecord> subjects, std::span<const SleepStage> stages,
                    const CohortThresholds& thresholds = {});

/// subject_id, age, gender, group, stage, class
void write_cohort_tsv(const std::filesystem::path& path, std::span<const CohortEntry> entries);
std::vector<CohortEntry> read_cohort_tsv(const std::filesystem::path& path);

struct GroupLists {
  std::vector<std::string> desaturated;
  std::vector<std::string> undesaturated;
};
using GroupedSubjects = std::map<GroupId, GroupLists>;

/// Desaturated / undesaturated subject ids per group for one stage.
GroupedSubjects group_subjects(std::span<const CohortEntry> entries, SleepStage stage);

/// Class per subject for one stage.
std::map<std::string, SubjectClass> stage_classes(std::span<const CohortEntry> entries,
                                                  SleepStage stage);

}  // namespace desatscan
