#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "desatscan/cohort.hpp"
#include "desatscan/edf.hpp"

namespace desatscan {

/// A run of consecutive 30 s epochs of one stage within the sleep cycle.
struct StageRun {
  SleepStage stage = SleepStage::N2;
  int epochs = 1;
};

struct SynthConfig {
  int subjects_per_class = 6;      // per (group, class)
  double night_duration = 3600.0;  // seconds, multiple of 30
  /// Repeated until the night is filled; truncated at the end.
  std::vector<StageRun> stage_cycle{{SleepStage::Wake, 4}, {SleepStage::N1, 8},
                                    {SleepStage::N2, 40},  {SleepStage::N3, 30},
                                    {SleepStage::N2, 10},  {SleepStage::REM, 28}};
  double desat_rate = 12.0;       // desaturation events per hour
  double desat_effect_db = 0.0;   // 0.5-4 Hz boost in epochs overlapping an event
  double latent_effect_db = 0.0;  // 0.5-4 Hz boost in every epoch of desaturated subjects
  double noise_exponent = 1.0;    // EEG power spectrum ~ 1/f^exponent
  double line_noise_uv = 5.0;     // 60 Hz amplitude; 120 Hz gets 40 % of it
  std::uint64_t seed = 0;

  /// Throws ConfigError on negative counts or rates, a night that is not a
  /// positive multiple of 30 s, or a cycle missing an analysis stage.
  void validate() const;
};

/// "W:4,N1:8,N2:40" style cycle text.
std::vector<StageRun> parse_stage_cycle(std::string_view text);
std::string format_stage_cycle(std::span<const StageRun> cycle);

/// RMS amplitude in microvolts of the unboosted EEG in each stage.
double stage_eeg_rms(SleepStage stage);

struct SynthSubject {
  SubjectRecord record;               // demographics, annotations, SpO2
  std::vector<EdfChannel> channels;   // seven EEG derivations then SpO2
  GroupId group;
  SubjectClass planted = SubjectClass::Undesaturated;
  std::vector<int> desat_epochs;      // epoch indices overlapping a desaturation event
};

/// One subject. Desaturated subjects get desaturation events (SpO2 dips to
/// 85-89 %) each paired with an apnea event, with at least one event in an
/// epoch of every analysis stage; undesaturated subjects keep SpO2 >= 96 %.
SynthSubject generate_subject(const SynthConfig& cfg, GroupId group, SubjectClass cls,
                              const std::string& subject_id, std::uint64_t seed);

/// Subject roster in generation order: groups in table order, desaturated
/// before undesaturated, ids S0001, S0002, ...
struct SynthPlanEntry {
  std::string subject_id;
  GroupId group;
  SubjectClass cls = SubjectClass::Undesaturated;
  std::uint64_t seed = 0;
};
std::vector<SynthPlanEntry> synth_plan(const SynthConfig& cfg);

SynthSubject generate_subject(const SynthConfig& cfg, const SynthPlanEntry& entry);

struct GroundTruthRow {
  std::string subject_id;
  GroupId group;
  SubjectClass cls = SubjectClass::Undesaturated;
  int planted_desat_epochs = 0;
  double effect_db = 0.0;  // boost of desaturation epochs
  double latent_db = 0.0;  // boost of every epoch
};

/// Writes <id>.edf and <id>.tsv per subject plus demographics.tsv and
/// ground_truth.tsv. Subjects are generated in parallel; the output bytes
/// depend only on the config.
std::vector<GroundTruthRow> generate_cohort(const SynthConfig& cfg,
                                            const std::filesystem::path& dir);

void write_demographics_tsv(const std::filesystem::path& path,
                            std::span<const SubjectRecord> subjects);
/// subject_id, age, gender
struct Demographic {
  std::string subject_id;
  double age = 0.0;
  Gender gender = Gender::Male;
};
std::vector<Demographic> read_demographics_tsv(const std::filesystem::path& path);

void write_ground_truth_tsv(const std::filesystem::path& path,
                            std::span<const GroundTruthRow> rows);
std::vector<GroundTruthRow> read_ground_truth_tsv(const std::filesystem::path& path);

}  // namespace desatscan
