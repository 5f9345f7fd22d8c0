#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "desatscan/cohort.hpp"
#include "desatscan/split.hpp"

namespace desatscan {

enum class Experiment : std::uint8_t { CrossPatient, WithinPatient, LatentMarker };
std::string_view to_string(Experiment e);
std::optional<Experiment> parse_experiment(std::string_view text);

/// Metadata for one featurized epoch.
struct EpochRecord {
  std::string subject_id;
  SleepStage stage = SleepStage::N1;
  int epoch_index = 0;
  double start = 0.0;     // seconds; the epoch spans [start, start + 30)
  bool has_desat = false; // overlaps a qualifying desaturation event
  std::string path;       // DSTF file, when stored on disk
};

/// True iff a desaturation event whose SpO2 minimum is below the threshold
/// shares at least one 256 Hz sample instant with [start, end).
bool epoch_has_desat(double start, double end, std::span<const AnnotationEvent> events,
                     const SignalTrace& spo2, double desat_spo2 = 90.0);

struct LabeledItem {
  EpochRecord epoch;
  int label = 0;
};

/// How the positive-class loss weight is derived from the training split.
enum class PosWeightMode : std::uint8_t {
  TotalOverPositive,     // N / N_pos
  NegativeOverPositive,  // N_neg / N_pos
};

struct LabeledDataset {
  Experiment experiment = Experiment::CrossPatient;
  SleepStage stage = SleepStage::N1;
  SplitRole split = SplitRole::Train;
  std::vector<LabeledItem> items;
  double pos_weight = 1.0;  // from the Train split, shared by all three

  std::size_t positives() const;
  std::size_t subject_count() const;
};

struct ExperimentData {
  std::array<LabeledDataset, 3> splits;  // Train, Test, Validation
  /// Split subjects that ended up contributing no epoch after labeling.
  std::size_t dropped_subjects = 0;

  const LabeledDataset& operator[](SplitRole r) const { return splits[static_cast<std::size_t>(r)]; }
};

/// Builds the labeled train/test/validation datasets for one experiment.
///   CrossPatient: desaturated-subject epochs with desaturation -> 1,
///                 undesaturated-subject epochs -> 0, others excluded.
///   WithinPatient: desaturated subjects only, label = has_desat.
///   LatentMarker: desaturated-subject clean epochs -> 1 (desat epochs
///                 dropped), undesaturated-subject epochs -> 0.
/// Wake epochs and epochs of other stages are ignored. Throws ConfigError
/// when the Train split lacks either class.
ExperimentData build_experiment(Experiment experiment,
                                const std::map<std::string, SubjectClass>& classes,
                                const CohortSplit& split, std::span<const EpochRecord> epochs,
                                PosWeightMode mode = PosWeightMode::TotalOverPositive);

inline ExperimentData build_cross_patient(const std::map<std::string, SubjectClass>& classes,
                                          const CohortSplit& split,
                                          std::span<const EpochRecord> epochs,
                                          PosWeightMode mode = PosWeightMode::TotalOverPositive) {
  return build_experiment(Experiment::CrossPatient, classes, split, epochs, mode);
}
inline ExperimentData build_within_patient(const std::map<std::string, SubjectClass>& classes,
                                           const CohortSplit& split,
                                           std::span<const EpochRecord> epochs,
                                           PosWeightMode mode = PosWeightMode::TotalOverPositive) {
  return build_experiment(Experiment::WithinPatient, classes, split, epochs, mode);
}
inline ExperimentData build_latent(const std::map<std::string, SubjectClass>& classes,
                                   const CohortSplit& split, std::span<const EpochRecord> epochs,
                                   PosWeightMode mode = PosWeightMode::TotalOverPositive) {
  return build_experiment(Experiment::LatentMarker, classes, split, epochs, mode);
}

/// Label for one epoch under an experiment: 0/1, or -1 when excluded.
int experiment_label(Experiment experiment, SubjectClass cls, bool has_desat);

/// subject_id, stage, epoch_index, label, path
void write_manifest_tsv(const std::filesystem::path& path, std::span<const LabeledItem> items);
std::vector<LabeledItem> read_manifest_tsv(const std::filesystem::path& path);

}  // namespace desatscan
