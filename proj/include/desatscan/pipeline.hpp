#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "desatscan/config.hpp"
#include "desatscan/epochs.hpp"
#include "desatscan/experiments.hpp"
#include "desatscan/metrics.hpp"
#include "desatscan/nn/train.hpp"
#include "desatscan/synth.hpp"

namespace desatscan {

/// Demographics, annotations and the SpO2 trace of one recording. Throws
/// ParseError when the recording has no SpO2 channel.
SubjectRecord make_subject_record(const Demographic& demo, std::vector<AnnotationEvent> annotations,
                                  const Recording& recording);

using TensorPtr = std::shared_ptr<const std::vector<float>>;

struct PreprocessedSubject {
  std::vector<EpochRecord> epochs;
  std::vector<TensorPtr> tensors;  // aligned with epochs
  std::size_t dropped = 0;         // staged blocks the recording does not cover
};

/// Notch-filters the EEG channels, cuts the epochs of `stages` and turns each
/// into a 7x129x61 log spectrogram. has_desat uses the subject's events and
/// SpO2 trace. Throws ParseError when an EEG channel is missing.
PreprocessedSubject preprocess_subject(const Recording& recording, const SubjectRecord& subject,
                                       std::span<const SleepStage> stages,
                                       double desat_spo2 = 90.0,
                                       Execution exec = Execution::Parallel);

/// subject_id, stage, epoch_index, start, has_desat, path
void write_epochs_tsv(const std::filesystem::path& path, std::span<const EpochRecord> epochs);
std::vector<EpochRecord> read_epochs_tsv(const std::filesystem::path& path);

using TensorLookup = std::function<TensorPtr(const EpochRecord&)>;

nn::TensorDataset to_tensor_dataset(const LabeledDataset& data, const TensorLookup& lookup);

struct RunOutcome {
  nn::TrainResult<float> trained;
  std::vector<double> validation_scores;
  RunResult result;
};

/// Trains on Train, selects on Test, scores Validation.
RunOutcome run_experiment(const ExperimentData& data, const CohortSplit& split,
                          const TensorLookup& lookup, const nn::ModelConfig& model,
                          const nn::TrainOptions& options = {});

/// Model seed for one run.
std::uint64_t run_seed(std::uint64_t base, Experiment e, SleepStage stage, Scheme scheme, int repeat);

/// "CrossPatient_N3_EqualSubjects_r02"
std::string run_name(Experiment e, SleepStage stage, Scheme scheme, int repeat);

/// Command entry points. Each validates the config before touching the
/// filesystem. Errors surface as ConfigError, MissingInputError or Error.
struct CommandContext {
  PipelineConfig config;
  bool force = false;
  std::ostream* log = nullptr;  // progress lines; null for silence
};

void cmd_synth(const CommandContext& ctx);
void cmd_preprocess(const CommandContext& ctx);
void cmd_cohort(const CommandContext& ctx);
void cmd_split(const CommandContext& ctx);
void cmd_train(const CommandContext& ctx);
/// Writes report.tsv and report.txt under out_dir and returns the text.
std::string cmd_report(const CommandContext& ctx);

}  // namespace desatscan
