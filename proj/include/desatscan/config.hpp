#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "desatscan/cohort.hpp"
#include "desatscan/experiments.hpp"
#include "desatscan/metrics.hpp"
#include "desatscan/nn/model.hpp"
#include "desatscan/split.hpp"
#include "desatscan/synth.hpp"

namespace desatscan {

/// Settings shared by every pipeline command. Text form is one `key = value`
/// per line; `#` starts a comment. Model keys use a `model.` prefix and
/// generator keys a `synth.` prefix.
struct PipelineConfig {
  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir = "out";
  std::vector<SleepStage> stages{kAnalysisStages.begin(), kAnalysisStages.end()};
  Scheme scheme = Scheme::EqualSubjects;
  int repeats = 11;
  Experiment experiment = Experiment::CrossPatient;
  CohortThresholds thresholds;
  PosWeightMode pos_weight_mode = PosWeightMode::TotalOverPositive;
  CiMethod ci_method = CiMethod::StudentT;
  nn::ModelConfig model;  // model.seed is derived per run from `seed`
  SynthConfig synth;      // synth.seed follows `seed`
  std::uint64_t seed = 0;

  /// Throws ConfigError when any invariant fails.
  void validate() const;
};

/// Applies one key. Throws ConfigError on an unknown key or a bad value.
void set_config_option(PipelineConfig& cfg, std::string_view key, std::string_view value);

/// Parses config text over the defaults; relative paths are resolved
/// against `base_dir`. Does not validate.
PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});

/// Throws MissingInputError when the file does not exist.
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical text of every setting; parse_config(format_config(c)) == c.
std::string format_config(const PipelineConfig& cfg);

}  // namespace desatscan
