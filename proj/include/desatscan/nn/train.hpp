#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "desatscan/nn/model.hpp"

namespace desatscan::nn {

/// Labeled CHW float tensors of one shape. Items are shared so the same
/// tensor can sit in several datasets without copies.
struct TensorDataset {
  int channels = 0, height = 0, width = 0;
  std::vector<std::shared_ptr<const std::vector<float>>> items;
  std::vector<int> labels;

  std::size_t size() const { return items.size(); }
  std::size_t item_size() const { return static_cast<std::size_t>(channels) * height * width; }
  /// Throws ConfigError on a size mismatch or a label outside {0, 1}.
  void add(std::shared_ptr<const std::vector<float>> item, int label);
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double test_ba = 0.0;
  double test_auc = 0.0;
};

struct TrainHistory {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;  // 1-based epoch whose parameters were kept
};

template <class T>
struct TrainedModel {
  ModelConfig config;
  ParamSet<T> params;
};

template <class T>
struct TrainResult {
  TrainedModel<T> model;
  TrainHistory history;
};

struct TrainOptions {
  double pos_weight = 1.0;
  Execution exec = Execution::Parallel;
  std::function<void(const EpochLog&)> on_epoch;
};

/// Minibatch Adam on `train` with a seeded reshuffle every epoch; after each
/// epoch the model is scored on `test` and the parameters with the highest
/// test BA are kept (ties keep the earliest). Throws ConfigError when either
/// set lacks a class or the shapes disagree with the config.
template <class T>
TrainResult<T> train(const TensorDataset& train_set, const TensorDataset& test_set,
                     const ModelConfig& cfg, const TrainOptions& options = {});

/// Eval-mode sigmoid scores clamped to [1e-7, 1 - 1e-7].
template <class T>
std::vector<double> predict(const TrainedModel<T>& model, const TensorDataset& data,
                            Execution exec = Execution::Parallel);

double sigmoid_score(double logit);

/// key=value lines covering every ModelConfig field.
std::string format_model_config(const ModelConfig& cfg);
/// Applies one key (without any "model." prefix). Returns false for an
/// unknown key; throws ConfigError on a malformed value.
bool set_model_option(ModelConfig& cfg, std::string_view key, std::string_view value);
ModelConfig parse_model_config(std::string_view text);

/// "DSCK" | u32 version | u32 config length | config text | u32 tensor count |
/// per tensor: u32 name length | name | DSTF tensor.
void write_checkpoint(const std::filesystem::path& path, const TrainedModel<float>& model);
TrainedModel<float> read_checkpoint(const std::filesystem::path& path);

/// epoch, train_loss, test_ba, test_auc
void write_train_log(const std::filesystem::path& path, const TrainHistory& history);

}  // namespace desatscan::nn
