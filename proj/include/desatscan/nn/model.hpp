#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "desatscan/epochs.hpp"  // Execution
#include "desatscan/nn/kernels.hpp"

namespace desatscan::nn {

struct BlockSpec {
  int out_channels = 16;
  int stride = 1;
};

struct ModelConfig {
  int in_channels = 7;
  int stem_channels = 16;
  std::vector<BlockSpec> blocks{{16, 1}, {32, 2}};
  int kernel = 3;
  int epochs = 512;
  double learning_rate = 1e-5;
  int batch_size = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double bn_momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch
  double bn_eps = 1e-5;
  std::uint64_t seed = 0;

  /// Throws ConfigError on non-positive sizes, epochs < 1, batch < 1, or a
  /// negative / non-finite learning rate.
  void validate() const;
};

template <class T>
struct ParamTensor {
  std::string name;
  std::vector<std::size_t> shape;
  bool trainable = true;  // false for batch-norm running statistics
  std::vector<T> value;
};

template <class T>
using ParamSet = std::vector<ParamTensor<T>>;

/// Gradient buffers aligned index-for-index with a ParamSet.
template <class T>
using Gradients = std::vector<std::vector<T>>;

enum class Mode { Train, Eval };

/// Input batch, NCHW.
template <class T>
struct BatchView {
  std::span<const T> data;
  int batch = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
};

/// stem conv-BN-ReLU, residual blocks (conv-BN-ReLU-conv-BN plus identity
/// or strided 1x1 conv-BN skip, then ReLU), global average pool, dense -> 1.
template <class T>
class TinyResNet {
 public:
  TinyResNet(const ModelConfig& cfg, std::uint64_t seed);
  TinyResNet(const ModelConfig& cfg, ParamSet<T> params);

  const ModelConfig& config() const { return cfg_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }
  std::size_t parameter_count() const;  // trainable scalars

  /// Logits, one per item. Train mode uses batch statistics, updates the
  /// running statistics and keeps activations for backward().
  std::vector<T> forward(const BatchView<T>& x, Mode mode, Execution exec = Execution::Parallel);

  /// Gradients of sum_i dlogits[i] * logit_i w.r.t. every parameter, for the
  /// most recent Train-mode forward. Non-trainable entries stay zero.
  Gradients<T> backward(std::span<const T> dlogits, Execution exec = Execution::Parallel);

  Gradients<T> zero_gradients() const;

 private:
  struct Conv {
    std::size_t weight;
    int in_c, out_c, kernel, stride, pad;
  };
  struct Norm {
    std::size_t gamma, beta, mean, var;
    int channels;
  };
  struct Block {
    Conv conv1;
    Norm bn1;
    Conv conv2;
    Norm bn2;
    bool projected;
    Conv proj;
    Norm proj_bn;
  };
  struct Shape {
    int c, h, w;
    std::size_t size(int batch) const { return static_cast<std::size_t>(batch) * c * h * w; }
  };
  struct NormCache {
    std::vector<T> xhat, inv_std;
  };
  struct BlockCache {
    Shape in_shape, mid_shape;
    std::vector<T> r1, out;
    NormCache n1, n2, np;
  };

  void build_layout();
  Conv add_conv(const std::string& name, int in_c, int out_c, int kernel, int stride);
  Norm add_norm(const std::string& name, int channels);
  void init(std::uint64_t seed);

  void conv_forward(const Conv& c, const Shape& in, const T* x, T* y, Execution exec) const;
  void conv_backward(const Conv& c, const Shape& in, const T* x, const T* dy, T* dx, T* dw,
                     Execution exec) const;
  void norm_forward(const Norm& n, const Shape& s, const T* x, T* y, Mode mode, NormCache* cache);
  void norm_backward(const Norm& n, const Shape& s, const T* dy, const NormCache& cache, T* dx,
                     Gradients<T>& grads) const;
  static Shape conv_out(const Conv& c, const Shape& in);

  ModelConfig cfg_;
  ParamSet<T> params_;
  Conv stem_{};
  Norm stem_bn_{};
  std::vector<Block> blocks_;
  std::size_t dense_w_ = 0, dense_b_ = 0;

  // Train-mode activations.
  int batch_ = 0;
  Shape input_shape_{};
  std::vector<T> input_;
  Shape stem_shape_{};
  NormCache stem_cache_;
  std::vector<T> stem_out_;
  std::vector<BlockCache> block_cache_;
  std::vector<T> pooled_;
};

/// Mean weighted binary cross-entropy on logits and its gradient.
template <class T>
struct LossResult {
  double loss = 0.0;
  std::vector<T> grad;  // d loss / d logits
};

/// loss = mean_i [ w*y*softplus(-z) + (1-y)*softplus(z) ], stable for any z.
/// Throws ConfigError on non-binary labels or pos_weight <= 0.
template <class T>
LossResult<T> weighted_bce(std::span<const T> logits, std::span<const int> labels, double pos_weight);

template <class T>
struct AdamState {
  Gradients<T> m, v;
  long long step = 0;
};

template <class T>
AdamState<T> make_adam_state(const ParamSet<T>& params);

/// Bias-corrected Adam update of every trainable tensor.
template <class T>
void adam_step(AdamState<T>& state, ParamSet<T>& params, const Gradients<T>& grads, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

}  // namespace desatscan::nn
