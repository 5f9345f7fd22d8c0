#include "desatscan/nn/model.hpp"

#include <algorithm>
#include <cmath>

#include "desatscan/common.hpp"
#include "desatscan/random.hpp"

namespace desatscan::nn {

void ModelConfig::validate() const {
  if (in_channels < 1 || stem_channels < 1) throw ConfigError("model: channel counts must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("model: kernel must be odd and >= 1");
  for (const auto& b : blocks)
    if (b.out_channels < 1 || b.stride < 1) throw ConfigError("model: bad residual block spec");
  if (epochs < 1) throw ConfigError("model: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("model: batch_size must be >= 1");
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate))
    throw ConfigError("model: learning_rate must be finite and >= 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(adam_eps > 0))
    throw ConfigError("model: bad Adam hyperparameters");
  if (!(bn_momentum >= 0 && bn_momentum < 1)) throw ConfigError("model: bn_momentum must be in [0,1)");
}

template <class T>
TinyResNet<T>::TinyResNet(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  build_layout();
  init(seed);
}

template <class T>
TinyResNet<T>::TinyResNet(const ModelConfig& cfg, ParamSet<T> params) : cfg_(cfg) {
  cfg_.validate();
  build_layout();
  if (params.size() != params_.size()) throw ConfigError("model: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != params_[i].name || params[i].shape != params_[i].shape ||
        params[i].value.size() != params_[i].value.size())
      throw ConfigError("model: parameter '" + params[i].name + "' does not match the config");
    params_[i].value = std::move(params[i].value);
  }
}

template <class T>
typename TinyResNet<T>::Conv TinyResNet<T>::add_conv(const std::string& name, int in_c, int out_c,
                                                     int kernel, int stride) {
  Conv c{params_.size(), in_c, out_c, kernel, stride, kernel / 2};
  params_.push_back({name + ".weight",
                     {static_cast<std::size_t>(out_c), static_cast<std::size_t>(in_c),
                      static_cast<std::size_t>(kernel), static_cast<std::size_t>(kernel)},
                     true,
                     std::vector<T>(static_cast<std::size_t>(out_c) * in_c * kernel * kernel)});
  return c;
}

template <class T>
typename TinyResNet<T>::Norm TinyResNet<T>::add_norm(const std::string& name, int channels) {
  const auto n = static_cast<std::size_t>(channels);
  Norm b{params_.size(), params_.size() + 1, params_.size() + 2, params_.size() + 3, channels};
  params_.push_back({name + ".gamma", {n}, true, std::vector<T>(n, T(1))});
  params_.push_back({name + ".beta", {n}, true, std::vector<T>(n, T(0))});
  params_.push_back({name + ".running_mean", {n}, false, std::vector<T>(n, T(0))});
  params_.push_back({name + ".running_var", {n}, false, std::vector<T>(n, T(1))});
  return b;
}

template <class T>
void TinyResNet<T>::build_layout() {
  params_.clear();
  blocks_.clear();
  stem_ = add_conv("stem.conv", cfg_.in_channels, cfg_.stem_channels, cfg_.kernel, 1);
  stem_bn_ = add_norm("stem.bn", cfg_.stem_channels);
  int ch = cfg_.stem_channels;
  for (std::size_t i = 0; i < cfg_.blocks.size(); ++i) {
    const auto& spec = cfg_.blocks[i];
    const std::string p = "block" + std::to_string(i);
    Block b{};
    b.conv1 = add_conv(p + ".conv1", ch, spec.out_channels, cfg_.kernel, spec.stride);
    b.bn1 = add_norm(p + ".bn1", spec.out_channels);
    b.conv2 = add_conv(p + ".conv2", spec.out_channels, spec.out_channels, cfg_.kernel, 1);
    b.bn2 = add_norm(p + ".bn2", spec.out_channels);
    b.projected = spec.stride != 1 || spec.out_channels != ch;
    if (b.projected) {
      b.proj = add_conv(p + ".proj", ch, spec.out_channels, 1, spec.stride);
      b.proj_bn = add_norm(p + ".proj_bn", spec.out_channels);
    }
    blocks_.push_back(b);
    ch = spec.out_channels;
  }
  dense_w_ = params_.size();
  params_.push_back({"dense.weight", {static_cast<std::size_t>(ch)}, true,
                     std::vector<T>(static_cast<std::size_t>(ch))});
  dense_b_ = params_.size();
  params_.push_back({"dense.bias", {1}, true, std::vector<T>(1, T(0))});
}

template <class T>
void TinyResNet<T>::init(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& p : params_) {
    if (p.shape.size() == 4) {
      const double fan_in = static_cast<double>(p.shape[1] * p.shape[2] * p.shape[3]);
      const double sd = std::sqrt(2.0 / fan_in);
      for (auto& v : p.value) v = static_cast<T>(rng.normal() * sd);
    }
  }
  auto& w = params_[dense_w_].value;
  const double bound = 1.0 / std::sqrt(static_cast<double>(w.size()));
  for (auto& v : w) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <class T>
std::size_t TinyResNet<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.trainable) n += p.value.size();
  return n;
}

template <class T>
Gradients<T> TinyResNet<T>::zero_gradients() const {
  Gradients<T> g(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) g[i].assign(params_[i].value.size(), T(0));
  return g;
}

template <class T>
typename TinyResNet<T>::Shape TinyResNet<T>::conv_out(const Conv& c, const Shape& in) {
  ConvGeometry g{1, c.in_c, in.h, in.w, c.out_c, c.kernel, c.stride, c.pad};
  return {c.out_c, g.out_h(), g.out_w()};
}

template <class T>
void TinyResNet<T>::conv_forward(const Conv& c, const Shape& in, const T* x, T* y,
                                 Execution exec) const {
  const ConvGeometry g{batch_, c.in_c, in.h, in.w, c.out_c, c.kernel, c.stride, c.pad};
  const T* w = params_[c.weight].value.data();
  if (exec == Execution::Serial) reference::conv2d_forward(g, x, w, y);
  else parallel::conv2d_forward(g, x, w, y);
}

template <class T>
void TinyResNet<T>::conv_backward(const Conv& c, const Shape& in, const T* x, const T* dy, T* dx,
                                  T* dw, Execution exec) const {
  const ConvGeometry g{batch_, c.in_c, in.h, in.w, c.out_c, c.kernel, c.stride, c.pad};
  const T* w = params_[c.weight].value.data();
  if (exec == Execution::Serial) reference::conv2d_backward(g, x, w, dy, dx, dw);
  else parallel::conv2d_backward(g, x, w, dy, dx, dw);
}

template <class T>
void TinyResNet<T>::norm_forward(const Norm& n, const Shape& s, const T* x, T* y, Mode mode,
                                 NormCache* cache) {
  const int spatial = s.h * s.w;
  const T* gamma = params_[n.gamma].value.data();
  const T* beta = params_[n.beta].value.data();
  auto& rm = params_[n.mean].value;
  auto& rv = params_[n.var].value;
  if (mode == Mode::Eval) {
    batchnorm_forward_eval(x, batch_, n.channels, spatial, gamma, beta, rm.data(), rv.data(),
                           cfg_.bn_eps, y);
    return;
  }
  cache->xhat.resize(s.size(batch_));
  cache->inv_std.resize(static_cast<std::size_t>(n.channels));
  std::vector<T> mean(n.channels), var(n.channels);
  batchnorm_forward_train(x, batch_, n.channels, spatial, gamma, beta, cfg_.bn_eps, y,
                          cache->xhat.data(), cache->inv_std.data(), mean.data(), var.data());
  const double m = static_cast<double>(batch_) * spatial;
  const double unbias = m > 1 ? m / (m - 1) : 1.0;
  const double mom = cfg_.bn_momentum;
  for (int c = 0; c < n.channels; ++c) {
    rm[c] = static_cast<T>(mom * rm[c] + (1 - mom) * mean[c]);
    rv[c] = static_cast<T>(mom * rv[c] + (1 - mom) * var[c] * unbias);
  }
}

template <class T>
void TinyResNet<T>::norm_backward(const Norm& n, const Shape& s, const T* dy, const NormCache& cache,
                                  T* dx, Gradients<T>& grads) const {
  batchnorm_backward(dy, cache.xhat.data(), cache.inv_std.data(), params_[n.gamma].value.data(),
                     batch_, n.channels, s.h * s.w, dx, grads[n.gamma].data(), grads[n.beta].data());
}

template <class T>
std::vector<T> TinyResNet<T>::forward(const BatchView<T>& x, Mode mode, Execution exec) {
  if (x.batch < 1) throw ConfigError("forward: empty batch");
  if (x.channels != cfg_.in_channels)
    throw ConfigError("forward: expected " + std::to_string(cfg_.in_channels) + " input channels");
  const Shape in{x.channels, x.height, x.width};
  if (x.data.size() != in.size(x.batch)) throw ConfigError("forward: batch data size mismatch");
  batch_ = x.batch;
  const bool train = mode == Mode::Train;

  const Shape s0 = conv_out(stem_, in);
  std::vector<T> z(s0.size(batch_));
  conv_forward(stem_, in, x.data.data(), z.data(), exec);
  std::vector<T> a(z.size());
  norm_forward(stem_bn_, s0, z.data(), a.data(), mode, train ? &stem_cache_ : nullptr);
  for (auto& v : a) v = std::max(v, T(0));
  if (train) {
    input_shape_ = in;
    input_.assign(x.data.begin(), x.data.end());
    stem_shape_ = s0;
    stem_out_ = a;
    block_cache_.assign(blocks_.size(), {});
  }

  Shape cur = s0;
  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    const auto& b = blocks_[bi];
    const Shape mid = conv_out(b.conv1, cur);
    NormCache* n1 = train ? &block_cache_[bi].n1 : nullptr;
    NormCache* n2 = train ? &block_cache_[bi].n2 : nullptr;
    NormCache* np = train ? &block_cache_[bi].np : nullptr;

    std::vector<T> t(mid.size(batch_)), r1(t.size());
    conv_forward(b.conv1, cur, a.data(), t.data(), exec);
    norm_forward(b.bn1, mid, t.data(), r1.data(), mode, n1);
    for (auto& v : r1) v = std::max(v, T(0));

    std::vector<T> y2(t.size());
    conv_forward(b.conv2, mid, r1.data(), t.data(), exec);
    norm_forward(b.bn2, mid, t.data(), y2.data(), mode, n2);

    if (b.projected) {
      std::vector<T> yp(t.size());
      conv_forward(b.proj, cur, a.data(), t.data(), exec);
      norm_forward(b.proj_bn, mid, t.data(), yp.data(), mode, np);
      for (std::size_t i = 0; i < y2.size(); ++i) y2[i] += yp[i];
    } else {
      for (std::size_t i = 0; i < y2.size(); ++i) y2[i] += a[i];
    }
    for (auto& v : y2) v = std::max(v, T(0));

    if (train) {
      auto& bc = block_cache_[bi];
      bc.in_shape = cur;
      bc.mid_shape = mid;
      bc.r1 = std::move(r1);
      bc.out = y2;
    }
    a = std::move(y2);
    cur = mid;
  }

  const int spatial = cur.h * cur.w;
  std::vector<T> pooled(static_cast<std::size_t>(batch_) * cur.c);
  for (int i = 0; i < batch_; ++i)
    for (int c = 0; c < cur.c; ++c) {
      const T* p = a.data() + (static_cast<std::size_t>(i) * cur.c + c) * spatial;
      double s = 0.0;
      for (int k = 0; k < spatial; ++k) s += p[k];
      pooled[static_cast<std::size_t>(i) * cur.c + c] = static_cast<T>(s / spatial);
    }

  const auto& w = params_[dense_w_].value;
  const T bias = params_[dense_b_].value[0];
  std::vector<T> logits(static_cast<std::size_t>(batch_));
  for (int i = 0; i < batch_; ++i) {
    double s = bias;
    for (int c = 0; c < cur.c; ++c) s += static_cast<double>(w[c]) * pooled[static_cast<std::size_t>(i) * cur.c + c];
    logits[i] = static_cast<T>(s);
  }
  if (train) pooled_ = std::move(pooled);
  return logits;
}

template <class T>
Gradients<T> TinyResNet<T>::backward(std::span<const T> dlogits, Execution exec) {
  if (input_.empty() || static_cast<int>(dlogits.size()) != batch_)
    throw ConfigError("backward: needs a preceding Train-mode forward with the same batch");
  auto grads = zero_gradients();

  const Shape last = blocks_.empty() ? stem_shape_ : block_cache_.back().mid_shape;
  const int spatial = last.h * last.w;
  const auto& w = params_[dense_w_].value;
  auto& gw = grads[dense_w_];
  double gb = 0.0;
  std::vector<T> da(last.size(batch_));
  for (int i = 0; i < batch_; ++i) {
    gb += dlogits[i];
    for (int c = 0; c < last.c; ++c) {
      const auto pc = static_cast<std::size_t>(i) * last.c + c;
      gw[c] += dlogits[i] * pooled_[pc];
      const T g = static_cast<T>(static_cast<double>(dlogits[i]) * w[c] / spatial);
      std::fill_n(da.data() + pc * spatial, spatial, g);
    }
  }
  grads[dense_b_][0] = static_cast<T>(gb);

  for (std::size_t bi = blocks_.size(); bi-- > 0;) {
    const auto& b = blocks_[bi];
    const auto& bc = block_cache_[bi];
    const T* block_in = bi == 0 ? stem_out_.data() : block_cache_[bi - 1].out.data();

    // Through the closing ReLU.
    for (std::size_t i = 0; i < da.size(); ++i)
      if (bc.out[i] <= T(0)) da[i] = T(0);

    std::vector<T> dt(bc.mid_shape.size(batch_));
    std::vector<T> dr1(dt.size());
    norm_backward(b.bn2, bc.mid_shape, da.data(), bc.n2, dt.data(), grads);
    conv_backward(b.conv2, bc.mid_shape, bc.r1.data(), dt.data(), dr1.data(),
                  grads[b.conv2.weight].data(), exec);
    for (std::size_t i = 0; i < dr1.size(); ++i)
      if (bc.r1[i] <= T(0)) dr1[i] = T(0);
    norm_backward(b.bn1, bc.mid_shape, dr1.data(), bc.n1, dt.data(), grads);
    std::vector<T> din(bc.in_shape.size(batch_));
    conv_backward(b.conv1, bc.in_shape, block_in, dt.data(), din.data(),
                  grads[b.conv1.weight].data(), exec);

    if (b.projected) {
      norm_backward(b.proj_bn, bc.mid_shape, da.data(), bc.np, dt.data(), grads);
      std::vector<T> dskip(din.size());
      conv_backward(b.proj, bc.in_shape, block_in, dt.data(), dskip.data(),
                    grads[b.proj.weight].data(), exec);
      for (std::size_t i = 0; i < din.size(); ++i) din[i] += dskip[i];
    } else {
      for (std::size_t i = 0; i < din.size(); ++i) din[i] += da[i];
    }
    da = std::move(din);
  }

  for (std::size_t i = 0; i < da.size(); ++i)
    if (stem_out_[i] <= T(0)) da[i] = T(0);
  std::vector<T> dz(da.size());
  norm_backward(stem_bn_, stem_shape_, da.data(), stem_cache_, dz.data(), grads);
  conv_backward(stem_, input_shape_, input_.data(), dz.data(), nullptr, grads[stem_.weight].data(),
                exec);
  return grads;
}

namespace {

template <class T>
double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

template <class T>
LossResult<T> weighted_bce(std::span<const T> logits, std::span<const int> labels, double pos_weight) {
  if (logits.size() != labels.size()) throw ConfigError("weighted_bce: size mismatch");
  if (!(pos_weight > 0)) throw ConfigError("weighted_bce: pos_weight must be > 0");
  LossResult<T> r;
  r.grad.resize(logits.size());
  if (logits.empty()) return r;
  const double n = static_cast<double>(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const int y = labels[i];
    if (y != 0 && y != 1) throw ConfigError("weighted_bce: labels must be 0 or 1");
    const double z = logits[i];
    const double s = sigmoid(z);
    if (y == 1) {
      total += pos_weight * softplus<T>(-z);
      r.grad[i] = static_cast<T>(pos_weight * (s - 1.0) / n);
    } else {
      total += softplus<T>(z);
      r.grad[i] = static_cast<T>(s / n);
    }
  }
  r.loss = total / n;
  return r;
}

template <class T>
AdamState<T> make_adam_state(const ParamSet<T>& params) {
  AdamState<T> s;
  for (const auto& p : params) {
    s.m.emplace_back(p.value.size(), T(0));
    s.v.emplace_back(p.value.size(), T(0));
  }
  return s;
}

template <class T>
void adam_step(AdamState<T>& state, ParamSet<T>& params, const Gradients<T>& grads, double lr,
               double beta1, double beta2, double eps) {
  if (state.m.size() != params.size() || grads.size() != params.size())
    throw ConfigError("adam_step: state/gradient layout does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.trainable) continue;
    if (grads[i].size() != p.value.size() || state.m[i].size() != p.value.size())
      throw ConfigError("adam_step: shape mismatch for '" + p.name + "'");
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = grads[i][k];
      const double mk = beta1 * m[k] + (1.0 - beta1) * g;
      const double vk = beta2 * v[k] + (1.0 - beta2) * g * g;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double mhat = mk / c1;
      const double vhat = vk / c2;
      p.value[k] = static_cast<T>(p.value[k] - lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

template class TinyResNet<float>;
template class TinyResNet<double>;
template LossResult<float> weighted_bce<float>(std::span<const float>, std::span<const int>, double);
template LossResult<double> weighted_bce<double>(std::span<const double>, std::span<const int>, double);
template AdamState<float> make_adam_state<float>(const ParamSet<float>&);
template AdamState<double> make_adam_state<double>(const ParamSet<double>&);
template void adam_step<float>(AdamState<float>&, ParamSet<float>&, const Gradients<float>&, double,
                               double, double, double);
template void adam_step<double>(AdamState<double>&, ParamSet<double>&, const Gradients<double>&,
                                double, double, double, double);

}  // namespace desatscan::nn
