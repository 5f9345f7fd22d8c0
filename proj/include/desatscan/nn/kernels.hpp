#pragma once

#include <cstddef>

namespace desatscan::nn {

/// Shape of a 2-D convolution over an NCHW batch (no bias, square kernel).
struct ConvGeometry {
  int batch = 1;
  int in_c = 1, in_h = 1, in_w = 1;
  int out_c = 1;
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
  std::size_t in_size() const { return static_cast<std::size_t>(batch) * in_c * in_h * in_w; }
  std::size_t out_size() const { return static_cast<std::size_t>(batch) * out_c * out_h() * out_w(); }
  std::size_t weight_size() const { return static_cast<std::size_t>(out_c) * in_c * kernel * kernel; }
};

// Weight layout is [out_c][in_c][kernel][kernel]. Outputs are overwritten.
// In backward, `grad_in` may be null when the input gradient is not needed.

/// Direct nested-loop convolution; the correctness reference.
namespace reference {
template <class T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* weight, T* out);
template <class T>
void conv2d_backward(const ConvGeometry& g, const T* in, const T* weight, const T* grad_out,
                     T* grad_in, T* grad_weight);
}  // namespace reference

/// im2col + GEMM per batch item, items spread over OpenMP threads. Weight
/// gradients are reduced over items in index order, so results do not
/// depend on the thread count.
namespace parallel {
template <class T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* weight, T* out);
template <class T>
void conv2d_backward(const ConvGeometry& g, const T* in, const T* weight, const T* grad_out,
                     T* grad_in, T* grad_weight);
}  // namespace parallel

/// Batch normalization over NCHW with per-channel statistics; channels are
/// processed in parallel, each reduction runs in a fixed order.
template <class T>
void batchnorm_forward_train(const T* x, int batch, int channels, int spatial, const T* gamma,
                             const T* beta, double eps, T* y, T* xhat, T* inv_std,
                             T* batch_mean, T* batch_var);
template <class T>
void batchnorm_forward_eval(const T* x, int batch, int channels, int spatial, const T* gamma,
                            const T* beta, const T* running_mean, const T* running_var, double eps,
                            T* y);
template <class T>
void batchnorm_backward(const T* grad_y, const T* xhat, const T* inv_std, const T* gamma, int batch,
                        int channels, int spatial, T* grad_x, T* grad_gamma, T* grad_beta);

}  // namespace desatscan::nn
