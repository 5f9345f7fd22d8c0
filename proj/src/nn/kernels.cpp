#include "desatscan/nn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

namespace desatscan::nn {

namespace reference {

template <class T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* weight, T* out) {
  const int oh = g.out_h(), ow = g.out_w();
  for (int b = 0; b < g.batch; ++b)
    for (int co = 0; co < g.out_c; ++co)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          T acc = 0;
          for (int ci = 0; ci < g.in_c; ++ci)
            for (int ky = 0; ky < g.kernel; ++ky)
              for (int kx = 0; kx < g.kernel; ++kx) {
                const int iy = y * g.stride - g.pad + ky;
                const int ix = x * g.stride - g.pad + kx;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
                acc += in[((static_cast<std::size_t>(b) * g.in_c + ci) * g.in_h + iy) * g.in_w + ix] *
                       weight[((static_cast<std::size_t>(co) * g.in_c + ci) * g.kernel + ky) * g.kernel + kx];
              }
          out[((static_cast<std::size_t>(b) * g.out_c + co) * oh + y) * ow + x] = acc;
        }
}

template <class T>
void conv2d_backward(const ConvGeometry& g, const T* in, const T* weight, const T* grad_out,
                     T* grad_in, T* grad_weight) {
  const int oh = g.out_h(), ow = g.out_w();
  std::fill(grad_weight, grad_weight + g.weight_size(), T(0));
  if (grad_in) std::fill(grad_in, grad_in + g.in_size(), T(0));
  for (int b = 0; b < g.batch; ++b)
    for (int co = 0; co < g.out_c; ++co)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          const T go = grad_out[((static_cast<std::size_t>(b) * g.out_c + co) * oh + y) * ow + x];
          for (int ci = 0; ci < g.in_c; ++ci)
            for (int ky = 0; ky < g.kernel; ++ky)
              for (int kx = 0; kx < g.kernel; ++kx) {
                const int iy = y * g.stride - g.pad + ky;
                const int ix = x * g.stride - g.pad + kx;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
                const auto ii = ((static_cast<std::size_t>(b) * g.in_c + ci) * g.in_h + iy) * g.in_w + ix;
                const auto wi = ((static_cast<std::size_t>(co) * g.in_c + ci) * g.kernel + ky) * g.kernel + kx;
                grad_weight[wi] += go * in[ii];
                if (grad_in) grad_in[ii] += go * weight[wi];
              }
        }
}

}  // namespace reference

namespace parallel {
namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Output columns x in [first, last) whose input column x*s - p + kx is inside the image.
inline std::pair<int, int> valid_columns(const ConvGeometry& g, int kx, int ow) {
  const int off = kx - g.pad;
  const int first = off >= 0 ? 0 : (-off + g.stride - 1) / g.stride;
  const int span = g.in_w - 1 - off;
  const int last = span < 0 ? 0 : std::min(ow, span / g.stride + 1);
  return {std::min(first, last), last};
}

// col[(ci*k + ky)*k + kx][y*ow + x] = in[ci][y*s - p + ky][x*s - p + kx]
template <class T>
void im2col(const ConvGeometry& g, const T* in, T* col) {
  const int oh = g.out_h(), ow = g.out_w();
  const std::size_t hw = static_cast<std::size_t>(oh) * ow;
  for (int ci = 0; ci < g.in_c; ++ci)
    for (int ky = 0; ky < g.kernel; ++ky)
      for (int kx = 0; kx < g.kernel; ++kx) {
        T* row = col + ((static_cast<std::size_t>(ci) * g.kernel + ky) * g.kernel + kx) * hw;
        const T* plane = in + static_cast<std::size_t>(ci) * g.in_h * g.in_w;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * g.stride - g.pad + ky;
          T* dst = row + static_cast<std::size_t>(y) * ow;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.in_w;
          const auto [x0, x1] = valid_columns(g, kx, ow);
          std::fill(dst, dst + x0, T(0));
          const T* s = src + x0 * g.stride - g.pad + kx;
          if (g.stride == 1) std::copy(s, s + (x1 - x0), dst + x0);
          else
            for (int x = x0; x < x1; ++x, s += g.stride) dst[x] = *s;
          std::fill(dst + x1, dst + ow, T(0));
        }
      }
}

template <class T>
void col2im_add(const ConvGeometry& g, const T* col, T* in) {
  const int oh = g.out_h(), ow = g.out_w();
  const std::size_t hw = static_cast<std::size_t>(oh) * ow;
  for (int ci = 0; ci < g.in_c; ++ci)
    for (int ky = 0; ky < g.kernel; ++ky)
      for (int kx = 0; kx < g.kernel; ++kx) {
        const T* row = col + ((static_cast<std::size_t>(ci) * g.kernel + ky) * g.kernel + kx) * hw;
        T* plane = in + static_cast<std::size_t>(ci) * g.in_h * g.in_w;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          const T* src = row + static_cast<std::size_t>(y) * ow;
          const auto [x0, x1] = valid_columns(g, kx, ow);
          T* dst = plane + static_cast<std::size_t>(iy) * g.in_w + x0 * g.stride - g.pad + kx;
          for (int x = x0; x < x1; ++x, dst += g.stride) *dst += src[x];
        }
      }
}

}  // namespace

template <class T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* weight, T* out) {
  const int rows = g.in_c * g.kernel * g.kernel;
  const int hw = g.out_h() * g.out_w();
  const std::size_t in_item = static_cast<std::size_t>(g.in_c) * g.in_h * g.in_w;
  const std::size_t out_item = static_cast<std::size_t>(g.out_c) * hw;
  const Eigen::Map<const RowMat<T>> w(weight, g.out_c, rows);
#pragma omp parallel
  {
    std::vector<T> col(static_cast<std::size_t>(rows) * hw);
#pragma omp for schedule(static)
    for (int b = 0; b < g.batch; ++b) {
      im2col(g, in + b * in_item, col.data());
      Eigen::Map<const RowMat<T>> c(col.data(), rows, hw);
      Eigen::Map<RowMat<T>> o(out + b * out_item, g.out_c, hw);
      o.noalias() = w * c;
    }
  }
}

template <class T>
void conv2d_backward(const ConvGeometry& g, const T* in, const T* weight, const T* grad_out,
                     T* grad_in, T* grad_weight) {
  const int rows = g.in_c * g.kernel * g.kernel;
  const int hw = g.out_h() * g.out_w();
  const std::size_t in_item = static_cast<std::size_t>(g.in_c) * g.in_h * g.in_w;
  const std::size_t out_item = static_cast<std::size_t>(g.out_c) * hw;
  const std::size_t wsize = g.weight_size();
  std::vector<T> per_item(wsize * g.batch);
  const Eigen::Map<const RowMat<T>> w(weight, g.out_c, rows);
#pragma omp parallel
  {
    std::vector<T> col(static_cast<std::size_t>(rows) * hw);
    std::vector<T> dcol(grad_in ? col.size() : 0);
#pragma omp for schedule(static)
    for (int b = 0; b < g.batch; ++b) {
      im2col(g, in + b * in_item, col.data());
      Eigen::Map<const RowMat<T>> c(col.data(), rows, hw);
      Eigen::Map<const RowMat<T>> go(grad_out + b * out_item, g.out_c, hw);
      Eigen::Map<RowMat<T>> dw(per_item.data() + b * wsize, g.out_c, rows);
      dw.noalias() = go * c.transpose();
      if (grad_in) {
        Eigen::Map<RowMat<T>> dc(dcol.data(), rows, hw);
        dc.noalias() = w.transpose() * go;
        T* gi = grad_in + b * in_item;
        std::fill(gi, gi + in_item, T(0));
        col2im_add(g, dcol.data(), gi);
      }
    }
  }
  const auto n = static_cast<std::ptrdiff_t>(wsize);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    T acc = 0;
    for (int b = 0; b < g.batch; ++b) acc += per_item[b * wsize + i];
    grad_weight[i] = acc;
  }
}

}  // namespace parallel

template <class T>
void batchnorm_forward_train(const T* x, int batch, int channels, int spatial, const T* gamma,
                             const T* beta, double eps, T* y, T* xhat, T* inv_std, T* batch_mean,
                             T* batch_var) {
  const double m = static_cast<double>(batch) * spatial;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (int b = 0; b < batch; ++b) {
      const T* p = x + (static_cast<std::size_t>(b) * channels + c) * spatial;
      for (int i = 0; i < spatial; ++i) sum += p[i];
    }
    const double mean = sum / m;
    double sq = 0.0;
    for (int b = 0; b < batch; ++b) {
      const T* p = x + (static_cast<std::size_t>(b) * channels + c) * spatial;
      for (int i = 0; i < spatial; ++i) {
        const double d = p[i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / m;
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[c] = static_cast<T>(istd);
    batch_mean[c] = static_cast<T>(mean);
    batch_var[c] = static_cast<T>(var);
    for (int b = 0; b < batch; ++b) {
      const auto off = (static_cast<std::size_t>(b) * channels + c) * spatial;
      for (int i = 0; i < spatial; ++i) {
        const T h = static_cast<T>((x[off + i] - mean) * istd);
        xhat[off + i] = h;
        y[off + i] = gamma[c] * h + beta[c];
      }
    }
  }
}

template <class T>
void batchnorm_forward_eval(const T* x, int batch, int channels, int spatial, const T* gamma,
                            const T* beta, const T* running_mean, const T* running_var, double eps,
                            T* y) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const T scale = static_cast<T>(gamma[c] / std::sqrt(static_cast<double>(running_var[c]) + eps));
    const T shift = beta[c] - running_mean[c] * scale;
    for (int b = 0; b < batch; ++b) {
      const auto off = (static_cast<std::size_t>(b) * channels + c) * spatial;
      for (int i = 0; i < spatial; ++i) y[off + i] = x[off + i] * scale + shift;
    }
  }
}

template <class T>
void batchnorm_backward(const T* grad_y, const T* xhat, const T* inv_std, const T* gamma, int batch,
                        int channels, int spatial, T* grad_x, T* grad_gamma, T* grad_beta) {
  const double m = static_cast<double>(batch) * spatial;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int b = 0; b < batch; ++b) {
      const auto off = (static_cast<std::size_t>(b) * channels + c) * spatial;
      for (int i = 0; i < spatial; ++i) {
        sum_dy += grad_y[off + i];
        sum_dy_xhat += static_cast<double>(grad_y[off + i]) * xhat[off + i];
      }
    }
    grad_gamma[c] = static_cast<T>(sum_dy_xhat);
    grad_beta[c] = static_cast<T>(sum_dy);
    const double k = static_cast<double>(gamma[c]) * inv_std[c] / m;
    for (int b = 0; b < batch; ++b) {
      const auto off = (static_cast<std::size_t>(b) * channels + c) * spatial;
      for (int i = 0; i < spatial; ++i)
        grad_x[off + i] =
            static_cast<T>(k * (m * grad_y[off + i] - sum_dy - xhat[off + i] * sum_dy_xhat));
    }
  }
}

#define DESATSCAN_INSTANTIATE(T)                                                                 \
  template void reference::conv2d_forward<T>(const ConvGeometry&, const T*, const T*, T*);      \
  template void reference::conv2d_backward<T>(const ConvGeometry&, const T*, const T*, const T*, \
                                              T*, T*);                                           \
  template void parallel::conv2d_forward<T>(const ConvGeometry&, const T*, const T*, T*);       \
  template void parallel::conv2d_backward<T>(const ConvGeometry&, const T*, const T*, const T*,  \
                                             T*, T*);                                            \
  template void batchnorm_forward_train<T>(const T*, int, int, int, const T*, const T*, double,  \
                                           T*, T*, T*, T*, T*);                                  \
  template void batchnorm_forward_eval<T>(const T*, int, int, int, const T*, const T*, const T*, \
                                          const T*, double, T*);                                 \
  template void batchnorm_backward<T>(const T*, const T*, const T*, const T*, int, int, int, T*, \
                                      T*, T*);

DESATSCAN_INSTANTIATE(float)
DESATSCAN_INSTANTIATE(double)

}  // namespace desatscan::nn
