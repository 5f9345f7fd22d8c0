#include "desatscan/fft.hpp"

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace desatscan {
namespace {

// exp(-2 pi i k / n) for k < n/2, cached per thread for the last size used.
const std::vector<std::complex<double>>& twiddles(std::size_t n) {
  thread_local std::vector<std::complex<double>> table;
  thread_local std::size_t table_n = 0;
  if (table_n != n) {
    table.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k)
      table[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / n);
    table_n = n;
  }
  return table;
}

void radix2(std::span<std::complex<double>> a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const auto& tw = twiddles(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const double wr = tw[j * stride].real();
        const double wi = inverse ? -tw[j * stride].imag() : tw[j * stride].imag();
        const auto u = a[i + j];
        const auto x = a[i + j + half];
        const std::complex<double> v(x.real() * wr - x.imag() * wi, x.real() * wi + x.imag() * wr);
        a[i + j] = u + v;
        a[i + j + half] = u - v;
      }
    }
  }
}

void direct(std::span<std::complex<double>> a, bool inverse) {
  const std::size_t n = a.size();
  std::vector<std::complex<double>> out(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc{};
    for (std::size_t t = 0; t < n; ++t)
      acc += a[t] * std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / n);
    out[k] = acc;
  }
  std::copy(out.begin(), out.end(), a.begin());
}

}  // namespace

void fft_inplace(std::span<std::complex<double>> data, bool inverse) {
  if (data.size() <= 1) return;
  if (is_power_of_two(data.size())) radix2(data, inverse);
  else direct(data, inverse);
}

}  // namespace desatscan
