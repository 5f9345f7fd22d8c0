#include "desatscan/filter.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "desatscan/common.hpp"

namespace desatscan {
namespace {

using cplx = std::complex<double>;

Biquad section_from(cplx pole_a, cplx pole_b, double notch_theta) {
  // Denominator from the pole pair (real coefficients by construction).
  Biquad s;
  const cplx sum = pole_a + pole_b;
  const cplx prod = pole_a * pole_b;
  s.a1 = -sum.real();
  s.a2 = prod.real();
  // Numerator: double zero pair on the unit circle at +-notch_theta.
  s.b0 = 1.0;
  s.b1 = -2.0 * std::cos(notch_theta);
  s.b2 = 1.0;
  const double dc = (1.0 + s.a1 + s.a2) / (s.b0 + s.b1 + s.b2);
  s.b0 *= dc;
  s.b1 *= dc;
  s.b2 *= dc;
  return s;
}

// Transposed direct form II state that a unit step settles into, per
// section, already scaled by the cascade gain upstream of that section.
std::vector<std::array<double, 2>> step_state(const SosFilter& f) {
  std::vector<std::array<double, 2>> zi(f.sections.size());
  double gain = 1.0;
  for (std::size_t i = 0; i < f.sections.size(); ++i) {
    const auto& s = f.sections[i];
    const double g = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double z2 = s.b2 - s.a2 * g;
    const double z1 = g - s.b0;
    zi[i] = {z1 * gain, z2 * gain};
    gain *= g;
  }
  return zi;
}

void run(const SosFilter& f, std::vector<double>& x, std::vector<std::array<double, 2>> state) {
  const std::size_t m = f.sections.size();
  const Biquad* s = f.sections.data();
  auto* z = state.data();
  for (auto& v : x) {
    double in = v;
    for (std::size_t i = 0; i < m; ++i) {
      const double y = s[i].b0 * in + z[i][0];
      z[i][0] = s[i].b1 * in - s[i].a1 * y + z[i][1];
      z[i][1] = s[i].b2 * in - s[i].a2 * y;
      in = y;
    }
    v = in;
  }
}

constexpr std::size_t kPredictionOrder = 16;
constexpr std::size_t kPredictionFit = 2048;

// Burg estimate of the forward prediction coefficients c[0..p-1], with
// x[n] ~ sum_k c[k] x[n-1-k].
std::vector<double> burg(std::span<const double> x, std::size_t order) {
  const std::size_t n = x.size();
  std::vector<double> f(x.begin(), x.end()), b(x.begin(), x.end());
  std::vector<double> a{1.0};
  for (std::size_t m = 0; m < order; ++m) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = m + 1; i < n; ++i) {
      num += f[i] * b[i - 1];
      den += f[i] * f[i] + b[i - 1] * b[i - 1];
    }
    if (den <= 0.0) break;
    const double k = -2.0 * num / den;
    std::vector<double> next(a.size() + 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) next[i] += a[i];
    for (std::size_t i = 0; i < a.size(); ++i) next[a.size() - i] += k * a[i];
    a = std::move(next);
    for (std::size_t i = n - 1; i > m; --i) {
      const double fi = f[i];
      f[i] = fi + k * b[i - 1];
      b[i] = b[i - 1] + k * fi;
    }
  }
  std::vector<double> c(a.size() - 1);
  for (std::size_t i = 1; i < a.size(); ++i) c[i - 1] = -a[i];
  return c;
}

// Continues `x` forward by `count` samples with an AR model fitted to its
// tail. The mean is removed before fitting and restored after.
std::vector<double> predict_tail(std::span<const double> x, std::size_t count) {
  const auto fit = x.subspan(x.size() - std::min(x.size(), kPredictionFit));
  double mean = 0.0;
  for (double v : fit) mean += v;
  mean /= static_cast<double>(fit.size());
  std::vector<double> centered(fit.size());
  for (std::size_t i = 0; i < fit.size(); ++i) centered[i] = fit[i] - mean;
  const auto c = burg(centered, std::min(kPredictionOrder, fit.size() / 4));

  std::vector<double> hist(centered);
  hist.reserve(hist.size() + count);
  for (std::size_t t = 0; t < count; ++t) {
    double v = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) v += c[k] * hist[hist.size() - 1 - k];
    hist.push_back(v);
  }
  std::vector<double> out(hist.end() - static_cast<std::ptrdiff_t>(count), hist.end());
  for (auto& v : out) v += mean;
  return out;
}

}  // namespace

cplx SosFilter::response(double freq_hz, double fs) const {
  const cplx z = std::polar(1.0, 2.0 * std::numbers::pi * freq_hz / fs);
  const cplx zi = 1.0 / z, zi2 = zi * zi;
  cplx h = 1.0;
  for (const auto& s : sections) h *= (s.b0 + s.b1 * zi + s.b2 * zi2) / (1.0 + s.a1 * zi + s.a2 * zi2);
  return h;
}

std::vector<cplx> SosFilter::poles() const {
  std::vector<cplx> out;
  for (const auto& s : sections) {
    const cplx disc = std::sqrt(cplx(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
    out.push_back((-s.a1 + disc) / 2.0);
    out.push_back((-s.a1 - disc) / 2.0);
  }
  return out;
}

bool SosFilter::stable() const {
  if (sections.empty()) return false;
  const auto p = poles();
  return std::all_of(p.begin(), p.end(), [](cplx z) { return std::abs(z) < 1.0; });
}

SosFilter design_bandstop(int order, double lo_hz, double hi_hz, double fs) {
  if (order < 1) throw ConfigError("bandstop: order must be >= 1");
  if (!(fs > 0)) throw ConfigError("bandstop: sample rate must be > 0");
  if (!(lo_hz > 0) || !(lo_hz < hi_hz))
    throw ConfigError("bandstop: band edges must satisfy 0 < lo < hi");
  if (!(hi_hz < fs / 2)) throw ConfigError("bandstop: upper edge must be below Nyquist");

  // Prewarped analog edges for the bilinear map s = 2 fs (z-1)/(z+1).
  const double k = 2.0 * fs;
  const double w1 = k * std::tan(std::numbers::pi * lo_hz / fs);
  const double w2 = k * std::tan(std::numbers::pi * hi_hz / fs);
  const double bw = w2 - w1;
  const double w0 = std::sqrt(w1 * w2);

  // Lowpass prototype pole p maps to the roots of s^2 - (bw/p) s + w0^2.
  std::vector<cplx> analog;
  for (int i = 0; i < order; ++i) {
    const double theta = std::numbers::pi * (2.0 * i + order + 1) / (2.0 * order);
    const cplx p = std::polar(1.0, theta);
    const cplx half = bw / (2.0 * p);
    const cplx root = std::sqrt(half * half - w0 * w0);
    analog.push_back(half + root);
    analog.push_back(half - root);
  }

  std::vector<cplx> digital;
  digital.reserve(analog.size());
  for (auto s : analog) digital.push_back((k + s) / (k - s));

  // Pair each upper-half-plane pole with its conjugate; pair leftover real
  // poles with one another.
  std::vector<cplx> upper, real;
  for (auto z : digital) {
    if (std::abs(z.imag()) <= 1e-12 * std::abs(z)) real.push_back({z.real(), 0.0});
    else if (z.imag() > 0) upper.push_back(z);
  }
  std::sort(upper.begin(), upper.end(), [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
  std::sort(real.begin(), real.end(), [](cplx a, cplx b) { return a.real() < b.real(); });
  if (upper.size() * 2 + real.size() != digital.size() || real.size() % 2 != 0)
    throw Error("bandstop: could not pair poles into sections");

  const double notch_theta = 2.0 * std::atan(w0 / k);
  SosFilter f;
  for (auto z : upper) f.sections.push_back(section_from(z, std::conj(z), notch_theta));
  for (std::size_t i = 0; i + 1 < real.size(); i += 2)
    f.sections.push_back(section_from(real[i], real[i + 1], notch_theta));
  return f;
}

std::vector<double> sosfilt(const SosFilter& f, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  run(f, y, std::vector<std::array<double, 2>>(f.sections.size(), {0.0, 0.0}));
  return y;
}

std::size_t filtfilt_padlen(const SosFilter& f) {
  // Samples for the slowest pole to decay by 1e-6, so start-up ringing
  // stays inside the padding that is trimmed off.
  double radius = 0.0;
  for (auto p : f.poles()) radius = std::max(radius, std::abs(p));
  const auto min_pad = 3 * f.sections.size();
  if (radius <= 0.0) return min_pad;
  if (radius >= 1.0) throw ConfigError("filtfilt: unstable filter");
  const auto decay = static_cast<std::size_t>(std::ceil(std::log(1e-6) / std::log(radius)));
  return std::max(min_pad, decay);
}

std::vector<double> filtfilt(std::span<const double> x, const SosFilter& f) {
  if (f.sections.empty()) throw ConfigError("filtfilt: empty filter");
  const std::size_t n = x.size();
  const std::size_t min_len = 3 * f.sections.size();
  if (n <= min_len)
    throw ConfigError("filtfilt: trace of " + std::to_string(n) + " samples is too short (need > " +
                      std::to_string(min_len) + ")");
  const bool predict = n >= 4 * kPredictionOrder;
  const std::size_t pad = predict ? filtfilt_padlen(f) : std::min(filtfilt_padlen(f), n - 1);

  // Edge extension. Long traces are continued by linear prediction, which
  // carries stationary tones across the edge without a phase jump; short
  // ones fall back to odd reflection about each endpoint.
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  if (predict) {
    std::vector<double> reversed(x.rbegin(), x.rend());
    auto head = predict_tail(reversed, pad);
    ext.assign(head.rbegin(), head.rend());
    ext.insert(ext.end(), x.begin(), x.end());
    auto tail = predict_tail(x, pad);
    ext.insert(ext.end(), tail.begin(), tail.end());
  } else {
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);
  }

  const auto zi = step_state(f);
  auto scaled = [&](double v) {
    auto s = zi;
    for (auto& z : s) {
      z[0] *= v;
      z[1] *= v;
    }
    return s;
  };

  run(f, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());
  run(f, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

SignalTrace filtfilt(const SignalTrace& trace, const SosFilter& f) {
  return SignalTrace{trace.label, trace.sample_rate, filtfilt(trace.samples, f)};
}

SignalTrace denoise(const SignalTrace& trace, const NotchBands& notches) {
  SignalTrace out = trace;
  if (notches.bands.empty()) return out;
  SosFilter cascade;
  for (const auto& [lo, hi] : notches.bands) {
    const auto f = design_bandstop(notches.order, lo, hi, trace.sample_rate);
    cascade.sections.insert(cascade.sections.end(), f.sections.begin(), f.sections.end());
  }
  out.samples = filtfilt(out.samples, cascade);
  return out;
}

}  // namespace desatscan
