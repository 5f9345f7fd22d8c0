#pragma once

#include <complex>
#include <span>
#include <vector>

#include "desatscan/edf.hpp"

namespace desatscan {

/// One second-order section, a0 normalized to 1:
///   H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

struct SosFilter {
  std::vector<Biquad> sections;

  /// Frequency response at `freq_hz` for sample rate `fs`.
  std::complex<double> response(double freq_hz, double fs) const;
  /// Roots of every section's denominator.
  std::vector<std::complex<double>> poles() const;
  /// All poles strictly inside the unit circle.
  bool stable() const;
};

/// Digital Butterworth bandstop of the given prototype order. The analog
/// lowpass prototype is band-transformed around prewarped edges and mapped
/// through the bilinear transform, giving 2*order poles in `order` sections.
/// Each section has unit DC gain.
SosFilter design_bandstop(int order, double lo_hz, double hi_hz, double fs);

/// Single causal pass from rest.
std::vector<double> sosfilt(const SosFilter& f, std::span<const double> x);

/// Edge padding used by filtfilt: enough samples for the slowest pole to
/// decay by 1e-6 (at least 3 per section).
std::size_t filtfilt_padlen(const SosFilter& f);

/// Zero-phase forward-backward filtering with steady-state initial
/// conditions. Long traces are extended at each edge by linear prediction,
/// short ones by odd reflection (capped at length-1). Requires more than 3
/// samples per section. Output length equals input length.
std::vector<double> filtfilt(std::span<const double> x, const SosFilter& f);
SignalTrace filtfilt(const SignalTrace& trace, const SosFilter& f);

/// Line-noise notches: 3rd-order Butterworth bandstops at (59, 61) and
/// (119, 121) Hz, cascaded and applied in one filtfilt pass.
struct NotchBands {
  int order = 3;
  std::vector<std::pair<double, double>> bands{{59.0, 61.0}, {119.0, 121.0}};
};
SignalTrace denoise(const SignalTrace& trace, const NotchBands& notches = {});

}  // namespace desatscan
