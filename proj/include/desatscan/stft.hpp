#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "desatscan/common.hpp"

namespace desatscan {

struct StftConfig {
  std::size_t window_length = 256;
  std::size_t hop = 128;
  std::size_t fft_length = 256;

  std::size_t boundary_pad() const { return window_length / 2; }
  std::size_t bins() const { return fft_length / 2 + 1; }
  std::size_t frames(std::size_t signal_length) const;
  /// Throws ConfigError unless 0 < hop <= window_length <= fft_length.
  void validate() const;
};

/// Periodic Hann window, w[n] = 0.5 - 0.5 cos(2 pi n / N).
std::vector<double> hann_window(std::size_t n);

/// Row-major [bins][frames].
struct ComplexMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::complex<double>> data;

  std::complex<double>& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const std::complex<double>& operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
};

/// One-sided Hann STFT. The signal is zero-padded by boundary_pad() on each
/// side and every frame is scaled by 1/sum(window).
ComplexMatrix stft(std::span<const double> signal, const StftConfig& cfg = {});

inline constexpr std::size_t kEpochChannels = 7;
inline constexpr std::size_t kFreqBins = 129;
inline constexpr std::size_t kTimeBins = 61;
inline constexpr std::size_t kEpochSamples = 7680;  // 30 s at 256 Hz
inline constexpr double kLogFloor = 1e-12;

/// One epoch's log10-magnitude spectrogram, row-major [channel][freq][time].
struct EpochTensor {
  std::string subject_id;
  SleepStage stage = SleepStage::Wake;
  int epoch_index = 0;
  int label = 0;
  std::size_t channels = 0, freq_bins = 0, time_bins = 0;
  std::vector<float> data;

  float at(std::size_t c, std::size_t f, std::size_t t) const {
    return data[(c * freq_bins + f) * time_bins + t];
  }
};

/// data[c] = log10(|STFT(channel c)| + 1e-12). Requires exactly seven
/// channels of 7680 samples each.
EpochTensor epoch_spectrogram(std::span<const std::vector<double>> channels,
                              const StftConfig& cfg = {});

}  // namespace desatscan
