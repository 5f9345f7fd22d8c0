#include "desatscan/stft.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "desatscan/fft.hpp"

namespace desatscan {

std::size_t StftConfig::frames(std::size_t signal_length) const {
  const std::size_t padded = signal_length + 2 * boundary_pad();
  if (padded < window_length) return 0;
  return 1 + (padded - window_length) / hop;
}

void StftConfig::validate() const {
  if (window_length == 0 || hop == 0) throw ConfigError("stft: window and hop must be > 0");
  if (hop > window_length) throw ConfigError("stft: hop must not exceed window length");
  if (fft_length < window_length) throw ConfigError("stft: fft length must be >= window length");
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
  return w;
}

ComplexMatrix stft(std::span<const double> signal, const StftConfig& cfg) {
  cfg.validate();
  if (signal.empty()) throw ConfigError("stft: empty signal");

  const auto window = hann_window(cfg.window_length);
  const double scale = 1.0 / std::accumulate(window.begin(), window.end(), 0.0);
  const std::size_t pad = cfg.boundary_pad();
  const std::size_t n = signal.size();
  const std::size_t frames = cfg.frames(n);

  ComplexMatrix out;
  out.rows = cfg.bins();
  out.cols = frames;
  out.data.assign(out.rows * out.cols, {});

  std::vector<double> frame(cfg.fft_length);
  auto load = [&](std::size_t f) {
    std::fill(frame.begin(), frame.end(), 0.0);
    const std::size_t start = f * cfg.hop;  // index into the padded signal
    for (std::size_t i = 0; i < cfg.window_length; ++i) {
      const std::size_t p = start + i;
      if (p < pad || p - pad >= n) continue;
      frame[i] = signal[p - pad] * window[i] * scale;
    }
  };

  const std::size_t len = cfg.fft_length;
  if (len < 4 || !is_power_of_two(len)) {
    std::vector<std::complex<double>> buf(len);
    for (std::size_t f = 0; f < frames; ++f) {
      load(f);
      std::copy(frame.begin(), frame.end(), buf.begin());
      fft_inplace(buf);
      for (std::size_t b = 0; b < out.rows; ++b) out(b, f) = buf[b];
    }
    return out;
  }

  // Real input: even/odd samples packed into one half-length complex FFT.
  const std::size_t half = len / 2;
  std::vector<std::complex<double>> tw(half + 1);
  for (std::size_t k = 0; k <= half; ++k)
    tw[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len));
  std::vector<std::complex<double>> z(half);
  for (std::size_t f = 0; f < frames; ++f) {
    load(f);
    for (std::size_t k = 0; k < half; ++k) z[k] = {frame[2 * k], frame[2 * k + 1]};
    fft_inplace(z);
    for (std::size_t k = 0; k <= half; ++k) {
      const auto a = z[k % half];
      const auto b = std::conj(z[(half - k) % half]);
      const double er = 0.5 * (a.real() + b.real()), ei = 0.5 * (a.imag() + b.imag());
      const double or_ = 0.5 * (a.imag() - b.imag()), oi = -0.5 * (a.real() - b.real());
      const double wr = tw[k].real(), wi = tw[k].imag();
      out(k, f) = {er + wr * or_ - wi * oi, ei + wr * oi + wi * or_};
    }
  }
  return out;
}

EpochTensor epoch_spectrogram(std::span<const std::vector<double>> channels, const StftConfig& cfg) {
  if (channels.size() != kEpochChannels)
    throw ConfigError("epoch_spectrogram: expected 7 channels, got " +
                      std::to_string(channels.size()));
  for (const auto& ch : channels)
    if (ch.size() != kEpochSamples)
      throw ConfigError("epoch_spectrogram: expected 7680 samples per channel, got " +
                        std::to_string(ch.size()));

  EpochTensor t;
  t.channels = channels.size();
  t.freq_bins = cfg.bins();
  t.time_bins = cfg.frames(kEpochSamples);
  t.data.resize(t.channels * t.freq_bins * t.time_bins);
  for (std::size_t c = 0; c < t.channels; ++c) {
    const auto spec = stft(channels[c], cfg);
    float* dst = t.data.data() + c * t.freq_bins * t.time_bins;
    for (std::size_t i = 0; i < spec.data.size(); ++i)
      dst[i] = std::log10(static_cast<float>(std::sqrt(std::norm(spec.data[i])) + kLogFloor));
  }
  return t;
}

}  // namespace desatscan
