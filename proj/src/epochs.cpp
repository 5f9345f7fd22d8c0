#include "desatscan/epochs.hpp"

#include <algorithm>
#include <cmath>

namespace desatscan {

std::vector<EpochInterval> stage_epochs(std::span<const AnnotationEvent> events) {
  std::vector<EpochInterval> out;
  for (const auto& ev : events) {
    if (ev.kind != EventKind::SleepStage) continue;
    for (int k = 0;; ++k) {
      const double start = ev.onset + kEpochSeconds * k;
      const double end = start + kEpochSeconds;
      if (end > ev.end() + 1e-9) break;
      out.push_back({ev.stage, start, end, static_cast<int>(std::lround(start / kEpochSeconds))});
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const EpochInterval& a, const EpochInterval& b) { return a.start < b.start; });
  return out;
}

long long first_sample_at(double t, double fs) { return static_cast<long long>(std::ceil(t * fs)); }

bool share_sample(double a0, double a1, double b0, double b1, double fs) {
  const auto lo = std::max(first_sample_at(a0, fs), first_sample_at(b0, fs));
  const auto hi = std::min(first_sample_at(a1, fs), first_sample_at(b1, fs));
  return lo < hi;
}

Segmentation segment_epochs(const Recording& recording, std::span<const AnnotationEvent> events,
                            std::span<const std::string> channels,
                            std::span<const SleepStage> stages) {
  std::vector<const SignalTrace*> traces;
  for (const auto& label : channels) {
    const auto* t = recording.find(label);
    if (!t) throw ConfigError("segment_epochs: recording lacks channel '" + label + "'");
    if (t->sample_rate != kEegSampleRate)
      throw ConfigError("segment_epochs: channel '" + label + "' is not sampled at 256 Hz");
    traces.push_back(t);
  }

  Segmentation result;
  for (const auto& iv : stage_epochs(events)) {
    if (!stages.empty() && std::find(stages.begin(), stages.end(), iv.stage) == stages.end())
      continue;
    const long long first = first_sample_at(iv.start, kEegSampleRate);
    const long long last = first + static_cast<long long>(kEpochSamples);
    const bool complete = first >= 0 && std::all_of(traces.begin(), traces.end(), [&](auto* t) {
                            return last <= static_cast<long long>(t->samples.size());
                          });
    if (!complete) {
      ++result.dropped;
      continue;
    }
    EpochSegment seg{iv, {}};
    seg.channels.reserve(traces.size());
    for (const auto* t : traces)
      seg.channels.emplace_back(t->samples.begin() + first, t->samples.begin() + last);
    result.epochs.push_back(std::move(seg));
  }
  return result;
}

std::vector<EpochTensor> featurize_epochs(std::span<const EpochSegment> segments,
                                          const StftConfig& cfg, Execution exec) {
  std::vector<EpochTensor> out(segments.size());
  const auto n = static_cast<std::ptrdiff_t>(segments.size());
  auto one = [&](std::ptrdiff_t i) {
    const auto& seg = segments[static_cast<std::size_t>(i)];
    auto t = epoch_spectrogram(seg.channels, cfg);
    t.stage = seg.interval.stage;
    t.epoch_index = seg.interval.epoch_index;
    out[static_cast<std::size_t>(i)] = std::move(t);
  };
  if (exec == Execution::Serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
    return out;
  }
  // Exceptions cannot cross the OpenMP region; validate shapes up front.
  for (const auto& seg : segments) {
    if (seg.channels.size() != kEpochChannels)
      throw ConfigError("featurize_epochs: expected 7 channels per epoch");
    for (const auto& ch : seg.channels)
      if (ch.size() != kEpochSamples) throw ConfigError("featurize_epochs: bad epoch length");
  }
  cfg.validate();
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
  return out;
}

}  // namespace desatscan
