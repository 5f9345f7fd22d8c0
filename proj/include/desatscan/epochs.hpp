#pragma once

#include <span>
#include <string>
#include <vector>

#include "desatscan/annotations.hpp"
#include "desatscan/edf.hpp"
#include "desatscan/stft.hpp"

namespace desatscan {

inline constexpr double kEpochSeconds = 30.0;
inline constexpr double kEegSampleRate = 256.0;

/// A scored 30 s block, [start, end) in seconds.
struct EpochInterval {
  SleepStage stage = SleepStage::Wake;
  double start = 0.0;
  double end = 0.0;
  int epoch_index = 0;  // round(start / 30)
};

/// Tiles every stage annotation into consecutive 30 s blocks from its onset.
/// A trailing remainder shorter than 30 s is dropped.
std::vector<EpochInterval> stage_epochs(std::span<const AnnotationEvent> events);

/// Index of the first sample at or after time t on a grid of rate fs.
long long first_sample_at(double t, double fs);

/// True iff some sample instant k/fs lies in both [a0, a1) and [b0, b1).
bool share_sample(double a0, double a1, double b0, double b1, double fs = kEegSampleRate);

struct EpochSegment {
  EpochInterval interval;
  std::vector<std::vector<double>> channels;  // kEegChannels order, 7680 samples each
};

struct Segmentation {
  std::vector<EpochSegment> epochs;
  std::size_t dropped = 0;  // staged blocks with samples missing from the recording
};

/// Cuts every staged 30 s block out of the listed channels. `stages` limits
/// which stages are emitted (empty = all). Channels must be 256 Hz.
Segmentation segment_epochs(const Recording& recording, std::span<const AnnotationEvent> events,
                            std::span<const std::string> channels = kEegChannels,
                            std::span<const SleepStage> stages = {});

enum class Execution { Serial, Parallel };

/// epoch_spectrogram over many segments. The parallel path distributes
/// epochs over OpenMP threads; results are identical to the serial path.
std::vector<EpochTensor> featurize_epochs(std::span<const EpochSegment> segments,
                                          const StftConfig& cfg = {},
                                          Execution exec = Execution::Parallel);

}  // namespace desatscan
