// Reference versus parallel kernels.

#include <benchmark/benchmark.h>

#include <vector>

#include "desatscan/epochs.hpp"
#include "desatscan/nn/kernels.hpp"
#include "desatscan/nn/model.hpp"
#include "desatscan/random.hpp"

using namespace desatscan;

namespace {

nn::ConvGeometry stem_geometry(int batch) { return {batch, 7, 129, 61, 16, 3, 1, 1}; }

std::vector<float> random_floats(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  const auto g = stem_geometry(static_cast<int>(state.range(0)));
  const auto x = random_floats(g.in_size(), 1);
  const auto w = random_floats(g.weight_size(), 2);
  std::vector<float> y(g.out_size());
  for (auto _ : state) {
    if constexpr (Parallel) nn::parallel::conv2d_forward(g, x.data(), w.data(), y.data());
    else nn::reference::conv2d_forward(g, x.data(), w.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
  const auto g = stem_geometry(static_cast<int>(state.range(0)));
  const auto x = random_floats(g.in_size(), 1);
  const auto w = random_floats(g.weight_size(), 2);
  const auto dy = random_floats(g.out_size(), 3);
  std::vector<float> dx(g.in_size()), dw(g.weight_size());
  for (auto _ : state) {
    if constexpr (Parallel) nn::parallel::conv2d_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data());
    else nn::reference::conv2d_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data());
    benchmark::DoNotOptimize(dw.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ModelTrainStep(benchmark::State& state) {
  const auto exec = state.range(0) ? Execution::Parallel : Execution::Serial;
  nn::TinyResNet<float> net(nn::ModelConfig{}, 1);
  const int batch = 16;
  const auto x = random_floats(static_cast<std::size_t>(batch) * 7 * 129 * 61, 4);
  const std::vector<float> dz(batch, 0.01f);
  for (auto _ : state) {
    const auto z = net.forward({x, batch, 7, 129, 61}, nn::Mode::Train, exec);
    auto g = net.backward(dz, exec);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

void BM_Featurize(benchmark::State& state) {
  const auto exec = state.range(0) ? Execution::Parallel : Execution::Serial;
  Rng rng(5);
  std::vector<EpochSegment> segs(8);
  for (auto& s : segs) {
    s.channels.assign(7, std::vector<double>(kEpochSamples));
    for (auto& c : s.channels)
      for (auto& v : c) v = rng.normal();
  }
  for (auto _ : state) {
    auto t = featurize_epochs(segs, {}, exec);
    benchmark::DoNotOptimize(t.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(segs.size()));
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/reference")->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel")->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/reference")->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/parallel")->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ModelTrainStep)->Name("train_step/serial")->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ModelTrainStep)->Name("train_step/parallel")->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Featurize)->Name("featurize/serial")->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Featurize)->Name("featurize/parallel")->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
