#include <benchmark/benchmark.h>

#include "fxprof/losses.hpp"
#include "fxprof/model.hpp"
#include "fxprof/random.hpp"

using namespace fxprof;

namespace {

grad::Tensor2f noise(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  grad::Tensor2f t(rows, cols);
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  return t;
}

// Inference over one batch of default-size chunks; arg is the batch size.
void BM_Forward(benchmark::State& state) {
  const model::ModelConfig config;
  const auto params = model::init_model<float>(config);
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto x = noise(batch, config.chunk_size, 1);
  const auto knobs = noise(config.knob_count, batch, 2);
  for (auto _ : state) benchmark::DoNotOptimize(model::forward(params, x, knobs));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(batch * config.chunk_size));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

// Forward, log-cosh loss and backward: the per-step cost of training.
void BM_TrainStep(benchmark::State& state) {
  const model::ModelConfig config;
  const auto params = model::init_model<float>(config);
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto x = noise(batch, config.chunk_size, 1);
  const auto y = noise(batch, config.chunk_size, 3);
  const auto knobs = noise(config.knob_count, batch, 2);
  for (auto _ : state) {
    grad::Tape<float> tape;
    const auto g = model::record_forward(tape, params, tape.constant(x), knobs);
    const auto loss = train::record_loss(tape, train::LossKind::LogcoshTime, g.output, tape.constant(y));
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad(g.params.front()));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(batch * config.chunk_size));
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_SpectralLoss(benchmark::State& state) {
  const model::ModelConfig config;
  const auto p = noise(8, config.chunk_size, 4);
  const auto t = noise(8, config.chunk_size, 5);
  for (auto _ : state) {
    grad::Tape<float> tape;
    benchmark::DoNotOptimize(tape.value(
        train::record_loss(tape, train::LossKind::LogcoshSpec, tape.constant(p), tape.constant(t))));
  }
}
BENCHMARK(BM_SpectralLoss)->Unit(benchmark::kMillisecond);

}  // namespace
