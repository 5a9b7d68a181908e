#include <benchmark/benchmark.h>

#include <string>

#include "fxprof/audio.hpp"
#include "fxprof/effects.hpp"
#include "fxprof/random.hpp"

using namespace fxprof;

namespace {

AudioClip noise_clip(std::size_t n, int sr) {
  Rng rng(7);
  AudioClip c{std::vector<float>(n), sr};
  for (auto& v : c.samples) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  return c;
}

// One second of audio through each effect oracle at mid-range knobs.
void BM_Effect(benchmark::State& state) {
  const auto id = static_cast<fx::EffectId>(state.range(0));
  const auto fx = fx::EffectInstance::make(id, 44100);
  fx::KnobVector knobs;
  knobs.values.assign(fx.knob_count(), 0.0);
  const auto x = noise_clip(44100, 44100);
  for (auto _ : state) benchmark::DoNotOptimize(fx::apply_effect(fx, knobs, x));
  state.SetLabel(std::string(fx::effect_name(id)));
  state.SetItemsProcessed(state.iterations() * 44100);
}
BENCHMARK(BM_Effect)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_Resample(benchmark::State& state) {
  const auto x = noise_clip(44100, 44100);
  const int target = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(resample(x, target));
  state.SetItemsProcessed(state.iterations() * 44100);
}
BENCHMARK(BM_Resample)->Arg(16000)->Arg(48000)->Unit(benchmark::kMillisecond);

}  // namespace
