#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fxprof/audio.hpp"
#include "fxprof/effects.hpp"
#include "fxprof/tape.hpp"

namespace fxprof::model {

using grad::Tape;
using grad::Tensor2;
using grad::Var;

inline constexpr std::size_t kStackDepth = 7;
inline constexpr std::size_t kDenseLayers = kStackDepth + 1;  // hidden stack + linear readout
inline constexpr double kLeakySlope = 0.1;

struct ModelConfig {
  std::size_t chunk_size = 4096;
  std::size_t frame_size = 512;
  std::size_t hop = 256;
  std::array<std::size_t, kStackDepth> hidden_widths{512, 256, 128, 64, 128, 256, 512};
  std::size_t knob_count = 4;
  bool freeze_transforms = false;
  bool final_skip = true;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
  /// Features per frame for each analysis branch (N/2 + 1).
  std::size_t features() const { return frame_size / 2 + 1; }
  std::size_t frames() const { return (chunk_size - frame_size) / hop + 1; }

  bool operator==(const ModelConfig&) const = default;
};

/// Tiny configuration used for gradient checks.
ModelConfig tiny_config(std::size_t knob_count = 2);

template <typename T>
struct Parameter {
  std::string name;
  Tensor2<T> value;
  bool frozen = false;
};

/// All trainable tensors in deterministic layout order:
///   analysis_a, analysis_b,
///   branch_a.{fc0..fc6,out}.{weight,bias}, branch_b.{...},
///   synthesis
template <typename T>
struct ModelParams {
  ModelConfig config;
  std::vector<Parameter<T>> tensors;

  static constexpr std::size_t kAnalysisA = 0;
  static constexpr std::size_t kAnalysisB = 1;
  static constexpr std::size_t kBranchStride = 2 * kDenseLayers;
  static constexpr std::size_t kSynthesis = 2 + 2 * kBranchStride;

  static constexpr std::size_t weight_index(std::size_t branch, std::size_t layer) {
    return 2 + branch * kBranchStride + 2 * layer;
  }
  static constexpr std::size_t bias_index(std::size_t branch, std::size_t layer) {
    return weight_index(branch, layer) + 1;
  }

  Parameter<T>& analysis_a() { return tensors[kAnalysisA]; }
  Parameter<T>& analysis_b() { return tensors[kAnalysisB]; }
  Parameter<T>& synthesis() { return tensors[kSynthesis]; }
  const Parameter<T>& analysis_a() const { return tensors[kAnalysisA]; }
  const Parameter<T>& analysis_b() const { return tensors[kAnalysisB]; }
  const Parameter<T>& synthesis() const { return tensors[kSynthesis]; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : tensors) n += p.value.size();
    return n;
  }
  bool is_transform(std::size_t i) const {
    return i == kAnalysisA || i == kAnalysisB || i == kSynthesis;
  }

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.config = config;
    for (const auto& p : tensors) out.tensors.push_back({p.name, p.value.template cast<U>(), p.frozen});
    return out;
  }
};

/// Rows k = 0..N/2 of cos(2 pi k n / N) and -sin(2 pi k n / N).
template <typename T>
std::pair<Tensor2<T>, Tensor2<T>> dft_weights(std::size_t frame_size);

/// N x (N + 2) inverse of the stacked [cos; sin] analysis pair.
template <typename T>
Tensor2<T> inverse_dft_weights(std::size_t frame_size);

/// Transforms get DFT weights, dense layers a seeded U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
ModelParams<T> init_model(const ModelConfig& config);

/// Zeroes every dense weight and bias; with final_skip the model becomes the identity.
template <typename T>
void zero_dense_layers(ModelParams<T>& params);

struct ForwardGraph {
  Var output;               // batch x chunk_size
  std::vector<Var> params;  // same order as ModelParams::tensors
};

/// Records a batched forward pass. `x` is batch x chunk_size, `knobs` is
/// knob_count x batch (one column per example). Parameter leaves are added
/// to the tape, frozen tensors as frozen leaves.
template <typename T>
ForwardGraph record_forward(Tape<T>& tape, const ModelParams<T>& params, Var x,
                            const Tensor2<T>& knobs);

/// Same, over parameter leaves the caller already placed on the tape
/// (layout order).
template <typename T>
Var record_forward(Tape<T>& tape, const ModelConfig& config, std::span<const Var> params, Var x,
                   const Tensor2<T>& knobs);

/// Inference without gradients. Returns batch x chunk_size.
template <typename T>
Tensor2<T> forward(const ModelParams<T>& params, const Tensor2<T>& x, const Tensor2<T>& knobs);

/// Single-chunk convenience overload.
std::vector<float> forward(const ModelParams<float>& params, const std::vector<float>& chunk,
                           const fx::KnobVector& knobs);

/// Runs the model over consecutive chunks (stride = chunk_size) and drops
/// the tail that does not fill a chunk.
AudioClip forward_long(const ModelParams<float>& params, const AudioClip& x,
                       const fx::KnobVector& knobs);

/// Knob columns: knob_count x batch.
template <typename T>
Tensor2<T> knob_matrix(const std::vector<fx::KnobVector>& knobs, std::size_t knob_count);

}  // namespace fxprof::model
