#include "fxprof/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fxprof/ops.hpp"
#include "fxprof/random.hpp"

namespace fxprof::model {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (frame_size < 4 || frame_size % 2 != 0) fail("frame_size must be even and >= 4");
  if (chunk_size < frame_size) fail("chunk_size must be >= frame_size");
  if (hop < 1 || hop > frame_size) fail("hop must be in [1, frame_size]");
  if ((chunk_size - frame_size) % hop != 0) fail("hop must divide chunk_size - frame_size");
  for (std::size_t i = 0; i < kStackDepth; ++i) {
    if (hidden_widths[i] == 0) fail("hidden widths must be positive");
    if (hidden_widths[i] != hidden_widths[kStackDepth - 1 - i]) {
      fail("hidden widths must be symmetric about the middle layer");
    }
  }
}

ModelConfig tiny_config(std::size_t knob_count) {
  ModelConfig c;
  c.chunk_size = 64;
  c.frame_size = 16;
  c.hop = 8;
  c.hidden_widths = {16, 8, 4, 2, 4, 8, 16};
  c.knob_count = knob_count;
  return c;
}

template <typename T>
std::pair<Tensor2<T>, Tensor2<T>> dft_weights(std::size_t n) {
  if (n < 4 || n % 2 != 0) throw std::invalid_argument("dft_weights: frame size must be even and >= 4");
  const std::size_t bins = n / 2 + 1;
  Tensor2<T> wc(bins, n), ws(bins, n);
  for (std::size_t k = 0; k < bins; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      // Reduce k*i mod n first so the angle stays exact for large frames.
      const double phase = 2.0 * std::numbers::pi * static_cast<double>((k * i) % n) /
                           static_cast<double>(n);
      wc(k, i) = static_cast<T>(std::cos(phase));
      ws(k, i) = static_cast<T>(-std::sin(phase));
    }
  }
  return {std::move(wc), std::move(ws)};
}

template <typename T>
Tensor2<T> inverse_dft_weights(std::size_t n) {
  if (n < 4 || n % 2 != 0) throw std::invalid_argument("inverse_dft_weights: frame size must be even and >= 4");
  const std::size_t bins = n / 2 + 1;
  Tensor2<T> w(n, 2 * bins);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double c = (k == 0 || k == n / 2) ? 1.0 : 2.0;
      const double phase = 2.0 * std::numbers::pi * static_cast<double>((k * i) % n) /
                           static_cast<double>(n);
      w(i, k) = static_cast<T>(c / static_cast<double>(n) * std::cos(phase));
      w(i, bins + k) = static_cast<T>(-c / static_cast<double>(n) * std::sin(phase));
    }
  }
  return w;
}

namespace {

std::size_t layer_in(const ModelConfig& c, std::size_t layer) {
  const std::size_t base = layer == 0 ? c.features() : c.hidden_widths[layer - 1];
  return base + c.knob_count;
}

std::size_t layer_out(const ModelConfig& c, std::size_t layer) {
  return layer < kStackDepth ? c.hidden_widths[layer] : c.features();
}

std::string layer_name(std::size_t branch, std::size_t layer) {
  std::string s = branch == 0 ? "branch_a." : "branch_b.";
  return s + (layer < kStackDepth ? "fc" + std::to_string(layer) : std::string("out"));
}

}  // namespace

template <typename T>
ModelParams<T> init_model(const ModelConfig& config) {
  config.validate();
  ModelParams<T> p;
  p.config = config;
  auto [wc, ws] = dft_weights<T>(config.frame_size);
  p.tensors.push_back({"analysis_a", std::move(wc), config.freeze_transforms});
  p.tensors.push_back({"analysis_b", std::move(ws), config.freeze_transforms});

  Rng rng(config.seed);
  for (std::size_t branch = 0; branch < 2; ++branch) {
    for (std::size_t layer = 0; layer < kDenseLayers; ++layer) {
      const std::size_t in = layer_in(config, layer);
      const std::size_t out = layer_out(config, layer);
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      Tensor2<T> w(out, in), b(out, 1);
      for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-bound, bound));
      for (auto& v : b.values()) v = static_cast<T>(rng.uniform(-bound, bound));
      const std::string name = layer_name(branch, layer);
      p.tensors.push_back({name + ".weight", std::move(w), false});
      p.tensors.push_back({name + ".bias", std::move(b), false});
    }
  }
  p.tensors.push_back({"synthesis", inverse_dft_weights<T>(config.frame_size), config.freeze_transforms});
  return p;
}

template <typename T>
void zero_dense_layers(ModelParams<T>& params) {
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    if (!params.is_transform(i)) params.tensors[i].value.fill(T{0});
  }
}

template <typename T>
Tensor2<T> knob_matrix(const std::vector<fx::KnobVector>& knobs, std::size_t knob_count) {
  Tensor2<T> m(knob_count, knobs.size());
  for (std::size_t b = 0; b < knobs.size(); ++b) {
    if (knobs[b].values.size() != knob_count) {
      throw ShapeError("knob vector has " + std::to_string(knobs[b].values.size()) +
                       " values, model expects " + std::to_string(knob_count));
    }
    for (std::size_t k = 0; k < knob_count; ++k) m(k, b) = static_cast<T>(knobs[b].values[k]);
  }
  return m;
}

template <typename T>
Var record_forward(Tape<T>& tape, const ModelConfig& c, std::span<const Var> params, Var x,
                   const Tensor2<T>& knobs) {
  const std::size_t expected = ModelParams<T>::kSynthesis + 1;
  if (params.size() != expected) {
    throw ShapeError("record_forward: expected " + std::to_string(expected) + " parameter tensors");
  }
  const Tensor2<T>& xv = tape.value(x);
  if (xv.cols() != c.chunk_size) {
    throw ShapeError("forward: chunk length " + std::to_string(xv.cols()) + " != chunk_size " +
                     std::to_string(c.chunk_size));
  }
  const std::size_t batch = xv.rows();
  if (knobs.rows() != c.knob_count || knobs.cols() != batch) {
    throw ShapeError("forward: knobs " + grad::shape_str(knobs) + ", expected " +
                     grad::shape_str(c.knob_count, batch));
  }
  const std::size_t n_frames = c.frames();

  // Every frame of example b is conditioned on knob column b.
  Tensor2<T> cond(c.knob_count, batch * n_frames);
  for (std::size_t k = 0; k < c.knob_count; ++k) {
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < n_frames; ++t) cond(k, b * n_frames + t) = knobs(k, b);
    }
  }
  const Var cond_var = tape.constant(std::move(cond));
  const T slope = static_cast<T>(kLeakySlope);

  auto layer = [&](Var h, std::size_t branch, std::size_t l) {
    const Var in = c.knob_count > 0 ? tape.concat_rows(h, cond_var) : h;
    return tape.dense(in, params[ModelParams<T>::weight_index(branch, l)],
                      params[ModelParams<T>::bias_index(branch, l)]);
  };

  auto run_branch = [&](Var features, std::size_t branch) {
    std::array<Var, kStackDepth> outs{};
    Var h = features;
    for (std::size_t l = 0; l < kStackDepth; ++l) {
      Var o = tape.leaky_relu(layer(h, branch, l), slope);
      // Decoder layer l mirrors encoder layer (depth-1-l); widths match by symmetry.
      if (l > kStackDepth / 2) o = tape.add(o, outs[kStackDepth - 1 - l]);
      outs[l] = o;
      h = o;
    }
    return layer(h, branch, kStackDepth);
  };

  const Var fa = tape.framed_transform(x, params[ModelParams<T>::kAnalysisA], c.hop);
  const Var fb = tape.framed_transform(x, params[ModelParams<T>::kAnalysisB], c.hop);
  const Var ya = run_branch(fa, 0);
  const Var yb = run_branch(fb, 1);
  const Var feats = tape.concat_rows(ya, yb);
  Var y = tape.overlap_add(feats, params[ModelParams<T>::kSynthesis], c.hop, batch);
  if (c.final_skip) y = tape.add(y, x);
  return y;
}

template <typename T>
ForwardGraph record_forward(Tape<T>& tape, const ModelParams<T>& params, Var x,
                            const Tensor2<T>& knobs) {
  ForwardGraph g;
  g.params.reserve(params.tensors.size());
  for (const auto& p : params.tensors) g.params.push_back(tape.parameter(p.value, p.frozen));
  g.output = record_forward(tape, params.config, g.params, x, knobs);
  return g;
}

template <typename T>
Tensor2<T> forward(const ModelParams<T>& params, const Tensor2<T>& x, const Tensor2<T>& knobs) {
  Tape<T> tape;
  std::vector<Var> leaves;
  leaves.reserve(params.tensors.size());
  for (const auto& p : params.tensors) leaves.push_back(tape.parameter(p.value, true));
  // Borrowing x avoids a copy; frozen leaves keep the tape gradient-free.
  const Var xv = tape.parameter(x, true);
  const Var y = record_forward(tape, params.config, leaves, xv, knobs);
  return tape.value(y);
}

std::vector<float> forward(const ModelParams<float>& params, const std::vector<float>& chunk,
                           const fx::KnobVector& knobs) {
  const Tensor2<float> x(1, chunk.size(), chunk);
  const auto k = knob_matrix<float>({knobs}, params.config.knob_count);
  return forward(params, x, k).to_vector();
}

AudioClip forward_long(const ModelParams<float>& params, const AudioClip& x,
                       const fx::KnobVector& knobs) {
  const std::size_t chunk = params.config.chunk_size;
  if (x.size() < chunk) {
    throw std::invalid_argument("forward_long: clip of " + std::to_string(x.size()) +
                                " samples is shorter than one chunk (" + std::to_string(chunk) + ")");
  }
  const std::size_t n_chunks = x.size() / chunk;
  constexpr std::size_t kBatch = 8;
  AudioClip out{std::vector<float>(n_chunks * chunk), x.sample_rate};
  for (std::size_t start = 0; start < n_chunks; start += kBatch) {
    const std::size_t b = std::min(kBatch, n_chunks - start);
    Tensor2<float> in(b, chunk);
    std::copy_n(x.samples.begin() + static_cast<std::ptrdiff_t>(start * chunk), b * chunk,
                in.values().begin());
    const auto k = knob_matrix<float>(std::vector<fx::KnobVector>(b, knobs), params.config.knob_count);
    const auto y = forward(params, in, k);
    std::copy(y.values().begin(), y.values().end(),
              out.samples.begin() + static_cast<std::ptrdiff_t>(start * chunk));
  }
  return out;
}

#define FXPROF_INSTANTIATE(T)                                                                      \
  template std::pair<Tensor2<T>, Tensor2<T>> dft_weights<T>(std::size_t);                          \
  template Tensor2<T> inverse_dft_weights<T>(std::size_t);                                         \
  template ModelParams<T> init_model<T>(const ModelConfig&);                                       \
  template void zero_dense_layers<T>(ModelParams<T>&);                                             \
  template Tensor2<T> knob_matrix<T>(const std::vector<fx::KnobVector>&, std::size_t);             \
  template Var record_forward<T>(Tape<T>&, const ModelConfig&, std::span<const Var>, Var,          \
                                 const Tensor2<T>&);                                               \
  template ForwardGraph record_forward<T>(Tape<T>&, const ModelParams<T>&, Var, const Tensor2<T>&); \
  template Tensor2<T> forward<T>(const ModelParams<T>&, const Tensor2<T>&, const Tensor2<T>&);

FXPROF_INSTANTIATE(float)
FXPROF_INSTANTIATE(double)

#undef FXPROF_INSTANTIATE

}  // namespace fxprof::model
