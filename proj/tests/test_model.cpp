#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "fxprof/adam.hpp"
#include "fxprof/checkpoint.hpp"
#include "fxprof/losses.hpp"
#include "fxprof/model.hpp"
#include "fxprof/random.hpp"

using namespace fxprof;
using namespace fxprof::model;
using grad::Tensor2d;
using grad::Tensor2f;

namespace {

Tensor2f random_batch(std::uint64_t seed, std::size_t batch, std::size_t len, double scale = 0.3) {
  Rng rng(seed);
  Tensor2f x(batch, len);
  for (auto& v : x.values()) v = static_cast<float>(scale * rng.normal());
  return x;
}

Tensor2f knob_cols(const ModelConfig& c, std::size_t batch, double value) {
  return Tensor2f(c.knob_count, batch, static_cast<float>(value));
}

ModelConfig small_config() {
  ModelConfig c;
  c.chunk_size = 256;
  c.frame_size = 32;
  c.hop = 16;
  c.hidden_widths = {32, 16, 8, 4, 8, 16, 32};
  c.knob_count = 3;
  return c;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("fxprof_model_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST(DftWeights, FourPointRows) {
  const auto [wc, ws] = dft_weights<double>(4);
  ASSERT_EQ(wc.rows(), 3u);
  ASSERT_EQ(wc.cols(), 4u);
  const double row0[] = {1, 1, 1, 1};
  const double row1[] = {1, 0, -1, 0};
  for (std::size_t n = 0; n < 4; ++n) {
    EXPECT_NEAR(wc(0, n), row0[n], 1e-15);
    EXPECT_NEAR(wc(1, n), row1[n], 1e-15);
    EXPECT_EQ(ws(0, n), 0.0);
  }
}

TEST(DftWeights, MatchesDefinition) {
  const std::size_t n = 16;
  const auto [wc, ws] = dft_weights<double>(n);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const double ang = 2 * std::numbers::pi * double(k * i) / double(n);
      EXPECT_NEAR(wc(k, i), std::cos(ang), 1e-12);
      EXPECT_NEAR(ws(k, i), -std::sin(ang), 1e-12);
    }
  }
}

TEST(DftWeights, RejectsOddOrSmall) {
  EXPECT_THROW(dft_weights<double>(7), std::invalid_argument);
  EXPECT_THROW(dft_weights<double>(2), std::invalid_argument);
}

TEST(ModelConfig, Validation) {
  ModelConfig c;
  EXPECT_NO_THROW(c.validate());
  c.chunk_size = 256;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ModelConfig{};
  c.hop = 300;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ModelConfig{};
  c.hidden_widths = {512, 256, 128, 64, 128, 256, 256};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ModelConfig{};
  c.frame_size = 511;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(InitModel, ParameterCountClosedForm) {
  ModelConfig c;  // defaults, 4 knobs
  const auto p = init_model<float>(c);
  // Hand count: analysis 2 x (257 x 512), synthesis 512 x 514, then per branch
  // eight dense layers whose inputs carry the 4 knobs.
  const std::size_t F = 257, K = 4;
  const std::size_t widths[] = {512, 256, 128, 64, 128, 256, 512};
  std::size_t branch = 0;
  std::size_t in = F;
  for (std::size_t w : widths) {
    branch += (in + K) * w + w;
    in = w;
  }
  branch += (in + K) * F + F;
  const std::size_t expected = 2 * F * 512 + 512 * 514 + 2 * branch;
  EXPECT_EQ(p.parameter_count(), expected);
  EXPECT_EQ(p.tensors.size(), 35u);
}

TEST(InitModel, LayoutAndShapes) {
  const auto c = small_config();
  const auto p = init_model<float>(c);
  EXPECT_EQ(p.analysis_a().name, "analysis_a");
  EXPECT_EQ(p.analysis_b().name, "analysis_b");
  EXPECT_EQ(p.synthesis().name, "synthesis");
  EXPECT_EQ(p.analysis_a().value.rows(), 17u);
  EXPECT_EQ(p.analysis_a().value.cols(), 32u);
  EXPECT_EQ(p.synthesis().value.rows(), 32u);
  EXPECT_EQ(p.synthesis().value.cols(), 34u);
  using P = ModelParams<float>;
  EXPECT_EQ(p.tensors[P::weight_index(0, 0)].value.cols(), 17u + 3u);
  EXPECT_EQ(p.tensors[P::weight_index(1, 7)].value.rows(), 17u);
  // Dense init bound is 1/sqrt(fan_in).
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    if (p.is_transform(i)) continue;
    const auto& t = p.tensors[i].value;
    const double fan_in = static_cast<double>(p.tensors[i & ~std::size_t{1}].value.cols());
    for (float v : t.values()) EXPECT_LE(std::abs(v), 1.0 / std::sqrt(fan_in) + 1e-7);
  }
}

TEST(InitModel, SeededDeterminism) {
  auto c = small_config();
  c.seed = 42;
  const auto a = serialize_parameters(init_model<float>(c));
  const auto b = serialize_parameters(init_model<float>(c));
  EXPECT_EQ(a, b);
  c.seed = 43;
  EXPECT_NE(a, serialize_parameters(init_model<float>(c)));
}

TEST(InitModel, FrozenFlags) {
  auto c = small_config();
  c.freeze_transforms = true;
  const auto p = init_model<float>(c);
  for (std::size_t i = 0; i < p.tensors.size(); ++i) EXPECT_EQ(p.tensors[i].frozen, p.is_transform(i));
  c.freeze_transforms = false;
  for (const auto& t : init_model<float>(c).tensors) EXPECT_FALSE(t.frozen);
}

TEST(Forward, ZeroNetworkIsIdentityWithSkip) {
  const auto c = small_config();
  auto p = init_model<float>(c);
  zero_dense_layers(p);
  const auto x = random_batch(1, 3, c.chunk_size);
  const auto y = forward(p, x, knob_cols(c, 3, 0.2));
  EXPECT_EQ(y.storage(), x.storage());
}

TEST(Forward, ZeroNetworkWithoutSkipIsSilent) {
  auto c = small_config();
  c.final_skip = false;
  auto p = init_model<float>(c);
  zero_dense_layers(p);
  const auto y = forward(p, random_batch(2, 2, c.chunk_size), knob_cols(c, 2, -0.1));
  for (float v : y.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Forward, DefaultChunkShape) {
  ModelConfig c;
  const auto p = init_model<float>(c);
  const auto y = forward(p, random_batch(3, 1, 4096), knob_cols(c, 1, 0.0));
  EXPECT_EQ(y.rows(), 1u);
  EXPECT_EQ(y.cols(), 4096u);
}

TEST(Forward, FinalSkipAddsExactlyX) {
  auto c = small_config();
  c.seed = 5;
  const auto with = init_model<double>(c);
  auto without = with;
  without.config.final_skip = false;
  Rng rng(6);
  Tensor2d x(2, c.chunk_size);
  for (auto& v : x.values()) v = rng.normal();
  const Tensor2d k(c.knob_count, 2, 0.1);
  const auto y1 = forward(with, x, k);
  const auto y0 = forward(without, x, k);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y1[i] - y0[i], x[i], 1e-12);
}

TEST(Forward, BatchRowsAreIndependent) {
  auto c = small_config();
  c.seed = 8;
  const auto p = init_model<float>(c);
  const auto x = random_batch(9, 3, c.chunk_size);
  Tensor2f k(c.knob_count, 3);
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = static_cast<float>(0.1 * double(i) - 0.4);
  const auto y = forward(p, x, k);
  for (std::size_t r = 0; r < 3; ++r) {
    const Tensor2f xr(1, c.chunk_size, std::vector<float>(x.row_span(r).begin(), x.row_span(r).end()));
    Tensor2f kr(c.knob_count, 1);
    for (std::size_t j = 0; j < c.knob_count; ++j) kr(j, 0) = k(j, r);
    const auto yr = forward(p, xr, kr);
    for (std::size_t n = 0; n < c.chunk_size; ++n) EXPECT_NEAR(yr(0, n), y(r, n), 1e-6);
  }
}

TEST(Forward, DeterministicAndKnobSensitive) {
  auto c = small_config();
  c.seed = 10;
  const auto p = init_model<float>(c);
  const auto x = random_batch(11, 1, c.chunk_size);
  const auto a1 = forward(p, x, knob_cols(c, 1, -0.3));
  const auto a2 = forward(p, x, knob_cols(c, 1, -0.3));
  const auto b = forward(p, x, knob_cols(c, 1, 0.4));
  EXPECT_EQ(a1.storage(), a2.storage());
  double diff = 0;
  for (std::size_t i = 0; i < a1.size(); ++i) diff = std::max(diff, double(std::abs(a1[i] - b[i])));
  EXPECT_GT(diff, 0.0);
}

TEST(Forward, ShapeErrors) {
  const auto c = small_config();
  const auto p = init_model<float>(c);
  EXPECT_THROW(forward(p, random_batch(1, 1, 200), knob_cols(c, 1, 0)), ShapeError);
  EXPECT_THROW(forward(p, random_batch(1, 2, c.chunk_size), knob_cols(c, 1, 0)), ShapeError);
  EXPECT_THROW(forward(p, std::vector<float>(c.chunk_size), fx::KnobVector{{0.0}}), ShapeError);
}

TEST(ForwardLong, TwoChunksConcatenate) {
  auto c = small_config();
  c.seed = 12;
  const auto p = init_model<float>(c);
  const auto x = random_batch(13, 1, 2 * c.chunk_size);
  const fx::KnobVector k{{0.1, -0.2, 0.3}};
  const auto y = forward_long(p, AudioClip{x.to_vector(), 44100}, k);
  ASSERT_EQ(y.size(), 2 * c.chunk_size);
  for (std::size_t half = 0; half < 2; ++half) {
    const std::vector<float> chunk(x.storage().begin() + half * c.chunk_size,
                                   x.storage().begin() + (half + 1) * c.chunk_size);
    const auto yc = forward(p, chunk, k);
    for (std::size_t n = 0; n < c.chunk_size; ++n) EXPECT_NEAR(y.samples[half * c.chunk_size + n], yc[n], 1e-6);
  }
}

TEST(ForwardLong, TruncatesTailAndIdentity) {
  const auto c = small_config();
  auto p = init_model<float>(c);
  zero_dense_layers(p);
  const auto x = random_batch(14, 1, c.chunk_size * 5 / 2);
  const auto y = forward_long(p, AudioClip{x.to_vector(), 44100}, fx::KnobVector{{0, 0, 0}});
  ASSERT_EQ(y.size(), 2 * c.chunk_size);
  for (std::size_t n = 0; n < y.size(); ++n) EXPECT_EQ(y.samples[n], x[n]);
  EXPECT_THROW(forward_long(p, AudioClip{std::vector<float>(c.chunk_size - 1), 44100}, fx::KnobVector{{0, 0, 0}}),
               std::invalid_argument);
}

TEST(Frozen, TransformsBitIdenticalAfterSteps) {
  auto c = small_config();
  c.freeze_transforms = true;
  c.seed = 15;
  auto p = init_model<float>(c);
  const auto before = p;
  auto state = train::make_optim_state(p);
  const auto x = random_batch(16, 2, c.chunk_size);
  const auto target = random_batch(17, 2, c.chunk_size);
  for (int step = 0; step < 5; ++step) {
    grad::Tape<float> tape;
    const auto g = record_forward(tape, p, tape.constant(x), knob_cols(c, 2, 0.25));
    const auto loss = tape.logcosh_mean(g.output, tape.constant(target));
    tape.backward(loss);
    std::vector<Tensor2f> grads;
    for (const auto v : g.params) grads.push_back(tape.grad(v));
    train::adam_step(p, grads, state, 1e-3, train::AdamConfig{});
  }
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    if (p.is_transform(i)) {
      EXPECT_EQ(p.tensors[i].value.storage(), before.tensors[i].value.storage()) << p.tensors[i].name;
    } else {
      EXPECT_NE(p.tensors[i].value.storage(), before.tensors[i].value.storage()) << p.tensors[i].name;
    }
  }
}

TEST(Checkpoint, RoundTripAndHash) {
  const auto dir = scratch_dir("roundtrip");
  auto c = small_config();
  c.seed = 18;
  c.freeze_transforms = true;
  c.final_skip = false;
  Checkpoint ck{init_model<float>(c), fx::EffectInstance::make(fx::EffectId::Chorus, 44100), 77};
  ck.params.config.knob_count = 4;
  ck.params = init_model<float>(ck.params.config);
  const auto hash = save_checkpoint(ck, dir / "ck.json");
  EXPECT_EQ(hash, sha256_file(dir / "ck.bin"));
  EXPECT_EQ(hash, sha256_hex(serialize_parameters(ck.params)));

  const auto back = load_checkpoint(dir / "ck.json");
  EXPECT_EQ(back.params.config, ck.params.config);
  EXPECT_EQ(back.step, 77u);
  ASSERT_TRUE(back.effect);
  EXPECT_EQ(back.effect->id(), fx::EffectId::Chorus);
  EXPECT_EQ(serialize_parameters(back.params), serialize_parameters(ck.params));
  for (std::size_t i = 0; i < back.params.tensors.size(); ++i) {
    EXPECT_EQ(back.params.tensors[i].frozen, ck.params.tensors[i].frozen);
    EXPECT_EQ(back.params.tensors[i].name, ck.params.tensors[i].name);
  }
}

TEST(Checkpoint, BlobIsLittleEndianFloat32InLayoutOrder) {
  const auto c = small_config();
  const auto p = init_model<float>(c);
  const auto bytes = serialize_parameters(p);
  ASSERT_EQ(bytes.size(), 4 * p.parameter_count());
  // First value is analysis_a(0, 0) = cos(0) = 1.0f = 0x3f800000.
  EXPECT_EQ(bytes[0], std::byte{0x00});
  EXPECT_EQ(bytes[1], std::byte{0x00});
  EXPECT_EQ(bytes[2], std::byte{0x80});
  EXPECT_EQ(bytes[3], std::byte{0x3f});
}

TEST(Checkpoint, TamperedBlobRejected) {
  const auto dir = scratch_dir("tamper");
  const Checkpoint ck{init_model<float>(small_config()), std::nullopt, 1};
  save_checkpoint(ck, dir / "ck.json");
  {
    std::fstream f(dir / "ck.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(10);
    f.put('\x55');
  }
  EXPECT_THROW(load_checkpoint(dir / "ck.json"), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir / "missing.json"), CheckpointError);
}

TEST(Checkpoint, Sha256KnownVector) {
  const std::string abc = "abc";
  const auto* p = reinterpret_cast<const std::byte*>(abc.data());
  EXPECT_EQ(sha256_hex({p, abc.size()}), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
