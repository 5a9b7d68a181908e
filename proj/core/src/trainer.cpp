#include "fxprof/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "fxprof/log.hpp"
#include "fxprof/random.hpp"
#include "json.hpp"

namespace fxprof::train {
namespace {

using Clock = std::chrono::steady_clock;
using grad::Tensor2f;

constexpr std::uint64_t kShuffleStream = 0x5f0e1d2c3b4a5968ULL;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

struct Batch {
  Tensor2f x;
  Tensor2f target;
  Tensor2f knobs;
};

Batch make_batch(data::ChunkStore& store, const std::vector<std::size_t>& idx, std::size_t knob_count) {
  const std::size_t len = store.manifest().chunk_size;
  Batch b{Tensor2f(idx.size(), len), Tensor2f(idx.size(), len), {}};
  std::vector<fx::KnobVector> knobs;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& p = store.pair(idx[r]);
    std::copy(p.input.begin(), p.input.end(), b.x.row_span(r).begin());
    std::copy(p.target.begin(), p.target.end(), b.target.row_span(r).begin());
    knobs.push_back(p.knobs);
  }
  b.knobs = model::knob_matrix<float>(knobs, knob_count);
  return b;
}

double batch_loss(const model::ModelParams<float>& params, const Batch& b, LossKind loss, std::size_t fft) {
  const Tensor2f y = model::forward(params, b.x, b.knobs);
  grad::Tape<float> tape;
  const auto out = record_loss(tape, loss, tape.constant(y), tape.constant(b.target), fft);
  return tape.value(out)[0];
}

model::Checkpoint snapshot(const model::ModelParams<float>& params, const data::DatasetManifest& m,
                           std::size_t step) {
  return model::Checkpoint{params, m.effect, step};
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  schedule.validate();
}

std::string format_record(const LossRecord& r, bool with_wall_time) {
  std::string line = std::to_string(r.step) + "," + std::to_string(r.epoch) + "," + fmt(r.lr) + "," +
                     fmt(r.train_loss) + "," + (r.val_loss ? fmt(*r.val_loss) : std::string()) + ",";
  if (with_wall_time) line += fmt(r.wall_time_s);
  return line;
}

void check_compatible(const model::ModelConfig& config, const std::optional<fx::EffectInstance>& effect,
                      const data::DatasetManifest& m) {
  if (config.knob_count != m.effect.knob_count()) {
    throw std::invalid_argument("model expects " + std::to_string(config.knob_count) + " knobs, dataset (" +
                                std::string(fx::effect_name(m.effect.id())) + ") has " +
                                std::to_string(m.effect.knob_count()));
  }
  if (config.chunk_size != m.chunk_size) {
    throw std::invalid_argument("model chunk size " + std::to_string(config.chunk_size) +
                                " differs from dataset chunk size " + std::to_string(m.chunk_size));
  }
  if (effect && effect->id() != m.effect.id()) {
    throw std::invalid_argument("checkpoint was trained on " + std::string(fx::effect_name(effect->id())) +
                                ", dataset uses " + std::string(fx::effect_name(m.effect.id())));
  }
}

TrainResult train(const TrainConfig& config) {
  auto train_store = data::ChunkStore(data::load_manifest(config.train_manifest));
  std::unique_ptr<data::ChunkStore> val_store;
  if (!config.val_manifest.empty()) {
    val_store = std::make_unique<data::ChunkStore>(data::load_manifest(config.val_manifest));
  }
  return train(config, train_store, val_store.get());
}

TrainResult train(const TrainConfig& config, data::ChunkStore& train_set, data::ChunkStore* val_set) {
  config.validate();
  check_compatible(config.model, std::nullopt, train_set.manifest());
  if (val_set) check_compatible(config.model, train_set.manifest().effect, val_set->manifest());
  if (train_set.size() == 0) throw std::invalid_argument("training set is empty");
  if (config.loss == LossKind::LogcoshSpec && config.spec_fft > config.model.chunk_size) {
    throw std::invalid_argument("spectral loss fft size exceeds the chunk size");
  }

  model::ModelConfig mc = config.model;
  mc.seed = config.seed;
  auto params = model::init_model<float>(mc);
  OptimState state = make_optim_state(params);

  const std::size_t steps_per_epoch = (train_set.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = steps_per_epoch * config.epochs;

  TrainResult result;
  std::ofstream csv;
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    csv.open(config.out_dir / "train_log.csv", std::ios::binary | std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + (config.out_dir / "train_log.csv").string());
    csv << kLogHeader << "\n" << std::flush;
  }
  auto save = [&](std::size_t step, const std::filesystem::path& path) {
    model::save_checkpoint(snapshot(params, train_set.manifest(), step), path);
    log::debug("checkpoint " + path.string());
  };

  const auto t0 = Clock::now();
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = data::iterate_batches(train_set.size(), config.batch_size,
                                               derive_seed(config.seed ^ kShuffleStream, epoch));
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch batch = make_batch(train_set, batches[bi], mc.knob_count);
      const double lr = onecycle_lr(step, total_steps, config.schedule);

      grad::Tape<float> tape;
      const auto x = tape.constant(batch.x);
      const auto g = model::record_forward(tape, params, x, batch.knobs);
      const auto loss = record_loss(tape, config.loss, g.output, tape.constant(batch.target), config.spec_fft);
      const double loss_value = tape.value(loss)[0];
      if (!std::isfinite(loss_value)) {
        throw TrainError("non-finite training loss at step " + std::to_string(step + 1) + " (epoch " +
                         std::to_string(epoch) + ")");
      }
      tape.backward(loss);
      std::vector<grad::Tensor2<float>> grads;
      grads.reserve(g.params.size());
      for (const auto& v : g.params) grads.push_back(tape.grad(v));
      adam_step(params, grads, state, lr, config.adam);
      ++step;

      LossRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.lr = lr;
      rec.train_loss = loss_value;
      if (bi + 1 == batches.size() && val_set && val_set->size() > 0) {
        rec.val_loss = dataset_loss(params, *val_set, config.loss, config.batch_size, config.spec_fft);
        if (!std::isfinite(*rec.val_loss)) {
          throw TrainError("non-finite validation loss after step " + std::to_string(step));
        }
      }
      rec.wall_time_s = std::chrono::duration<double>(Clock::now() - t0).count();
      if (csv.is_open()) csv << format_record(rec, config.record_wall_time) << "\n" << std::flush;
      if (step % 50 == 0 || rec.val_loss) {
        log::debug("step " + std::to_string(step) + " lr " + fmt(lr) + " loss " + fmt(loss_value) +
                   (rec.val_loss ? " val " + fmt(*rec.val_loss) : std::string()));
      }
      result.log.push_back(rec);

      if (!config.out_dir.empty() && config.checkpoint_every > 0 && step % config.checkpoint_every == 0 &&
          step != total_steps) {
        save(step, config.out_dir / ("checkpoint_step" + std::to_string(step) + ".json"));
      }
    }
    if (result.log.back().val_loss) {
      log::info("epoch " + std::to_string(epoch) + " train " + fmt(result.log.back().train_loss) + " val " +
                fmt(*result.log.back().val_loss));
    }
  }

  result.checkpoint = snapshot(params, train_set.manifest(), step);
  if (!config.out_dir.empty()) {
    result.checkpoint_path = config.out_dir / "checkpoint.json";
    save(step, result.checkpoint_path);
  }
  return result;
}

double dataset_loss(const model::ModelParams<float>& params, data::ChunkStore& store, LossKind loss,
                    std::size_t batch_size, std::size_t spec_fft) {
  if (store.size() == 0) throw std::invalid_argument("cannot score an empty dataset");
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  double acc = 0.0;
  for (std::size_t start = 0; start < store.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(store.size(), start + batch_size); ++i) idx.push_back(i);
    const Batch b = make_batch(store, idx, params.config.knob_count);
    acc += batch_loss(params, b, loss, spec_fft) * static_cast<double>(idx.size());
  }
  return acc / static_cast<double>(store.size());
}

std::string Metrics::to_json() const {
  nlohmann::json j{{"logcosh", logcosh}, {"logsnr", logsnr}, {"n_examples", n_examples}};
  return j.dump(2) + "\n";
}

Metrics evaluate(const model::ModelParams<float>& params, data::ChunkStore& store,
                 const std::optional<std::filesystem::path>& export_dir) {
  check_compatible(params.config, std::nullopt, store.manifest());
  if (store.size() == 0) throw std::invalid_argument("cannot evaluate an empty dataset");
  if (export_dir) std::filesystem::create_directories(*export_dir);
  constexpr std::size_t kEvalBatch = 8;
  Metrics m;
  for (std::size_t start = 0; start < store.size(); start += kEvalBatch) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(store.size(), start + kEvalBatch); ++i) idx.push_back(i);
    const Batch b = make_batch(store, idx, params.config.knob_count);
    const Tensor2f y = model::forward(params, b.x, b.knobs);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto pred = y.row_span(r);
      const auto target = b.target.row_span(r);
      m.logcosh += loss_logcosh_time(std::span<const float>(pred), std::span<const float>(target));
      m.logsnr += loss_logsnr(std::span<const float>(pred), std::span<const float>(target));
      if (export_dir) {
        const int sr = store.manifest().sample_rate;
        AudioClip t{std::vector<float>(target.begin(), target.end()), sr};
        AudioClip p{std::vector<float>(pred.begin(), pred.end()), sr};
        AudioClip d{std::vector<float>(pred.size()), sr};
        for (std::size_t n = 0; n < d.size(); ++n) d.samples[n] = target[n] - pred[n];
        char stem[48];
        std::snprintf(stem, sizeof stem, "ex_%04zu_", store.manifest().entries[idx[r]].index);
        save_wav(t, *export_dir / (std::string(stem) + "target.wav"), WavFormat::Float32);
        save_wav(p, *export_dir / (std::string(stem) + "prediction.wav"), WavFormat::Float32);
        save_wav(d, *export_dir / (std::string(stem) + "difference.wav"), WavFormat::Float32);
      }
    }
  }
  m.n_examples = store.size();
  m.logcosh /= static_cast<double>(m.n_examples);
  m.logsnr /= static_cast<double>(m.n_examples);
  return m;
}

Metrics evaluate(const model::Checkpoint& ckpt, const std::filesystem::path& manifest,
                 const std::optional<std::filesystem::path>& export_dir) {
  data::ChunkStore store(data::load_manifest(manifest));
  check_compatible(ckpt.params.config, ckpt.effect, store.manifest());
  return evaluate(ckpt.params, store, export_dir);
}

}  // namespace fxprof::train
