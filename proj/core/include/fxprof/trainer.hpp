#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fxprof/adam.hpp"
#include "fxprof/checkpoint.hpp"
#include "fxprof/dataset.hpp"
#include "fxprof/losses.hpp"
#include "fxprof/model.hpp"
#include "fxprof/schedule.hpp"

namespace fxprof::train {

/// Raised when training diverges; the message names the step.
class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  /// chunk_size and knob_count must match the dataset. seed is overridden
  /// by TrainConfig::seed.
  model::ModelConfig model;
  std::filesystem::path train_manifest;
  std::filesystem::path val_manifest;  // optional
  std::size_t epochs = 1;
  std::size_t batch_size = 8;
  OneCycle schedule;
  AdamConfig adam;
  LossKind loss = LossKind::LogcoshTime;
  std::size_t spec_fft = kDefaultSpecFft;
  std::uint64_t seed = 0;
  /// Intermediate checkpoint every this many steps (0: final only).
  std::size_t checkpoint_every = 0;
  /// Where checkpoints and train_log.csv go; empty writes nothing.
  std::filesystem::path out_dir;
  /// wall_time_s column; off gives byte-identical logs across runs.
  bool record_wall_time = true;

  void validate() const;
};

struct LossRecord {
  std::size_t step = 0;   // 1-based optimizer step
  std::size_t epoch = 0;  // 0-based
  double lr = 0.0;
  double train_loss = 0.0;  // batch loss before the update
  std::optional<double> val_loss;
  double wall_time_s = 0.0;
};

inline constexpr const char* kLogHeader = "step,epoch,lr,train_loss,val_loss,wall_time_s";

std::string format_record(const LossRecord& r, bool with_wall_time);

struct TrainResult {
  model::Checkpoint checkpoint;
  std::vector<LossRecord> log;
  std::filesystem::path checkpoint_path;  // empty without out_dir
};

/// Loads the manifests named in the config.
TrainResult train(const TrainConfig& config);
/// Trains on already-open chunk stores; val may be null.
TrainResult train(const TrainConfig& config, data::ChunkStore& train_set, data::ChunkStore* val_set);

/// Mean loss over a whole store, evaluated in fixed index order.
double dataset_loss(const model::ModelParams<float>& params, data::ChunkStore& store, LossKind loss,
                    std::size_t batch_size = 8, std::size_t spec_fft = kDefaultSpecFft);

struct Metrics {
  double logcosh = 0.0;
  double logsnr = 0.0;
  std::size_t n_examples = 0;

  std::string to_json() const;
};

/// Per-example log-cosh and log-SNR, averaged. With export_dir, writes
/// ex_<index>_{target,prediction,difference}.wav (float32) per example.
Metrics evaluate(const model::ModelParams<float>& params, data::ChunkStore& store,
                 const std::optional<std::filesystem::path>& export_dir = std::nullopt);
Metrics evaluate(const model::Checkpoint& ckpt, const std::filesystem::path& manifest,
                 const std::optional<std::filesystem::path>& export_dir = std::nullopt);

/// Rejects a model/dataset pairing whose knob count, chunk size or effect differ.
void check_compatible(const model::ModelConfig& config, const std::optional<fx::EffectInstance>& effect,
                      const data::DatasetManifest& manifest);

}  // namespace fxprof::train
