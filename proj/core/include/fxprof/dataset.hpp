#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fxprof/audio.hpp"
#include "fxprof/effects.hpp"

namespace fxprof::data {

inline constexpr const char* kManifestFormat = "fxds-v1";
inline constexpr double kSilenceRms = 1e-5;
inline constexpr int kSilenceRetries = 10;

enum class Split { Train, Val };

struct ManifestEntry {
  std::size_t index = 0;
  std::string source;  // path relative to the corpus root, '/' separated
  std::size_t offset = 0;
  std::vector<double> knobs;

  bool operator==(const ManifestEntry&) const = default;
};

/// Everything needed to regenerate each chunk pair bit-exactly.
struct DatasetManifest {
  fx::EffectInstance effect = fx::EffectInstance::make(fx::EffectId::Comp4c, 44100);
  int sample_rate = 44100;
  std::size_t chunk_size = 4096;
  std::size_t context_len = 0;
  std::uint64_t seed = 0;
  std::string corpus_dir;
  Split split = Split::Train;
  std::vector<ManifestEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
};

std::string manifest_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

struct ChunkPair {
  std::vector<float> input;
  std::vector<float> target;
  fx::KnobVector knobs;
  std::string source_file;
  std::size_t offset = 0;
};

/// WAV files under a directory tree, loaded on demand and resampled to a
/// common rate. Clips are cached after the first load.
class Corpus {
 public:
  Corpus(std::filesystem::path root, int sample_rate);

  /// Relative paths of every .wav file, sorted.
  const std::vector<std::string>& files() const noexcept { return files_; }
  const AudioClip& clip(const std::string& relative);
  const std::filesystem::path& root() const noexcept { return root_; }
  int sample_rate() const noexcept { return sample_rate_; }

 private:
  std::filesystem::path root_;
  int sample_rate_;
  std::vector<std::string> files_;
  std::map<std::string, AudioClip> cache_;
};

struct BuildOptions {
  std::filesystem::path corpus_dir;
  fx::EffectInstance effect = fx::EffectInstance::make(fx::EffectId::Comp4c, 44100);
  std::size_t n_chunks = 100;
  std::size_t chunk_size = 4096;
  /// Defaults to fx::default_context_len(effect).
  std::optional<std::size_t> context_len;
  std::uint64_t seed = 0;
  /// Fraction of chunks (taken from the end) held out for validation.
  double val_frac = 0.1;
  /// Normalized knob values that override the random draw, per knob.
  std::vector<std::optional<double>> pinned;
  /// Redraw chunks whose input RMS is below kSilenceRms.
  bool reject_silence = true;
};

struct DatasetSplit {
  DatasetManifest train;
  DatasetManifest val;
};

/// Draws every chunk from a generator seeded by (seed, index), so entries do
/// not depend on generation order.
DatasetSplit build_dataset(const BuildOptions& options);
/// Same, over an already-open corpus (its sample rate is the dataset rate).
DatasetSplit build_dataset(const BuildOptions& options, Corpus& corpus);

/// Materializes chunk pairs from a manifest, each at most once.
class ChunkStore {
 public:
  explicit ChunkStore(DatasetManifest manifest);
  ChunkStore(DatasetManifest manifest, std::shared_ptr<Corpus> corpus);

  const DatasetManifest& manifest() const noexcept { return manifest_; }
  std::size_t size() const noexcept { return manifest_.entries.size(); }
  const ChunkPair& pair(std::size_t i);

  /// Raw little-endian float32: input then target for every entry.
  void write_cache(const std::filesystem::path& path);
  /// Fills the store from a cache written by write_cache; false if the size
  /// does not match the manifest.
  bool read_cache(const std::filesystem::path& path);

 private:
  ChunkPair materialize(std::size_t i);

  DatasetManifest manifest_;
  std::shared_ptr<Corpus> corpus_;
  std::vector<std::optional<ChunkPair>> pairs_;
};

/// Chunk pair for one manifest entry, computed from its source clip.
ChunkPair materialize_pair(const DatasetManifest& m, const ManifestEntry& e, const AudioClip& source);

/// Deterministic per-epoch permutation of [0, n) cut into batches; the last
/// batch may be partial.
std::vector<std::vector<std::size_t>> iterate_batches(std::size_t n, std::size_t batch_size,
                                                      std::uint64_t epoch_seed);
inline std::vector<std::vector<std::size_t>> iterate_batches(const DatasetManifest& m,
                                                             std::size_t batch_size,
                                                             std::uint64_t epoch_seed) {
  return iterate_batches(m.size(), batch_size, epoch_seed);
}

}  // namespace fxprof::data
