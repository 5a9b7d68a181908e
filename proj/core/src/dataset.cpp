#include "fxprof/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "fxprof/checkpoint.hpp"
#include "fxprof/random.hpp"
#include "json.hpp"

namespace fxprof::data {

using nlohmann::json;

namespace {

const char* split_name(Split s) { return s == Split::Train ? "train" : "val"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  throw std::invalid_argument("unknown split tag '" + s + "'");
}

fx::EffectInstance at_rate(const fx::EffectInstance& fx, int sample_rate) {
  if (fx.sample_rate() == sample_rate) return fx;
  return fx::EffectInstance(fx.id(), fx.knobs(), sample_rate);
}

}  // namespace

std::string manifest_json(const DatasetManifest& m) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"index", e.index}, {"source", e.source}, {"offset", e.offset}, {"knobs", e.knobs}});
  }
  json j{{"format", kManifestFormat},
         {"split", split_name(m.split)},
         {"effect", json::parse(model::effect_json(m.effect))},
         {"sample_rate", m.sample_rate},
         {"chunk_size", m.chunk_size},
         {"context_len", m.context_len},
         {"seed", m.seed},
         {"corpus_dir", m.corpus_dir},
         {"entries", entries}};
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.value("format", "") != kManifestFormat) {
    throw std::invalid_argument(std::string("dataset manifest is not ") + kManifestFormat);
  }
  DatasetManifest m;
  m.split = parse_split(j.at("split").get<std::string>());
  m.effect = model::effect_from_json(j.at("effect").dump());
  m.sample_rate = j.at("sample_rate").get<int>();
  m.chunk_size = j.at("chunk_size").get<std::size_t>();
  m.context_len = j.at("context_len").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.corpus_dir = j.at("corpus_dir").get<std::string>();
  for (const auto& e : j.at("entries")) {
    ManifestEntry entry{e.at("index").get<std::size_t>(), e.at("source").get<std::string>(),
                        e.at("offset").get<std::size_t>(), e.at("knobs").get<std::vector<double>>()};
    if (entry.knobs.size() != m.effect.knob_count()) {
      throw std::invalid_argument("manifest entry " + std::to_string(entry.index) + " has the wrong knob count");
    }
    m.entries.push_back(std::move(entry));
  }
  for (std::size_t i = 1; i < m.entries.size(); ++i) {
    if (m.entries[i].index <= m.entries[i - 1].index) {
      throw std::invalid_argument("manifest entries are not sorted by index");
    }
  }
  return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << manifest_json(m);
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open manifest '" + path.string() + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return manifest_from_json(text);
  } catch (const json::exception& e) {
    throw std::runtime_error("manifest '" + path.string() + "' is malformed: " + e.what());
  }
}

Corpus::Corpus(std::filesystem::path root, int sample_rate) : root_(std::move(root)), sample_rate_(sample_rate) {
  if (sample_rate <= 0) throw std::invalid_argument("corpus sample rate must be positive");
  if (!std::filesystem::is_directory(root_)) {
    throw std::runtime_error("corpus directory '" + root_.string() + "' does not exist");
  }
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root_)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext != ".wav") continue;
    files_.push_back(std::filesystem::relative(entry.path(), root_).generic_string());
  }
  std::sort(files_.begin(), files_.end());
}

const AudioClip& Corpus::clip(const std::string& relative) {
  auto it = cache_.find(relative);
  if (it == cache_.end()) {
    it = cache_.emplace(relative, resample(load_wav(root_ / relative), sample_rate_)).first;
  }
  return it->second;
}

DatasetSplit build_dataset(const BuildOptions& options) {
  const int sr = options.effect.sample_rate();
  Corpus corpus(options.corpus_dir, sr);
  return build_dataset(options, corpus);
}

DatasetSplit build_dataset(const BuildOptions& options, Corpus& corpus) {
  if (options.chunk_size == 0) throw std::invalid_argument("chunk size must be positive");
  if (!(options.val_frac >= 0.0 && options.val_frac < 1.0)) {
    throw std::invalid_argument("validation fraction must lie in [0, 1)");
  }
  const fx::EffectInstance effect = at_rate(options.effect, corpus.sample_rate());
  const std::size_t k = effect.knob_count();
  if (!options.pinned.empty() && options.pinned.size() != k) {
    throw std::invalid_argument("pinned knob list has " + std::to_string(options.pinned.size()) +
                                " values, effect has " + std::to_string(k));
  }
  for (const auto& p : options.pinned) {
    if (p && !(*p >= fx::kKnobLow && *p <= fx::kKnobHigh)) {
      throw std::invalid_argument("pinned knob value outside [-0.5, 0.5]");
    }
  }
  const std::size_t context = options.context_len.value_or(fx::default_context_len(effect));

  if (corpus.files().empty()) {
    throw std::runtime_error("corpus '" + corpus.root().string() + "' contains no WAV files");
  }
  std::vector<std::string> eligible;
  for (const auto& f : corpus.files()) {
    if (corpus.clip(f).size() >= options.chunk_size + context) eligible.push_back(f);
  }
  if (eligible.empty()) {
    throw std::runtime_error("no corpus file is at least chunk + context = " +
                             std::to_string(options.chunk_size + context) + " samples long");
  }

  DatasetManifest base;
  base.effect = effect;
  base.sample_rate = corpus.sample_rate();
  base.chunk_size = options.chunk_size;
  base.context_len = context;
  base.seed = options.seed;
  base.corpus_dir = options.corpus_dir.generic_string();

  std::vector<ManifestEntry> entries(options.n_chunks);
  for (std::size_t i = 0; i < options.n_chunks; ++i) {
    Rng rng(derive_seed(options.seed, i));
    ManifestEntry e;
    e.index = i;
    for (int attempt = 0; attempt < kSilenceRetries; ++attempt) {
      e.source = eligible[rng.below(eligible.size())];
      const AudioClip& clip = corpus.clip(e.source);
      e.offset = context + rng.below(clip.size() - options.chunk_size - context + 1);
      e.knobs.assign(k, 0.0);
      for (std::size_t j = 0; j < k; ++j) {
        // Draw every knob even when pinned so pins do not shift the stream.
        const double v = rng.uniform(fx::kKnobLow, fx::kKnobHigh);
        e.knobs[j] = (!options.pinned.empty() && options.pinned[j]) ? *options.pinned[j] : v;
      }
      if (!options.reject_silence) break;
      const auto first = clip.samples.begin() + static_cast<std::ptrdiff_t>(e.offset);
      const std::vector<float> chunk(first, first + static_cast<std::ptrdiff_t>(options.chunk_size));
      if (rms(chunk) >= kSilenceRms) break;
    }
    entries[i] = std::move(e);
  }

  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(options.n_chunks) * options.val_frac));
  const std::size_t n_train = options.n_chunks - n_val;
  DatasetSplit out{base, base};
  out.train.split = Split::Train;
  out.val.split = Split::Val;
  out.train.entries.assign(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.val.entries.assign(entries.begin() + static_cast<std::ptrdiff_t>(n_train), entries.end());
  return out;
}

ChunkPair materialize_pair(const DatasetManifest& m, const ManifestEntry& e, const AudioClip& source) {
  if (e.offset < m.context_len || e.offset + m.chunk_size > source.size()) {
    throw std::runtime_error("manifest entry " + std::to_string(e.index) + " lies outside '" + e.source + "'");
  }
  const auto begin = source.samples.begin();
  const auto off = static_cast<std::ptrdiff_t>(e.offset);
  const auto ctx = static_cast<std::ptrdiff_t>(m.context_len);
  const auto len = static_cast<std::ptrdiff_t>(m.chunk_size);

  ChunkPair p;
  p.input.assign(begin + off, begin + off + len);
  AudioClip window{std::vector<float>(begin + off - ctx, begin + off + len), source.sample_rate};
  const AudioClip wet = fx::apply_effect(m.effect, fx::KnobVector{e.knobs}, window);
  p.target.assign(wet.samples.begin() + ctx, wet.samples.end());
  p.knobs = fx::KnobVector{e.knobs};
  p.source_file = e.source;
  p.offset = e.offset;
  return p;
}

ChunkStore::ChunkStore(DatasetManifest manifest)
    : ChunkStore(manifest, std::make_shared<Corpus>(manifest.corpus_dir, manifest.sample_rate)) {}

ChunkStore::ChunkStore(DatasetManifest manifest, std::shared_ptr<Corpus> corpus)
    : manifest_(std::move(manifest)), corpus_(std::move(corpus)), pairs_(manifest_.entries.size()) {
  if (!corpus_) throw std::invalid_argument("chunk store needs a corpus");
  if (corpus_->sample_rate() != manifest_.sample_rate) {
    throw std::invalid_argument("corpus rate does not match the manifest rate");
  }
}

const ChunkPair& ChunkStore::pair(std::size_t i) {
  if (i >= pairs_.size()) throw std::out_of_range("chunk index out of range");
  if (!pairs_[i]) pairs_[i] = materialize(i);
  return *pairs_[i];
}

ChunkPair ChunkStore::materialize(std::size_t i) {
  const auto& e = manifest_.entries[i];
  return materialize_pair(manifest_, e, corpus_->clip(e.source));
}

void ChunkStore::write_cache(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  std::vector<char> buf(manifest_.chunk_size * 4);
  auto put = [&](const std::vector<float>& v) {
    for (std::size_t n = 0; n < v.size(); ++n) {
      const auto bits = std::bit_cast<std::uint32_t>(v[n]);
      for (int b = 0; b < 4; ++b) buf[4 * n + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  };
  for (std::size_t i = 0; i < size(); ++i) {
    const auto& p = pair(i);
    put(p.input);
    put(p.target);
  }
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

bool ChunkStore::read_cache(const std::filesystem::path& path) {
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(path, ec);
  if (ec || bytes != size() * manifest_.chunk_size * 8) return false;
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::vector<unsigned char> buf(manifest_.chunk_size * 4);
  auto get = [&](std::vector<float>& v) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    v.resize(manifest_.chunk_size);
    for (std::size_t n = 0; n < v.size(); ++n) {
      std::uint32_t bits = 0;
      for (int b = 3; b >= 0; --b) bits = (bits << 8) | buf[4 * n + b];
      v[n] = std::bit_cast<float>(bits);
    }
  };
  for (std::size_t i = 0; i < size(); ++i) {
    const auto& e = manifest_.entries[i];
    ChunkPair p;
    get(p.input);
    get(p.target);
    p.knobs = fx::KnobVector{e.knobs};
    p.source_file = e.source;
    p.offset = e.offset;
    pairs_[i] = std::move(p);
  }
  return static_cast<bool>(in);
}

std::vector<std::vector<std::size_t>> iterate_batches(std::size_t n, std::size_t batch_size,
                                                      std::uint64_t epoch_seed) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(epoch_seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace fxprof::data
