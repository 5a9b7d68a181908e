// fxprof: dataset generation, training, inference, evaluation and schedule
// preview. Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fxprof/checkpoint.hpp"
#include "fxprof/corpus.hpp"
#include "fxprof/dataset.hpp"
#include "fxprof/log.hpp"
#include "fxprof/model.hpp"
#include "fxprof/schedule.hpp"
#include "fxprof/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fxprof;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The resolved configuration goes to stderr so stdout can carry CSV/JSON.
void echo_config(const std::string& command, const json& config) {
  std::cerr << "fxprof " << command << " config " << config.dump() << "\n";
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(what + ": '" + item + "' is not a number");
    }
  }
  return out;
}

fx::EffectId require_effect(const std::string& name) {
  const auto id = fx::parse_effect(name);
  if (!id) throw UsageError("unknown effect '" + name + "'; valid effects: " + fx::valid_effect_names());
  return *id;
}

json effect_summary(const fx::EffectInstance& fx) { return json::parse(model::effect_json(fx)); }

// ---------------------------------------------------------------- synth-corpus

struct SynthArgs {
  std::string out;
  std::string kind = "mix";
  std::size_t files = 8;
  double seconds = 5.0;
  int sr = 44100;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a) {
  const auto kind = data::parse_corpus_kind(a.kind);
  if (!kind) throw UsageError("unknown corpus kind '" + a.kind + "'; valid kinds: tones, mix");
  if (a.files == 0 || !(a.seconds > 0.0) || a.sr <= 0) throw UsageError("files, seconds and sr must be positive");
  echo_config("synth-corpus", {{"out", a.out}, {"kind", a.kind}, {"files", a.files}, {"seconds", a.seconds},
                               {"sr", a.sr}, {"seed", a.seed}});
  data::write_synthetic_corpus(a.out, *kind, a.files, a.seconds, a.sr, a.seed);
  std::cout << "wrote " << a.files << " files to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- gen-dataset

struct GenArgs {
  std::string corpus;
  std::string effect = "comp4c";
  std::size_t n_chunks = 1000;
  std::size_t chunk_size = 4096;
  int sr = 44100;
  std::uint64_t seed = 0;
  double val_frac = 0.1;
  std::optional<std::size_t> context_len;
  std::vector<std::string> pins;
  bool allow_silence = false;
  bool cache = false;
  std::string out;
};

int run_gen(const GenArgs& a) {
  const auto id = require_effect(a.effect);
  if (a.sr <= 0) throw UsageError("--sr must be positive");
  if (a.chunk_size == 0 || a.n_chunks == 0) throw UsageError("--chunk-size and --n-chunks must be positive");
  if (!(a.val_frac >= 0.0 && a.val_frac < 1.0)) throw UsageError("--val-frac must lie in [0, 1)");
  data::BuildOptions o;
  o.corpus_dir = a.corpus;
  o.effect = fx::EffectInstance::make(id, a.sr);
  o.n_chunks = a.n_chunks;
  o.chunk_size = a.chunk_size;
  o.context_len = a.context_len;
  o.seed = a.seed;
  o.val_frac = a.val_frac;
  o.reject_silence = !a.allow_silence;
  json pins = json::object();
  if (!a.pins.empty()) {
    o.pinned.assign(o.effect.knob_count(), std::nullopt);
    for (const auto& pin : a.pins) {
      const auto eq = pin.find('=');
      if (eq == std::string::npos) throw UsageError("--pin expects name=value, got '" + pin + "'");
      const std::string name = pin.substr(0, eq);
      const auto idx = o.effect.knob_index(name);
      if (!idx) throw UsageError("effect " + a.effect + " has no knob '" + name + "'");
      const double physical = parse_list(pin.substr(eq + 1), "--pin").at(0);
      const auto& spec = o.effect.knobs()[*idx];
      if (physical < spec.min || physical > spec.max) {
        throw UsageError("--pin " + name + " outside [" + std::to_string(spec.min) + ", " +
                         std::to_string(spec.max) + "]");
      }
      o.pinned[*idx] = fx::normalize(spec, physical);
      pins[name] = physical;
    }
  }
  echo_config("gen-dataset", {{"corpus", a.corpus},
                              {"effect", effect_summary(o.effect)},
                              {"n_chunks", a.n_chunks},
                              {"chunk_size", a.chunk_size},
                              {"sr", a.sr},
                              {"seed", a.seed},
                              {"val_frac", a.val_frac},
                              {"context_len", a.context_len ? json(*a.context_len)
                                                            : json(fx::default_context_len(o.effect))},
                              {"pins", pins},
                              {"allow_silence", a.allow_silence},
                              {"cache", a.cache},
                              {"out", a.out}});
  if (!fs::is_directory(a.corpus)) throw UsageError("corpus directory '" + a.corpus + "' does not exist");

  auto corpus = std::make_shared<data::Corpus>(a.corpus, a.sr);
  const auto split = data::build_dataset(o, *corpus);
  const fs::path out(a.out);
  fs::create_directories(out);
  data::save_manifest(split.train, out / "train.json");
  data::save_manifest(split.val, out / "val.json");
  if (a.cache) {
    data::ChunkStore(split.train, corpus).write_cache(out / "train.chunks.f32");
    data::ChunkStore(split.val, corpus).write_cache(out / "val.chunks.f32");
  }
  std::cout << "train " << split.train.size() << " chunks, val " << split.val.size() << " chunks, sr "
            << split.train.sample_rate << ", context " << split.train.context_len << " -> " << out.string()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string train_manifest;
  std::string val_manifest;
  std::string out;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  double lr_max = 1e-3;
  double pct_up = 0.3;
  double div = 25.0;
  double final_div = 1e4;
  std::string loss = "logcosh_time";
  std::size_t spec_fft = train::kDefaultSpecFft;
  std::optional<std::size_t> chunk_size;
  std::size_t frame_size = 512;
  std::size_t hop = 256;
  std::string widths = "512,256,128,64,128,256,512";
  bool freeze = false;
  bool no_final_skip = false;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;
  bool no_wall_time = false;
};

data::ChunkStore open_store(const fs::path& manifest) {
  auto m = data::load_manifest(manifest);
  data::ChunkStore store(std::move(m));
  fs::path cache = manifest;
  cache.replace_extension(".chunks.f32");
  if (fs::exists(cache) && !store.read_cache(cache)) {
    log::warn("ignoring chunk cache '" + cache.string() + "' (size does not match the manifest)");
  }
  return store;
}

int run_train(const TrainArgs& a) {
  const auto loss = train::parse_loss_kind(a.loss);
  if (!loss) throw UsageError("unknown loss '" + a.loss + "'; valid losses: logcosh_time, logcosh_spec, logsnr");
  if (!fs::exists(a.train_manifest)) throw UsageError("train manifest '" + a.train_manifest + "' not found");
  if (!a.val_manifest.empty() && !fs::exists(a.val_manifest)) {
    throw UsageError("val manifest '" + a.val_manifest + "' not found");
  }
  const auto manifest = data::load_manifest(a.train_manifest);

  train::TrainConfig c;
  c.model.chunk_size = a.chunk_size.value_or(manifest.chunk_size);
  c.model.frame_size = a.frame_size;
  c.model.hop = a.hop;
  const auto widths = parse_list(a.widths, "--widths");
  if (widths.size() != model::kStackDepth) throw UsageError("--widths needs exactly 7 values");
  for (std::size_t i = 0; i < model::kStackDepth; ++i) {
    if (!(widths[i] >= 1.0)) throw UsageError("--widths entries must be positive integers");
    c.model.hidden_widths[i] = static_cast<std::size_t>(widths[i]);
  }
  c.model.knob_count = manifest.effect.knob_count();
  c.model.freeze_transforms = a.freeze;
  c.model.final_skip = !a.no_final_skip;
  c.model.seed = a.seed;
  c.train_manifest = a.train_manifest;
  c.val_manifest = a.val_manifest;
  c.epochs = a.epochs;
  c.batch_size = a.batch_size;
  c.schedule = {a.lr_max, a.pct_up, a.div, a.final_div};
  c.loss = *loss;
  c.spec_fft = a.spec_fft;
  c.seed = a.seed;
  c.checkpoint_every = a.checkpoint_every;
  c.out_dir = a.out;
  c.record_wall_time = !a.no_wall_time;
  try {
    c.validate();
    train::check_compatible(c.model, std::nullopt, manifest);
    if (!a.val_manifest.empty()) {
      train::check_compatible(c.model, manifest.effect, data::load_manifest(a.val_manifest));
    }
    if (c.loss == train::LossKind::LogcoshSpec) {
      if (c.spec_fft < 2 || (c.spec_fft & (c.spec_fft - 1)) != 0 || c.spec_fft > c.model.chunk_size) {
        throw std::invalid_argument("--spec-fft must be a power of two no larger than the chunk size");
      }
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  echo_config("train", {{"model", json::parse(model::config_json(c.model))},
                        {"effect", effect_summary(manifest.effect)},
                        {"train_manifest", a.train_manifest},
                        {"val_manifest", a.val_manifest},
                        {"epochs", c.epochs},
                        {"batch_size", c.batch_size},
                        {"lr_max", a.lr_max},
                        {"pct_up", a.pct_up},
                        {"div", a.div},
                        {"final_div", a.final_div},
                        {"loss", a.loss},
                        {"spec_fft", c.spec_fft},
                        {"seed", a.seed},
                        {"checkpoint_every", c.checkpoint_every},
                        {"record_wall_time", c.record_wall_time},
                        {"out", a.out}});

  auto train_store = open_store(a.train_manifest);
  std::optional<data::ChunkStore> val_store;
  if (!a.val_manifest.empty()) val_store.emplace(open_store(a.val_manifest));
  const auto result = train::train(c, train_store, val_store ? &*val_store : nullptr);
  const auto& last = result.log.back();
  std::cout << "steps " << last.step << ", final train loss " << last.train_loss;
  if (last.val_loss) std::cout << ", val loss " << *last.val_loss;
  std::cout << "\ncheckpoint " << result.checkpoint_path.string() << " sha256 "
            << model::sha256_hex(model::serialize_parameters(result.checkpoint.params)) << "\n";
  return 0;
}

// ---------------------------------------------------------------- process

struct ProcessArgs {
  std::string checkpoint;
  std::string in;
  std::string out;
  std::string knobs;
  bool float_out = false;
};

int run_process(const ProcessArgs& a) {
  if (!fs::exists(a.checkpoint)) throw UsageError("checkpoint '" + a.checkpoint + "' not found");
  if (!fs::exists(a.in)) throw UsageError("input '" + a.in + "' not found");
  const auto ckpt = model::load_checkpoint(a.checkpoint);
  const auto physical = parse_list(a.knobs, "--knobs");
  if (physical.size() != ckpt.params.config.knob_count) {
    throw UsageError("--knobs has " + std::to_string(physical.size()) + " values, checkpoint expects " +
                     std::to_string(ckpt.params.config.knob_count));
  }
  fx::KnobVector knobs;
  if (ckpt.effect) {
    try {
      knobs = ckpt.effect->normalize_physical(physical);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  } else {
    knobs.values = physical;  // no effect metadata: values are taken as normalized
  }
  AudioClip clip = load_wav(a.in);
  const int sr = ckpt.effect ? ckpt.effect->sample_rate() : clip.sample_rate;
  if (clip.sample_rate != sr) clip = resample(clip, sr);
  if (clip.size() < ckpt.params.config.chunk_size) {
    throw UsageError("input has " + std::to_string(clip.size()) + " samples, shorter than one chunk (" +
                     std::to_string(ckpt.params.config.chunk_size) + ")");
  }
  echo_config("process", {{"checkpoint", a.checkpoint},
                          {"in", a.in},
                          {"out", a.out},
                          {"knobs_physical", physical},
                          {"knobs_normalized", knobs.values},
                          {"sample_rate", sr},
                          {"format", a.float_out ? "float32" : "pcm16"}});
  const AudioClip y = model::forward_long(ckpt.params, clip, knobs);
  save_wav(y, a.out, a.float_out ? WavFormat::Float32 : WavFormat::Pcm16);
  std::cout << "processed " << y.size() << " of " << clip.size() << " samples -> " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string export_dir;
  std::string out;
};

int run_eval(const EvalArgs& a) {
  if (!fs::exists(a.checkpoint)) throw UsageError("checkpoint '" + a.checkpoint + "' not found");
  if (!fs::exists(a.manifest)) throw UsageError("manifest '" + a.manifest + "' not found");
  const auto ckpt = model::load_checkpoint(a.checkpoint);
  try {
    train::check_compatible(ckpt.params.config, ckpt.effect, data::load_manifest(a.manifest));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  echo_config("eval", {{"checkpoint", a.checkpoint},
                       {"manifest", a.manifest},
                       {"export", a.export_dir},
                       {"out", a.out}});
  auto store = open_store(a.manifest);
  std::optional<fs::path> export_dir;
  if (!a.export_dir.empty()) export_dir = a.export_dir;
  const auto metrics = train::evaluate(ckpt.params, store, export_dir);
  if (a.out.empty()) {
    std::cout << metrics.to_json();
  } else {
    std::ofstream f(a.out, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + a.out + "'");
    f << metrics.to_json();
  }
  return 0;
}

// ---------------------------------------------------------------- lr-preview

struct LrArgs {
  std::size_t total_steps = 1000;
  double lr_max = 1e-3;
  double pct_up = 0.3;
  double div = 25.0;
  double final_div = 1e4;
  std::string out;
};

int run_lr(const LrArgs& a) {
  const train::OneCycle s{a.lr_max, a.pct_up, a.div, a.final_div};
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (a.total_steps == 0) throw UsageError("--total-steps must be positive");
  echo_config("lr-preview", {{"total_steps", a.total_steps}, {"lr_max", a.lr_max}, {"pct_up", a.pct_up},
                             {"div", a.div}, {"final_div", a.final_div}, {"out", a.out}});
  std::ostringstream csv;
  csv << "step,lr\n";
  char buf[64];
  for (std::size_t step = 0; step <= a.total_steps; ++step) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", step, train::onecycle_lr(step, a.total_steps, s));
    csv << buf;
  }
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream f(a.out, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + a.out + "'");
    f << csv.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Profile knob-controlled audio effects with a waveform-domain network"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth-corpus", "Write a synthetic WAV corpus (tones or mix)");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--kind", synth.kind, "tones | mix")->capture_default_str();
  c_synth->add_option("--files", synth.files, "Number of files")->capture_default_str();
  c_synth->add_option("--seconds", synth.seconds, "Duration of each file")->capture_default_str();
  c_synth->add_option("--sr", synth.sr, "Sample rate")->capture_default_str();
  c_synth->add_option("--seed", synth.seed)->capture_default_str();

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen-dataset", "Build train/val manifests from a WAV corpus");
  c_gen->add_option("--corpus", gen.corpus, "Corpus directory (searched recursively for .wav)")->required();
  c_gen->add_option("--effect", gen.effect, "comp4c | echo | tremolo | chorus")->capture_default_str();
  c_gen->add_option("--n-chunks", gen.n_chunks)->capture_default_str();
  c_gen->add_option("--chunk-size", gen.chunk_size)->capture_default_str();
  c_gen->add_option("--sr", gen.sr, "Dataset sample rate; the corpus is resampled")->capture_default_str();
  c_gen->add_option("--seed", gen.seed)->capture_default_str();
  c_gen->add_option("--val-frac", gen.val_frac, "Fraction held out for validation")->capture_default_str();
  c_gen->add_option("--context-len", gen.context_len, "Warm-up samples (default: effect-specific)");
  c_gen->add_option("--pin", gen.pins, "Fix a knob in physical units, e.g. threshold=0");
  c_gen->add_flag("--allow-silence", gen.allow_silence, "Keep near-silent chunks instead of redrawing");
  c_gen->add_flag("--cache", gen.cache, "Also write raw float32 chunk caches");
  c_gen->add_option("--out", gen.out, "Output directory (train.json, val.json)")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model on a manifest");
  c_train->add_option("--train", tr.train_manifest, "Training manifest")->required();
  c_train->add_option("--val", tr.val_manifest, "Validation manifest");
  c_train->add_option("--out", tr.out, "Output directory")->required();
  c_train->add_option("--epochs", tr.epochs)->capture_default_str();
  c_train->add_option("--batch-size", tr.batch_size)->capture_default_str();
  c_train->add_option("--lr-max", tr.lr_max)->capture_default_str();
  c_train->add_option("--pct-up", tr.pct_up)->capture_default_str();
  c_train->add_option("--div", tr.div)->capture_default_str();
  c_train->add_option("--final-div", tr.final_div)->capture_default_str();
  c_train->add_option("--loss", tr.loss, "logcosh_time | logcosh_spec | logsnr")->capture_default_str();
  c_train->add_option("--spec-fft", tr.spec_fft)->capture_default_str();
  c_train->add_option("--chunk-size", tr.chunk_size, "Must match the manifest (default: taken from it)");
  c_train->add_option("--frame-size", tr.frame_size)->capture_default_str();
  c_train->add_option("--hop", tr.hop)->capture_default_str();
  c_train->add_option("--widths", tr.widths, "Seven comma-separated hidden widths")->capture_default_str();
  c_train->add_flag("--freeze-transforms", tr.freeze, "Keep the DFT transforms fixed");
  c_train->add_flag("--no-final-skip", tr.no_final_skip, "Drop the input-to-output skip");
  c_train->add_option("--seed", tr.seed)->capture_default_str();
  c_train->add_option("--checkpoint-every", tr.checkpoint_every, "Steps between checkpoints (0: final only)")
      ->capture_default_str();
  c_train->add_flag("--no-wall-time", tr.no_wall_time, "Leave wall_time_s empty for reproducible logs");

  ProcessArgs pr;
  auto* c_proc = app.add_subcommand("process", "Run a checkpoint over a WAV file");
  c_proc->add_option("--checkpoint", pr.checkpoint)->required();
  c_proc->add_option("--in", pr.in)->required();
  c_proc->add_option("--out", pr.out)->required();
  c_proc->add_option("--knobs", pr.knobs, "Comma-separated knob values in physical units")->required();
  c_proc->add_flag("--float", pr.float_out, "Write float32 instead of PCM16");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Score a checkpoint on a manifest");
  c_eval->add_option("--checkpoint", ev.checkpoint)->required();
  c_eval->add_option("--manifest", ev.manifest)->required();
  c_eval->add_option("--export", ev.export_dir, "Write target/prediction/difference WAVs here");
  c_eval->add_option("--out", ev.out, "Metrics JSON path (default: stdout)");

  LrArgs lr;
  auto* c_lr = app.add_subcommand("lr-preview", "Print the 1cycle schedule as CSV");
  c_lr->add_option("--total-steps", lr.total_steps)->capture_default_str();
  c_lr->add_option("--lr-max", lr.lr_max)->capture_default_str();
  c_lr->add_option("--pct-up", lr.pct_up)->capture_default_str();
  c_lr->add_option("--div", lr.div)->capture_default_str();
  c_lr->add_option("--final-div", lr.final_div)->capture_default_str();
  c_lr->add_option("--out", lr.out, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*c_synth) return run_synth(synth);
    if (*c_gen) return run_gen(gen);
    if (*c_train) return run_train(tr);
    if (*c_proc) return run_process(pr);
    if (*c_eval) return run_eval(ev);
    if (*c_lr) return run_lr(lr);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
