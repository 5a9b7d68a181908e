// Acceptance run: one PASS/FAIL line per criterion. Tolerances and budgets
// are fixed below; `--only 1,4` runs a subset. `--expect-fail` names criteria
// known to fail (see README); the exit code is 0 only when the failing set is
// exactly that list, so a regression or a newly passing criterion both show.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fxprof/corpus.hpp"
#include "fxprof/gradcheck.hpp"
#include "fxprof/log.hpp"
#include "fxprof/trainer.hpp"
#include "support/grad_cases.hpp"

namespace fs = std::filesystem;
using namespace fxprof;
using grad::Tape;
using grad::Tensor2;
using grad::Var;

namespace {

// Criterion 1
constexpr double kGradTol = 1e-4;
constexpr double kGradSuiteSeconds = 120;
// Criterion 2
constexpr int kRoundTripSignals = 100;
constexpr double kRoundTripTolDouble = 1e-10;
constexpr double kRoundTripTolFloat = 1e-5;
// Criterion 3
constexpr double kIdentityTol = 1e-6;
// Criterion 4
constexpr double kStaticCurveTolDb = 0.1;
// Criteria 5-9
constexpr std::size_t kTrainChunks = 64;
constexpr std::size_t kValChunks = 16;
constexpr std::size_t kSteps = 2000;
constexpr std::size_t kBatch = 8;
constexpr double kLrMax = 1e-3;
constexpr double kOverfitRatio = 100;
constexpr double kOverfitSeconds = 30 * 60;
constexpr double kCycleRatio = 5;
constexpr std::uint64_t kSeeds[] = {1, 2, 3};
constexpr int kCorpusFiles = 8;
constexpr double kCorpusSeconds = 5.0;
constexpr double kTremoloPeriod = 1024;  // samples
// Criterion 10
constexpr double kLossRelTol = 1e-9;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + fmt("%.3e", x);
  return "[" + s + "]";
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct RunSummary {
  double init_train = 0;
  double final_train = 0;
  double final_val = 0;
  double seconds = 0;
  model::ModelParams<float> params;
};

class Context {
 public:
  explicit Context(fs::path work) : work_(std::move(work)) { fs::create_directories(work_); }

  const fs::path& work() const { return work_; }

  fs::path corpus(data::CorpusKind kind) {
    const auto dir = work_ / (kind == data::CorpusKind::Mix ? "corpus_mix" : "corpus_tones");
    if (!fs::exists(dir / "clip_000.wav")) {
      data::write_synthetic_corpus(dir, kind, kCorpusFiles, kCorpusSeconds, 44100,
                                   kind == data::CorpusKind::Mix ? 101 : 202);
    }
    return dir;
  }

  struct Stores {
    data::ChunkStore train;
    data::ChunkStore val;
  };

  /// 64 train + 16 val chunks, memoized by key.
  Stores& dataset(const std::string& key, data::CorpusKind kind, fx::EffectId effect, std::size_t chunk,
                  std::vector<std::optional<double>> pinned = {}) {
    auto it = stores_.find(key);
    if (it != stores_.end()) return it->second;
    data::BuildOptions o;
    o.corpus_dir = corpus(kind);
    o.effect = fx::EffectInstance::make(effect, 44100);
    o.n_chunks = kTrainChunks + kValChunks;
    o.val_frac = double(kValChunks) / double(o.n_chunks);
    o.chunk_size = chunk;
    o.seed = 77;
    o.pinned = std::move(pinned);
    auto split = data::build_dataset(o);
    if (split.train.size() != kTrainChunks) throw std::logic_error("unexpected train split size");
    return stores_.emplace(key, Stores{data::ChunkStore(split.train), data::ChunkStore(split.val)}).first->second;
  }

  /// Memoized training run: `steps` optimizer steps at batch kBatch.
  const RunSummary& run(const std::string& key, Stores& data, model::ModelConfig mc, std::uint64_t seed) {
    auto it = runs_.find(key);
    if (it != runs_.end()) return it->second;
    train::TrainConfig c;
    mc.chunk_size = data.train.manifest().chunk_size;
    mc.knob_count = data.train.manifest().effect.knob_count();
    c.model = mc;
    c.batch_size = kBatch;
    const std::size_t steps_per_epoch = (data.train.size() + kBatch - 1) / kBatch;
    c.epochs = kSteps / steps_per_epoch;
    c.schedule.lr_max = kLrMax;
    c.seed = seed;

    RunSummary s;
    auto init_cfg = mc;
    init_cfg.seed = seed;
    s.init_train = train::dataset_loss(model::init_model<float>(init_cfg), data.train, train::LossKind::LogcoshTime);
    const auto t0 = Clock::now();
    auto result = train::train(c, data.train, &data.val);
    s.seconds = seconds_since(t0);
    s.final_train = train::dataset_loss(result.checkpoint.params, data.train, train::LossKind::LogcoshTime);
    s.final_val = result.log.back().val_loss.value();
    s.params = std::move(result.checkpoint.params);
    std::printf("      run %-28s init %.3e  train %.3e  val %.3e  (%.0f s)\n", key.c_str(), s.init_train,
                s.final_train, s.final_val, s.seconds);
    std::fflush(stdout);
    return runs_.emplace(key, std::move(s)).first->second;
  }

  // comp4c overfit setup shared by criteria 5-7
  Stores& comp_data() { return dataset("comp4c_mix_4096", data::CorpusKind::Mix, fx::EffectId::Comp4c, 4096); }

 private:
  fs::path work_;
  std::map<std::string, Stores> stores_;
  std::map<std::string, RunSummary> runs_;
};

// ---------------------------------------------------------------------------

Outcome gradient_correctness(Context&) {
  const auto t0 = Clock::now();
  auto cases = fxtest::op_cases(1);
  for (std::uint64_t s : {1, 2, 3}) {
    cases.push_back(fxtest::tiny_model_case(s));
    cases.push_back(fxtest::tiny_model_case(s + 10, false));
    cases.push_back(fxtest::tiny_model_case(s + 20, true, true));
  }
  double worst = 0;
  std::string worst_name;
  std::size_t checked = 0;
  for (auto& c : cases) {
    const auto r = grad::grad_check(c, grad::GradCheckOptions{1e-5, 1.0});
    checked += r.checked;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = c.name;
    }
  }
  const double secs = seconds_since(t0);
  return {worst < kGradTol && secs < kGradSuiteSeconds,
          "max rel error " + fmt("%.2e", worst) + " (" + worst_name + ") over " + std::to_string(cases.size()) +
              " instances, " + std::to_string(checked) + " elements, " + fmt("%.1f", secs) + " s"};
}

template <typename T>
double round_trip_rms(std::size_t frame, std::uint64_t seed) {
  const auto [wc, ws] = model::dft_weights<T>(frame);
  const auto inv = model::inverse_dft_weights<T>(frame);
  Rng rng(seed);
  const std::size_t len = frame * (1 + rng.below(8));
  Tensor2<T> x(1, len);
  for (auto& v : x.values()) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  Tape<T> tape;
  const Var xv = tape.constant(x);
  const Var a = tape.framed_transform(xv, tape.constant(wc), frame);
  const Var b = tape.framed_transform(xv, tape.constant(ws), frame);
  const Var y = tape.overlap_add(tape.concat_rows(a, b), tape.constant(inv), frame, 1);
  const auto& yv = tape.value(y);
  double se = 0;
  for (std::size_t i = 0; i < len; ++i) se += std::pow(double(yv[i]) - double(x[i]), 2);
  return std::sqrt(se / double(len));
}

Outcome dft_round_trip(Context&) {
  double worst_d = 0, worst_f = 0;
  const std::size_t frames[] = {4, 16, 64, 256, 512};
  for (int i = 0; i < kRoundTripSignals; ++i) {
    const std::size_t frame = frames[i % 5];
    worst_d = std::max(worst_d, round_trip_rms<double>(frame, 1000 + i));
    worst_f = std::max(worst_f, round_trip_rms<float>(frame, 1000 + i));
  }
  return {worst_d < kRoundTripTolDouble && worst_f < kRoundTripTolFloat,
          std::to_string(kRoundTripSignals) + " signals, worst RMS double " + fmt("%.2e", worst_d) + ", single " +
              fmt("%.2e", worst_f)};
}

Outcome identity_configuration(Context&) {
  model::ModelConfig c;  // default small model
  auto params = model::init_model<float>(c);
  model::zero_dense_layers(params);
  Rng rng(5);
  grad::Tensor2f x(4, c.chunk_size), k(c.knob_count, 4);
  for (auto& v : x.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto& v : k.values()) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  const auto y = model::forward(params, x, k);
  double worst = 0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, double(std::abs(y[i] - x[i])));
  return {worst <= kIdentityTol, "max abs error " + fmt("%.2e", worst) + " over 4 x 4096 samples"};
}

Outcome compressor_static_curve(Context&) {
  struct Setting { double thr, ratio, attack, release, drive; };
  const Setting settings[] = {{-20, 4, 10, 100, 0}, {-30, 10, 1, 10, -6}, {-10, 2, 50, 500, -3},
                              {-25, 1.5, 100, 1000, -12}, {-5, 8, 5, 20, 0}};
  double worst = 0;
  std::string first;
  for (const auto& s : settings) {
    const double amp = std::pow(10.0, s.drive / 20.0);
    const auto n = static_cast<std::size_t>(std::ceil(10 * s.attack * 44.1)) + 1;
    const AudioClip x{std::vector<float>(n, static_cast<float>(amp)), 44100};
    const auto y = fx::compress(x, s.thr, s.ratio, s.attack, s.release);
    const double measured = 20 * std::log10(y.samples.back() / amp);
    const double expected = s.drive > s.thr ? (s.thr + (s.drive - s.thr) / s.ratio) - s.drive : 0.0;
    worst = std::max(worst, std::abs(measured - expected));
    if (first.empty()) first = "T-20/R4/0 dBFS gain " + fmt("%.3f", measured) + " dB (expect -15)";
  }
  return {worst <= kStaticCurveTolDb, "5 settings, worst deviation " + fmt("%.4f", worst) + " dB; " + first};
}

Outcome trainability(Context& ctx) {
  const auto& r = ctx.run("comp4c_baseline_seed1", ctx.comp_data(), model::ModelConfig{}, 1);
  const double ratio = r.init_train / r.final_train;
  return {ratio > kOverfitRatio && r.seconds < kOverfitSeconds,
          "train log-cosh " + fmt("%.3e", r.init_train) + " -> " + fmt("%.3e", r.final_train) + " (ratio " +
              fmt("%.0f", ratio) + "), " + std::to_string(kSteps) + " steps in " + fmt("%.0f", r.seconds) + " s"};
}

std::vector<double> seed_vals(Context& ctx, const std::string& variant, const model::ModelConfig& mc) {
  std::vector<double> v;
  for (auto s : kSeeds) v.push_back(ctx.run("comp4c_" + variant + "_seed" + std::to_string(s), ctx.comp_data(), mc, s).final_val);
  return v;
}

Outcome frozen_direction(Context& ctx) {
  model::ModelConfig frozen;
  frozen.freeze_transforms = true;
  const auto base = seed_vals(ctx, "baseline", model::ModelConfig{});
  const auto froz = seed_vals(ctx, "frozen", frozen);
  return {median(froz) >= median(base), "median val frozen " + fmt("%.3e", median(froz)) + " vs baseline " +
                                            fmt("%.3e", median(base)) + "; frozen " + join(froz) + " baseline " + join(base)};
}

Outcome skip_direction(Context& ctx) {
  model::ModelConfig noskip;
  noskip.final_skip = false;
  const auto base = seed_vals(ctx, "baseline", model::ModelConfig{});
  const auto ns = seed_vals(ctx, "noskip", noskip);
  return {median(ns) >= median(base), "median val no-skip " + fmt("%.3e", median(ns)) + " vs baseline " +
                                          fmt("%.3e", median(base)) + "; no-skip " + join(ns) + " baseline " + join(base)};
}

Outcome buffer_cycle(Context& ctx) {
  const auto trem = fx::EffectInstance::make(fx::EffectId::Tremolo, 44100);
  const double rate = 44100.0 / kTremoloPeriod;
  const std::vector<std::optional<double>> pinned{fx::normalize(trem.knobs()[0], rate), std::nullopt};
  // Same model for both buffer sizes; frame 256 is the largest that fits a 256-sample chunk.
  model::ModelConfig mc;
  mc.frame_size = 256;
  mc.hop = 128;
  std::vector<double> longv, shortv;
  for (auto s : kSeeds) {
    auto& long_data = ctx.dataset("tremolo_4096", data::CorpusKind::Mix, fx::EffectId::Tremolo, 4096, pinned);
    longv.push_back(ctx.run("tremolo_4096_seed" + std::to_string(s), long_data, mc, s).final_val);
    auto& short_data = ctx.dataset("tremolo_256", data::CorpusKind::Mix, fx::EffectId::Tremolo, 256, pinned);
    shortv.push_back(ctx.run("tremolo_256_seed" + std::to_string(s), short_data, mc, s).final_val);
  }
  const double ratio = median(shortv) / median(longv);
  return {median(longv) * kCycleRatio <= median(shortv),
          "median val chunk 4096 " + fmt("%.3e", median(longv)) + ", chunk 256 " + fmt("%.3e", median(shortv)) +
              " (short/long " + fmt("%.2f", ratio) + ", need >= 5); 4096 " + join(longv) + " 256 " + join(shortv)};
}

Outcome generalization(Context& ctx) {
  auto& tones = ctx.dataset("comp4c_tones_4096", data::CorpusKind::Tones, fx::EffectId::Comp4c, 4096);
  auto& mix = ctx.comp_data();
  bool all = true;
  bool cross_all = true;
  std::string detail;
  for (auto s : kSeeds) {
    const auto& tm = ctx.run("comp4c_tones_seed" + std::to_string(s), tones, model::ModelConfig{}, s);
    const auto& mm = ctx.run("comp4c_baseline_seed" + std::to_string(s), mix, model::ModelConfig{}, s);
    const double tt = train::dataset_loss(tm.params, tones.val, train::LossKind::LogcoshTime);
    const double tx = train::dataset_loss(tm.params, mix.val, train::LossKind::LogcoshTime);
    const double mm_ = train::dataset_loss(mm.params, mix.val, train::LossKind::LogcoshTime);
    const double mt = train::dataset_loss(mm.params, tones.val, train::LossKind::LogcoshTime);
    all = all && tt < tx && mm_ < mt;
    cross_all = cross_all && tt < mt && mm_ < tx;
    detail += " s" + std::to_string(s) + ": tone-model tones " + fmt("%.2e", tt) + " / mix " + fmt("%.2e", tx) +
              ", mix-model mix " + fmt("%.2e", mm_) + " / tones " + fmt("%.2e", mt) + ";";
  }
  detail += std::string(" matched model beats mismatched model on each eval set: ") + (cross_all ? "yes" : "no");
  return {all, "own domain < foreign domain, both models, every seed:" + detail};
}

Outcome loss_unit_values(Context&) {
  std::vector<std::string> bad;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
  const std::vector<double> z1000(1000, 0.0);
  {
    const double x = 1e-3;
    const std::vector<double> d(1000, x);
    const double oracle = x * x / 2 - std::pow(x, 4) / 12 + std::pow(x, 6) / 45 - 17 * std::pow(x, 8) / 2520;
    if (rel(train::loss_logcosh_time(d, z1000), oracle) > kLossRelTol) bad.push_back("logcosh(1e-3)");
  }
  {
    const std::vector<double> d(1000, 10.0);
    const double oracle = 10.0 + std::log1p(std::exp(-20.0)) - std::numbers::ln2;
    if (rel(train::loss_logcosh_time(d, z1000), oracle) > kLossRelTol) bad.push_back("logcosh(10)");
    if (train::loss_logcosh_time(d, d) != 0.0) bad.push_back("logcosh(p=t)");
  }
  {
    std::vector<double> t(1000), twice(1000);
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = i % 2 ? 1.0 : -1.0;
      twice[i] = 2 * t[i];
    }
    const double oracle = -10 * std::log10((1000 + 1e-12) / 1e-12);
    if (rel(train::loss_logsnr(t, t), oracle) > kLossRelTol || std::abs(oracle + 150) > 1e-9) bad.push_back("logsnr(-150)");
    if (std::abs(train::loss_logsnr(twice, t)) > 1e-12) bad.push_back("logsnr(0)");
    if (train::loss_logsnr(z1000, z1000) != 0.0) bad.push_back("logsnr(silent)");
  }
  {
    const double lr = 1e-3;
    if (train::onecycle_lr(0, 1000, lr) != lr / 25) bad.push_back("1cycle start");
    if (train::onecycle_lr(300, 1000, lr) != lr) bad.push_back("1cycle peak");
    if (train::onecycle_lr(1000, 1000, lr) != lr / (25 * 1e4)) bad.push_back("1cycle end");
    if (std::abs(train::onecycle_lr(150, 1000, lr) - (lr / 25 + lr) / 2) > 1e-18) bad.push_back("1cycle mid-ramp");
  }
  std::string detail = bad.empty() ? "log-cosh, log-SNR, 1cycle values match" : "mismatch:";
  for (const auto& b : bad) detail += " " + b;
  return {bad.empty(), detail};
}

int sh(const std::string& cmd) {
  const int status = std::system(("FX_LOG_LEVEL=quiet " + cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

Outcome determinism(Context& ctx) {
  const std::string cli = "'" FXPROF_CLI_PATH "'";
  const auto corpus = ctx.corpus(data::CorpusKind::Mix);
  std::vector<fs::path> dirs;
  for (const char* name : {"determinism_a", "determinism_b"}) {
    const auto d = ctx.work() / name;
    fs::remove_all(d);
    const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
    int rc = sh(cli + " gen-dataset --corpus " + q(corpus) +
                " --effect comp4c --n-chunks 24 --chunk-size 4096 --seed 5 --out " + q(d / "data"));
    rc |= sh(cli + " train --train " + q(d / "data" / "train.json") + " --val " + q(d / "data" / "val.json") +
             " --epochs 3 --seed 9 --no-wall-time --out " + q(d / "run"));
    rc |= sh(cli + " eval --checkpoint " + q(d / "run" / "checkpoint.json") + " --manifest " +
             q(d / "data" / "val.json") + " --export " + q(d / "export") + " --out " + q(d / "metrics.json"));
    if (rc != 0) return {false, "CLI pipeline failed in " + d.string()};
    dirs.push_back(d);
  }
  std::vector<std::string> compared, differ;
  for (const auto& entry : fs::recursive_directory_iterator(dirs[0])) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dirs[0]);
    compared.push_back(rel.string());
    if (file_bytes(entry.path()) != file_bytes(dirs[1] / rel)) differ.push_back(rel.string());
  }
  const bool has_all = std::count(compared.begin(), compared.end(), "run/checkpoint.bin") &&
                       std::count(compared.begin(), compared.end(), "run/train_log.csv") &&
                       std::count(compared.begin(), compared.end(), "data/train.json");
  const std::string sha = model::sha256_file(dirs[0] / "run" / "checkpoint.bin");
  std::string detail = std::to_string(compared.size()) + " files compared (manifests, checkpoint, CSV log, metrics, exports); ";
  detail += differ.empty() ? "all identical, checkpoint sha256 " + sha.substr(0, 16) + "..." : "differ: " + differ.front();
  return {has_all && differ.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fxprof acceptance run"};
  std::string only;
  std::string expect_fail;
  std::string work = (fs::temp_directory_path() / "fxprof_acceptance").string();
  app.add_option("--only", only, "Comma-separated criterion numbers");
  app.add_option("--expect-fail", expect_fail, "Comma-separated criteria known to fail");
  app.add_option("--work-dir", work, "Scratch directory for corpora and runs")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  log::set_level(log::Level::Quiet);

  const auto parse_ids = [](const std::string& list) {
    std::set<int> ids;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) ids.insert(std::stoi(item));
    return ids;
  };
  const std::set<int> selected = parse_ids(only);
  const std::set<int> expected = parse_ids(expect_fail);

  const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"DFT round-trip", dft_round_trip},
      {"identity configuration", identity_configuration},
      {"compressor static curve", compressor_static_curve},
      {"trainability (overfit)", trainability},
      {"frozen-transform direction", frozen_direction},
      {"final-skip direction", skip_direction},
      {"buffer must hold an LFO cycle", buffer_cycle},
      {"generalization asymmetry", generalization},
      {"loss unit values", loss_unit_values},
      {"determinism", determinism},
  };

  Context ctx(work);
  std::set<int> failed, ran;
  std::vector<std::string> summary;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    char line[160];
    std::snprintf(line, sizeof line, "%s  %2d  %-30s", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str());
    std::printf("%s %s [%.0f s]\n", line, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    summary.push_back(line);
    ran.insert(id);
    if (!o.pass) failed.insert(id);
  }
  std::printf("\nsummary\n");
  for (const auto& s : summary) std::printf("%s\n", s.c_str());
  std::set<int> expected_run;
  for (int id : expected) {
    if (ran.count(id)) expected_run.insert(id);
  }
  std::printf("%zu of %zu failed", failed.size(), ran.size());
  if (!expected_run.empty()) {
    std::printf(" (known failures:");
    for (int id : expected_run) std::printf(" %d", id);
    std::printf(")");
  }
  std::printf("\n");
  for (int id : failed) {
    if (!expected_run.count(id)) std::printf("unexpected failure: %d\n", id);
  }
  for (int id : expected_run) {
    if (!failed.count(id)) std::printf("listed as known failure but passed: %d\n", id);
  }
  return failed == expected_run ? 0 : 1;
}
