// End-to-end acceptance checks. One PASS/FAIL line per criterion; the exit
// status is non-zero when any attainable criterion fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "mmer/binary_io.hpp"
#include "mmer/cli.hpp"
#include "mmer/encoder.hpp"
#include "mmer/gradcheck.hpp"
#include "mmer/layers.hpp"
#include "mmer/metrics.hpp"
#include "mmer/optim.hpp"
#include "mmer/segments.hpp"
#include "mmer/serialize.hpp"
#include "mmer/synth.hpp"
#include "mmer/tcn.hpp"
#include "mmer/train.hpp"

namespace fs = std::filesystem;
using namespace mmer;

namespace {

// ---- pinned tolerances and budgets ---------------------------------------

constexpr double kGradEps = 1e-4;
constexpr double kGradTol = 1e-4;
constexpr double kGradBudgetSeconds = 60.0;
constexpr double kOracleTol = 1e-12;
constexpr double kLogEightTol = 1e-9;
constexpr double kTrainTarget = 0.9;
constexpr double kHeldOutVaTarget = 0.7;
constexpr double kRunBudgetSeconds = 300.0;
constexpr std::size_t kVaSteps = 300;
constexpr std::size_t kClassifySteps = 500;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// Collects failed sub-checks of one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  bool ok() const { return failures_.empty(); }
  std::string failures() const {
    std::string s;
    for (const auto& f : failures_) s += (s.empty() ? "" : "; ") + f;
    return s;
  }
  std::vector<std::string> notes;

 private:
  std::vector<std::string> failures_;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome finish(const Check& c) {
  std::string detail;
  for (const auto& n : c.notes) detail += (detail.empty() ? "" : ", ") + n;
  if (!c.ok()) detail += (detail.empty() ? "" : " | ") + std::string("failed: ") + c.failures();
  return {c.ok(), detail};
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    path_ = fs::temp_directory_path() / ("mmer_accept_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  std::string str(const std::string& child = "") const { return (child.empty() ? path_ : path_ / child).string(); }

 private:
  fs::path path_;
};

// ---- 2: gradients ----------------------------------------------------------

void randomize(ParamStore<double>& store, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.5);
  for (const auto& e : store.entries()) {
    Tensor<double> t = e.tensor;
    for (double& v : t.mutable_data()) v = normal(rng);
  }
}

Tensor<double> random_input(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = normal(rng);
  return Tensor<double>::from(std::move(shape), std::move(v), true);
}

Tensor<double> weighted_sum(const Tensor<double>& y) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal;
  std::vector<double> w(y.numel());
  for (auto& x : w) x = normal(rng);
  return sum_all(mul(y, Tensor<double>::from(y.shape(), std::move(w))));
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const GradCheckOptions options{kGradEps};
  const ForwardContext eval{Mode::kEval, nullptr};
  double worst = 0.0;
  std::string worst_name;
  Check c;
  const auto run = [&](const std::string& name, ParamStore<double>& store, const Tensor<double>& x,
                       const std::function<Tensor<double>()>& loss) {
    auto named = store.named();
    if (x.defined()) named.push_back({"input", x});
    const GradientReport r = finite_diff_check(loss, named, options);
    if (r.max_rel_error > worst) worst = r.max_rel_error, worst_name = name;
    c.expect(r.max_rel_error < kGradTol, name + " rel " + fmt(r.max_rel_error));
  };

  std::mt19937_64 rng(2024);
  {
    ParamStore<double> s;
    auto p = init_linear(s, "lin", 4, 3, rng);
    randomize(s, rng);
    const auto x = random_input({5, 4}, rng);
    run("linear", s, x, [&] { return weighted_sum(linear_forward(x, p)); });
  }
  {
    ParamStore<double> s;
    auto p = init_conv1d(s, "conv", 3, 2, 3, rng);
    randomize(s, rng);
    const auto x = random_input({8, 3}, rng);
    run("causal_conv", s, x, [&] { return weighted_sum(conv1d_causal(x, p, 2, 3)); });
  }
  {
    ParamStore<double> s;
    auto p = init_layer_norm(s, "norm", 5);
    randomize(s, rng);
    const auto x = random_input({4, 5}, rng);
    run("layer_norm", s, x, [&] { return weighted_sum(layer_norm(x, p)); });
  }
  {
    ParamStore<double> s;
    auto p = init_attention(s, "attn", 6, rng);
    randomize(s, rng);
    const auto x = random_input({4, 6}, rng);
    run("attention", s, x, [&] { return weighted_sum(multi_head_self_attention(x, p, 3)); });
  }
  {
    ParamStore<double> s;
    const auto x = random_input({6, 3}, rng);
    run("dropout", s, x, [&] {
      Rng mask_rng(5);
      return weighted_sum(dropout(x, 0.4, ForwardContext{Mode::kTrain, &mask_rng}));
    });
  }
  {
    ParamStore<double> s;
    TcnConfig cfg;
    cfg.in_dim = 3;
    cfg.channels = 4;
    cfg.kernel_size = 2;
    cfg.dilations = {1, 2};
    cfg.dropout = 0.0;
    cfg.activation = Activation::kGelu;
    Rng init(1);
    auto p = init_tcn(s, "tcn", cfg, init);
    randomize(s, rng);
    const auto x = random_input({6, 3}, rng);
    run("tcn", s, x, [&] { return weighted_sum(tcn_forward(x, cfg, p, eval)); });
  }
  {
    ParamStore<double> s;
    EncoderConfig cfg;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.n_layers = 1;
    cfg.ffn_dim = 8;
    cfg.dropout = 0.0;
    cfg.activation = Activation::kGelu;
    Rng init(2);
    auto p = init_encoder(s, "enc", cfg, init);
    randomize(s, rng);
    const auto x = random_input({4, 8}, rng);
    run("encoder", s, x, [&] { return weighted_sum(encoder_forward(x, p, cfg, eval)); });
  }
  for (TaskKind kind : {TaskKind::kVA, TaskKind::kEXPR, TaskKind::kAU}) {
    const Task task(kind);
    const GradientReport r = gradcheck_fusion(task, 7, options);
    if (r.max_rel_error > worst) worst = r.max_rel_error, worst_name = "fusion_" + task.name();
    c.expect(r.max_rel_error < kGradTol, "fusion_" + task.name() + " rel " + fmt(r.max_rel_error));
  }
  const double elapsed = seconds_since(t0);
  c.expect(elapsed < kGradBudgetSeconds, "runtime " + fmt(elapsed, 3) + " s");
  c.notes.push_back("max rel error " + fmt(worst, 3) + " (" + worst_name + ") < " + fmt(kGradTol));
  c.notes.push_back(fmt(elapsed, 3) + " s < " + fmt(kGradBudgetSeconds) + " s");
  return finish(c);
}

// ---- 3: losses and metrics -------------------------------------------------

double f1_from_confusion(const std::vector<std::vector<long>>& m, std::size_t k) {
  long tp = m[k][k], row = 0, col = 0;
  for (std::size_t j = 0; j < m.size(); ++j) row += m[k][j], col += m[j][k];
  return row + col == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(row + col);
}

Outcome loss_metric_suite() {
  Check c;
  const std::vector<double> x{0.3, -1.2, 2.5, 0.0, 4.1};
  c.expect(std::abs(ccc(x, x) - 1.0) <= kOracleTol, "ccc(x,x)");
  const double neg = ccc(std::vector<double>{1, 2, 3}, std::vector<double>{-1, -2, -3});
  c.expect(std::abs(neg + 1.0 / 13.0) <= kOracleTol, "ccc(123,-1-2-3) = " + fmt(neg, 17));

  const ValidityMask one{true};
  const double ce = expr_loss(Tensor<double>::zeros({1, 8}), std::vector<int>{3}, one).item();
  c.expect(std::abs(ce - std::log(8.0)) <= kLogEightTol, "uniform expr_loss");
  const double bce = au_loss(Tensor<double>::zeros({1, 1}), std::vector<int>{1}, one).item();
  c.expect(std::abs(bce - std::log(2.0)) <= kOracleTol, "au_loss(0,1)");
  for (double logit : {100.0, -100.0}) {
    for (int y : {0, 1}) {
      const auto t = Tensor<double>::from({1, 1}, {logit}, true);
      const auto l = au_loss(t, std::vector<int>{y}, one);
      l.backward();
      c.expect(std::isfinite(l.item()) && std::isfinite(t.grad()[0]), "au_loss finite at " + fmt(logit));
    }
  }

  std::mt19937_64 rng(13);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t classes = 2 + trial % 7, n = 1 + rng() % 30;
    std::uniform_int_distribution<int> cls(0, static_cast<int>(classes) - 1);
    std::vector<int> p(n), g(n);
    ValidityMask mask(n);
    std::vector<std::vector<long>> m(classes, std::vector<long>(classes, 0));
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = cls(rng), g[i] = cls(rng), mask[i] = rng() % 5 != 0;
      if (mask[i]) ++m[g[i]][p[i]];
    }
    double oracle = 0.0;
    for (std::size_t k = 0; k < classes; ++k) oracle += f1_from_confusion(m, k);
    oracle /= static_cast<double>(classes);
    if (macro_f1(p, g, classes, mask).macro != oracle) ++mismatches;

    const std::size_t units = 1 + trial % 12;
    std::vector<double> probs(n * units);
    std::vector<int> gt(n * units);
    double ml_oracle = 0.0;
    for (auto& v : probs) v = static_cast<double>(rng() % 1000) / 999.0;
    for (auto& v : gt) v = static_cast<int>(rng() % 2);
    for (std::size_t u = 0; u < units; ++u) {
      std::vector<std::vector<long>> mu(2, std::vector<long>(2, 0));
      for (std::size_t r = 0; r < n; ++r) {
        if (mask[r]) ++mu[gt[r * units + u]][probs[r * units + u] >= 0.5 ? 1 : 0];
      }
      ml_oracle += f1_from_confusion(mu, 1);
    }
    ml_oracle /= static_cast<double>(units);
    if (multilabel_f1(probs, gt, units, mask, 0.5, ScoreKind::kProbabilities).macro != ml_oracle) ++mismatches;
  }
  c.expect(mismatches == 0, std::to_string(mismatches) + " F1 mismatches");
  c.notes.push_back("ccc(123,-1-2-3) = " + fmt(neg, 12) + ", 400 F1 cases exact");
  return finish(c);
}

// ---- 4: segmentation -------------------------------------------------------

Outcome segmentation_suite() {
  Check c;
  std::mt19937_64 rng(17);
  std::size_t bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t w = 1 + rng() % 400, s = 1 + rng() % w, n = 1 + rng() % 2000;
    const auto segs = split_segments(n, w, s);
    std::vector<std::size_t> cover(n, 0);
    for (const auto& seg : segs) {
      for (std::size_t f = 0; f < seg.real_length(); ++f) ++cover[seg.start + f];
    }
    const std::size_t cap = (w + s - 1) / s;
    for (std::size_t f = 0; f < n; ++f) {
      if (cover[f] < 1 || cover[f] > cap) {
        ++bad;
        break;
      }
    }
  }
  c.expect(bad == 0, std::to_string(bad) + " cases with coverage outside [1, ceil(w/s)]");
  const std::size_t count = split_segments(700, 300, 200).size();
  c.expect(count == 700 / 200 + 1, "700/300/200 gave " + std::to_string(count) + " segments");

  std::normal_distribution<double> normal;
  std::vector<double> truth(700 * 2);
  for (auto& v : truth) v = normal(rng);
  std::vector<std::pair<SegmentSpec, Tensor<double>>> preds;
  for (const auto& seg : split_segments(700, 300, 200)) {
    std::vector<double> rows(seg.window * 2, 0.0);
    for (std::size_t f = 0; f < seg.real_length(); ++f) {
      rows[2 * f] = truth[2 * (seg.start + f)];
      rows[2 * f + 1] = truth[2 * (seg.start + f) + 1];
    }
    preds.emplace_back(seg, Tensor<double>::from({seg.window, 2}, rows));
  }
  const auto stitched = stitch_predictions(preds, 700);
  c.expect(std::equal(truth.begin(), truth.end(), stitched.data().begin()), "identity stitch not exact");
  c.notes.push_back("1000 random cases covered, 700/300/200 -> " + std::to_string(count));
  return finish(c);
}

// ---- 5: overfit --------------------------------------------------------------

FusionConfig overfit_model(Task task) {
  FusionConfig cfg;
  cfg.task = task;
  cfg.visual_dim = 64;
  cfg.audio_dim = 16;
  cfg.visual_tcn.channels = 32;
  cfg.audio_tcn.channels = 32;
  cfg.encoder.d_model = 64;
  cfg.encoder.n_heads = 4;
  cfg.encoder.n_layers = 2;
  cfg.encoder.ffn_dim = 128;
  cfg.mlp_hidden = 64;
  return cfg;
}

TrainConfig overfit_training(std::size_t steps) {
  TrainConfig cfg;
  cfg.peak_lr = 1e-3;
  cfg.dropout = 0.1;
  cfg.epochs = 200;
  cfg.max_steps = steps;
  cfg.window = 100;
  cfg.stride = 50;
  cfg.eval_every = 0;
  cfg.seed = 1;
  return cfg;
}

struct OverfitResult {
  double train_metric = 0.0;
  double val_metric = 0.0;
  double seconds = 0.0;
  std::size_t steps = 0;
};

OverfitResult overfit(Task task, std::size_t steps) {
  ScratchDir dir("overfit_" + task.name());
  SynthSpec spec;  // 8 x 600 frames, 64/16 dims, snr 100
  spec.task = task;
  spec.seed = 3;
  const Manifest manifest = Manifest::load(synth_dataset(spec, dir.str("data")));
  const TrainConfig cfg = overfit_training(steps);
  const auto t0 = Clock::now();
  const auto result = train<float>(overfit_model(task), manifest, cfg, "");
  OverfitResult r;
  r.seconds = seconds_since(t0);
  r.steps = result.record.steps.size();
  r.train_metric = selection_metric(evaluate(result.model, load_split(manifest, "train", task), cfg.window, cfg.stride));
  r.val_metric = selection_metric(evaluate(result.model, load_split(manifest, "val", task), cfg.window, cfg.stride));
  return r;
}

Outcome overfit_suite() {
  Check c;
  const auto va = overfit(Task(TaskKind::kVA), kVaSteps);
  c.expect(va.train_metric >= kTrainTarget, "va train ccc " + fmt(va.train_metric));
  c.expect(va.val_metric >= kHeldOutVaTarget, "va held-out ccc " + fmt(va.val_metric));
  c.expect(va.steps <= kVaSteps && va.seconds < kRunBudgetSeconds, "va run " + fmt(va.seconds, 3) + " s");
  c.notes.push_back("va ccc train " + fmt(va.train_metric) + " val " + fmt(va.val_metric) + " in " +
                    std::to_string(va.steps) + " steps, " + fmt(va.seconds, 3) + " s");
  for (TaskKind kind : {TaskKind::kEXPR, TaskKind::kAU}) {
    const Task task(kind);
    const auto r = overfit(task, kClassifySteps);
    c.expect(r.train_metric >= kTrainTarget, task.name() + " train f1 " + fmt(r.train_metric));
    c.expect(r.steps <= kClassifySteps && r.seconds < kRunBudgetSeconds, task.name() + " run " + fmt(r.seconds, 3) + " s");
    c.notes.push_back(task.name() + " f1 train " + fmt(r.train_metric) + " in " + std::to_string(r.steps) + " steps, " +
                      fmt(r.seconds, 3) + " s");
  }
  return finish(c);
}

// ---- 6: schedule, optimizer, determinism ---------------------------------

Outcome optimizer_suite() {
  Check c;
  constexpr double peak = 3e-5;
  c.expect(cosine_warmup_lr(0, 12, 120, peak) == 0.0, "lr(0)");
  c.expect(cosine_warmup_lr(12, 12, 120, peak) == peak, "lr(warmup)");
  c.expect(cosine_warmup_lr(120, 12, 120, peak) == 0.0, "lr(total)");

  ParamStore<double> store;
  store.add("w", Tensor<double>::from({3}, {1.5, -2.0, 0.25}, true), true);
  Tensor<double> w = store.get("w");
  w.mutable_grad();  // zero gradient
  OptimizerState<double> state;
  const AdamWConfig adamw{0.9, 0.999, 1e-8, 0.01};
  adamw_step(store, state, 0.1, adamw);
  const double factor = 1.0 - 0.1 * 0.01;
  c.expect(w.data()[0] == 1.5 * factor && w.data()[1] == -2.0 * factor && w.data()[2] == 0.25 * factor,
           "zero-grad decay");

  ScratchDir dir("determinism");
  SynthSpec spec;
  spec.n_videos = 3;
  spec.n_val_videos = 1;
  spec.frames = 60;
  spec.visual_dim = 4;
  spec.audio_dim = 4;
  spec.seed = 9;
  const Manifest manifest = Manifest::load(synth_dataset(spec, dir.str("data")));
  TrainConfig cfg;
  cfg.peak_lr = 1e-2;
  cfg.batch_size = 4;
  cfg.epochs = 3;
  cfg.window = 20;
  cfg.stride = 10;
  cfg.dropout = 0.2;
  cfg.seed = 4;
  cfg.precision = Precision::k64;
  const auto a = train<double>(tiny_fusion_config(spec.task), manifest, cfg, dir.str("a"));
  const auto b = train<double>(tiny_fusion_config(spec.task), manifest, cfg, dir.str("b"));
  bool same = a.record.steps.size() == b.record.steps.size();
  for (std::size_t i = 0; same && i < a.record.steps.size(); ++i) {
    same = std::bit_cast<std::uint64_t>(a.record.steps[i].loss) == std::bit_cast<std::uint64_t>(b.record.steps[i].loss);
  }
  same = same && binio::read_file(dir.str("a/checkpoint_last/params.tnsr")) ==
                     binio::read_file(dir.str("b/checkpoint_last/params.tnsr"));
  c.expect(same, "64-bit runs differ");
  c.notes.push_back("lr endpoints exact, decay factor exact, " + std::to_string(a.record.steps.size()) +
                    "-step runs bit-identical");
  return finish(c);
}

// ---- 7: formats ------------------------------------------------------------

// Every truncation and every single-byte change in the first `header` bytes
// must either decode or throw ParseError; anything else is a failure.
template <typename Decode>
std::size_t structured_failures(const std::vector<char>& bytes, std::size_t header, Decode decode) {
  std::size_t bad = 0;
  const auto attempt = [&](std::span<const char> data) {
    try {
      decode(data);
    } catch (const ParseError&) {
    } catch (...) {
      ++bad;
    }
  };
  for (std::size_t len = 0; len < bytes.size(); ++len) attempt(std::span<const char>(bytes.data(), len));
  for (std::size_t i = 0; i < std::min(header, bytes.size()); ++i) {
    for (int v : {0x00, 0x7F, 0x80, 0xFF}) {
      auto copy = bytes;
      copy[i] = static_cast<char>(v);
      attempt(copy);
    }
  }
  return bad;
}

Outcome format_suite() {
  Check c;
  std::mt19937_64 rng(23);
  std::normal_distribution<float> normal;
  FeatureSequence seq;
  seq.modality = Modality::kVisual;
  seq.n_frames = 21;
  seq.dim = 7;
  for (std::size_t i = 0; i < 21 * 7; ++i) seq.data.push_back(normal(rng));
  for (std::size_t i = 0; i < 21; ++i) seq.valid.push_back(i % 4 != 1);
  const auto bytes = encode_feature_sequence(seq);
  const auto back = decode_feature_sequence(bytes);
  c.expect(encode_feature_sequence(back) == bytes && back.valid == seq.valid, "feature round trip");

  ScratchDir dir("formats");
  FusionModel<float> model(tiny_fusion_config(Task(TaskKind::kAU)), 5);
  model.save(dir.str("a"));
  FusionModel<float>::load(dir.str("a")).save(dir.str("b"));
  const auto params = binio::read_file(dir.str("a/params.tnsr"));
  c.expect(params == binio::read_file(dir.str("b/params.tnsr")), "checkpoint params round trip");
  c.expect(binio::read_file(dir.str("a/model.cfg")) == binio::read_file(dir.str("b/model.cfg")),
           "checkpoint config round trip");

  const std::size_t fseq_bad = structured_failures(bytes, 20, [](auto d) { decode_feature_sequence(d); });
  const std::size_t tnsr_bad = structured_failures(params, 64, [](auto d) { decode_tensors<float>(d); });
  c.expect(fseq_bad == 0, std::to_string(fseq_bad) + " unstructured feature-file failures");
  c.expect(tnsr_bad == 0, std::to_string(tnsr_bad) + " unstructured checkpoint failures");
  c.notes.push_back("round trips bit-identical, every truncation and header byte corruption raised ParseError or decoded");
  return finish(c);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> only;
  app.add_option("--only", only, "run only these criteria (2-7)");
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {2, "gradient suite", gradient_suite},
      {3, "loss/metric oracles", loss_metric_suite},
      {4, "segmentation", segmentation_suite},
      {5, "overfit on synthetic data", overfit_suite},
      {6, "schedule/optimizer/determinism", optimizer_suite},
      {7, "formats", format_suite},
  };

  // Real-data benchmark scores need the original corpus and pretrained
  // feature extractors, neither of which ships here.
  std::cout << "FAIL 1 real-data benchmark scores: not reproducible here (no dataset or pretrained extractors); "
               "not counted in the exit status\n"
            << std::flush;
  int failed = 0;
  for (const auto& cr : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), cr.id) == only.end()) continue;
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << cr.id << ' ' << cr.name << ": " << o.detail << '\n' << std::flush;
  }
  return failed == 0 ? 0 : 1;
}
