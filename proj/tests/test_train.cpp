#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "mmer/binary_io.hpp"
#include "mmer/cli.hpp"
#include "mmer/synth.hpp"
#include "mmer/train.hpp"
#include "support.hpp"

namespace mmer {
namespace {

using test::TempDir;
namespace fs = std::filesystem;

Manifest tiny_dataset(const TempDir& dir, Task task, std::size_t train_videos = 3, std::size_t val_videos = 1) {
  SynthSpec spec;
  spec.n_videos = train_videos;
  spec.n_val_videos = val_videos;
  spec.frames = 50;
  spec.visual_dim = 4;
  spec.audio_dim = 4;
  spec.task = task;
  spec.seed = 11;
  spec.missing_face_rate = 0.1;
  return Manifest::load(synth_dataset(spec, (dir.path() / "data").string()));
}

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.peak_lr = 1e-2;
  cfg.batch_size = 4;
  cfg.epochs = 2;
  cfg.window = 20;
  cfg.stride = 10;
  cfg.dropout = 0.1;
  cfg.seed = 3;
  return cfg;
}

TEST(TrainTest, SmallRunWritesCheckpointsAndLogs) {
  TempDir dir("train_small");
  const Task task(TaskKind::kVA);
  const auto manifest = tiny_dataset(dir, task);
  const TrainConfig cfg = tiny_train_config();
  const auto out = (dir.path() / "run").string();
  const auto result = train<float>(tiny_fusion_config(task), manifest, cfg, out);

  // 3 videos of 50 frames, w=20 s=10 -> 5 windows each -> 15 samples -> 4 batches per epoch
  ASSERT_EQ(result.record.steps.size(), 8u);
  EXPECT_EQ(result.record.steps.front().lr, 0.0);  // warmup starts at zero
  EXPECT_DOUBLE_EQ(result.record.steps[4].lr, cfg.peak_lr);
  for (const auto& s : result.record.steps) {
    EXPECT_FALSE(s.skipped);
    EXPECT_TRUE(std::isfinite(s.loss));
  }
  ASSERT_EQ(result.record.epochs.size(), 2u);
  EXPECT_EQ(result.record.epochs[0].split, "val");
  for (const char* name : {"checkpoint_best/params.tnsr", "checkpoint_best/model.cfg", "checkpoint_last/params.tnsr",
                           "steps.csv", "metrics.csv"}) {
    EXPECT_TRUE(fs::exists(fs::path(out) / name)) << name;
  }
  const auto reloaded = FusionModel<float>::load((fs::path(out) / "checkpoint_last").string());
  const auto a = reloaded.params().named();
  const auto b = result.model.params().named();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(std::equal(a[i].tensor.data().begin(), a[i].tensor.data().end(), b[i].tensor.data().begin())) << a[i].name;
  }
}

TEST(TrainTest, DoublePrecisionRunsAreBitReproducible) {
  TempDir dir("train_det");
  const Task task(TaskKind::kAU);
  const auto manifest = tiny_dataset(dir, task);
  TrainConfig cfg = tiny_train_config();
  cfg.precision = Precision::k64;
  const auto r1 = train<double>(tiny_fusion_config(task), manifest, cfg, (dir.path() / "a").string());
  const auto r2 = train<double>(tiny_fusion_config(task), manifest, cfg, (dir.path() / "b").string());
  ASSERT_EQ(r1.record.steps.size(), r2.record.steps.size());
  for (std::size_t i = 0; i < r1.record.steps.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(r1.record.steps[i].loss), std::bit_cast<std::uint64_t>(r2.record.steps[i].loss))
        << "step " << i;
  }
  EXPECT_EQ(binio::read_file((dir.path() / "a/checkpoint_last/params.tnsr").string()),
            binio::read_file((dir.path() / "b/checkpoint_last/params.tnsr").string()));

  cfg.seed = 4;
  const auto r3 = train<double>(tiny_fusion_config(task), manifest, cfg, "");
  EXPECT_NE(r3.record.steps.back().loss, r1.record.steps.back().loss);
}

TEST(TrainTest, ZeroEpochsKeepsInitialWeights) {
  TempDir dir("train_zero");
  const Task task(TaskKind::kEXPR);
  const auto manifest = tiny_dataset(dir, task);
  TrainConfig cfg = tiny_train_config();
  cfg.epochs = 0;
  const auto out = (dir.path() / "run").string();
  const auto result = train<float>(tiny_fusion_config(task), manifest, cfg, out);
  EXPECT_TRUE(result.record.steps.empty());
  const FusionModel<float> init(tiny_fusion_config(task), cfg.seed);
  const auto saved = FusionModel<float>::load((fs::path(out) / "checkpoint_last").string());
  const auto a = saved.params().named();
  const auto b = init.params().named();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(std::equal(a[i].tensor.data().begin(), a[i].tensor.data().end(), b[i].tensor.data().begin())) << a[i].name;
  }
}

TEST(TrainTest, MaxStepsCapsTheRun) {
  TempDir dir("train_cap");
  const Task task(TaskKind::kVA);
  const auto manifest = tiny_dataset(dir, task);
  TrainConfig cfg = tiny_train_config();
  cfg.epochs = 10;
  cfg.max_steps = 3;
  const auto result = train<float>(tiny_fusion_config(task), manifest, cfg, "");
  EXPECT_EQ(result.record.steps.size(), 3u);
  EXPECT_EQ(result.record.epochs.size(), 1u);
}

TEST(TrainTest, EmptyTrainSplitAndOversizedWindowAreErrors) {
  TempDir dir("train_empty");
  const Task task(TaskKind::kVA);
  auto manifest = tiny_dataset(dir, task);
  for (auto& e : manifest.entries) e.split = "val";
  EXPECT_THROW(train<float>(tiny_fusion_config(task), manifest, tiny_train_config(), ""), TrainingError);

  TrainConfig cfg = tiny_train_config();
  cfg.window = 5000;
  cfg.stride = 100;
  EXPECT_THROW(train<float>(tiny_fusion_config(task), tiny_dataset(dir, task), cfg, ""), ConfigError);
}

TEST(TrainConfigTest, KeyValueParsing) {
  const auto kv = KeyValues::parse("lr = 0.001\nbatch_size = 8\ngrad_clip_norm = 0\nprecision = 64\nseed = 9\n");
  const auto cfg = TrainConfig::from_kv(kv);
  EXPECT_DOUBLE_EQ(cfg.peak_lr, 1e-3);
  EXPECT_EQ(cfg.batch_size, 8u);
  EXPECT_FALSE(cfg.grad_clip_norm.has_value());
  EXPECT_EQ(cfg.precision, Precision::k64);
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.window, 300u);  // untouched defaults
  EXPECT_DOUBLE_EQ(cfg.weight_decay, 1e-5);

  EXPECT_THROW(TrainConfig::from_kv(KeyValues::parse("learning_rate = 1\n")), ConfigError);
  EXPECT_THROW(TrainConfig::from_kv(KeyValues::parse("precision = 16\n")), ConfigError);
  TrainConfig bad;
  bad.stride = 400;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.dropout = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

LabelTrack va_track(const std::string& id, std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  LabelTrack l{id, Task(TaskKind::kVA), n, {}, {}, {}};
  for (std::size_t i = 0; i < 2 * n; ++i) l.va.push_back(u(rng));
  l.va[0] = l.va[1] = kVaSentinel;
  return l;
}

FramePredictions copy_va(const LabelTrack& l) {
  FramePredictions p{l.video_id, l.task, l.n_frames, {l.va.begin(), l.va.end()}, {}, {}, {}};
  // Sentinel rows are masked, so their predictions do not matter.
  p.va[0] = p.va[1] = 0.9;
  return p;
}

TEST(ScoreTest, OraclePredictionsScoreOne) {
  std::mt19937_64 rng(5);
  const std::vector<LabelTrack> va{va_track("a", 30, rng), va_track("b", 20, rng)};
  const auto r = score_predictions(va, {copy_va(va[0]), copy_va(va[1])});
  EXPECT_NEAR(r.get("ccc_mean"), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(selection_metric(r), r.get("ccc_mean"));

  LabelTrack expr{"e", Task(TaskKind::kEXPR), 17, {}, {}, {}};
  for (int i = 0; i < 17; ++i) expr.expr.push_back(i % 8);
  expr.expr[16] = kLabelSentinel;
  FramePredictions pe{"e", expr.task, 17, {}, expr.expr, {}, {}};
  pe.expr[16] = 3;
  EXPECT_DOUBLE_EQ(score_predictions({expr}, {pe}).get("f1_macro"), 1.0);

  LabelTrack au{"u", Task(TaskKind::kAU), 4, {}, {}, {}};
  for (int f = 0; f < 4; ++f)
    for (int u = 0; u < 12; ++u) au.au.push_back((f + u) % 2);
  FramePredictions pu{"u", au.task, 4, {}, {}, {}, {}};
  for (int y : au.au) pu.au_prob.push_back(y ? 0.9 : 0.1);
  const auto ra = score_predictions({au}, {pu});
  EXPECT_DOUBLE_EQ(ra.get("f1_macro"), 1.0);
  EXPECT_DOUBLE_EQ(ra.get("f1_au12"), 1.0);
}

TEST(ScoreTest, ConstantPredictorScoresZeroCcc) {
  std::mt19937_64 rng(6);
  const std::vector<LabelTrack> va{va_track("a", 40, rng)};
  FramePredictions p = copy_va(va[0]);
  std::fill(p.va.begin(), p.va.end(), 0.2);
  EXPECT_NEAR(score_predictions(va, {p}).get("ccc_mean"), 0.0, 1e-15);
}

TEST(ScoreTest, VideoOrderDoesNotMatter) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::vector<LabelTrack> labels;
  std::vector<FramePredictions> preds;
  for (const char* id : {"c", "a", "d", "b"}) {
    labels.push_back(va_track(id, 25, rng));
    preds.push_back(copy_va(labels.back()));
    for (auto& v : preds.back().va) v += noise(rng);
  }
  const double base = score_predictions(labels, preds).get("ccc_mean");
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(labels.begin(), labels.end(), rng);
    std::shuffle(preds.begin(), preds.end(), rng);
    EXPECT_EQ(score_predictions(labels, preds).get("ccc_mean"), base);
  }
  preds.pop_back();
  EXPECT_THROW(score_predictions(labels, preds), std::invalid_argument);
}

TEST(DecodeTest, SoftmaxSigmoidAndArgmax) {
  const std::vector<double> logits{0, 0, 0, 0, 0, 0, 0, std::log(2.0)};
  const auto e = decode_outputs("x", Task(TaskKind::kEXPR), logits, 1);
  EXPECT_EQ(e.expr[0], 7);
  EXPECT_NEAR(e.expr_prob[7], 2.0 / 9.0, 1e-15);
  const std::vector<double> au(12, 0.0);
  EXPECT_EQ(decode_outputs("x", Task(TaskKind::kAU), au, 1).au_prob, std::vector<double>(12, 0.5));
  EXPECT_THROW(decode_outputs("x", Task(TaskKind::kVA), au, 1), std::invalid_argument);
}

TEST(PredictionsCsvTest, RoundTripPerTask) {
  TempDir dir("preds");
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (TaskKind kind : {TaskKind::kVA, TaskKind::kEXPR, TaskKind::kAU}) {
    const Task task(kind);
    std::vector<FramePredictions> preds;
    for (const char* id : {"v1", "v0"}) {
      std::vector<double> raw(6 * task.out_dim());
      for (auto& x : raw) x = kind == TaskKind::kVA ? std::tanh(u(rng)) : u(rng);
      preds.push_back(decode_outputs(id, task, raw, 6));
    }
    const auto path = dir.file(task.name() + ".csv");
    write_predictions_csv(path, preds);
    const auto back = read_predictions_csv(path, task);
    ASSERT_EQ(back.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& p = preds[i];
      const auto it = std::find_if(back.begin(), back.end(), [&](const auto& b) { return b.video_id == p.video_id; });
      ASSERT_NE(it, back.end());
      EXPECT_EQ(it->n_frames, 6u);
      EXPECT_EQ(it->va, p.va);
      EXPECT_EQ(it->expr, p.expr);
      EXPECT_EQ(it->expr_prob, p.expr_prob);
      EXPECT_EQ(it->au_prob, p.au_prob);
    }
    EXPECT_THROW(read_predictions_csv(path, Task(kind == TaskKind::kVA ? TaskKind::kAU : TaskKind::kVA)),
                 std::exception);
  }
}

TEST(EvaluateTest, CheckpointTaskMismatchIsRejected) {
  TempDir dir("eval_mismatch");
  const Task task(TaskKind::kVA);
  const auto manifest = tiny_dataset(dir, task);
  TrainConfig cfg = tiny_train_config();
  cfg.epochs = 0;
  const auto out = (dir.path() / "run").string();
  train<float>(tiny_fusion_config(task), manifest, cfg, out);
  const auto ckpt = (fs::path(out) / "checkpoint_last").string();
  const auto report = evaluate_checkpoint<float>(ckpt, manifest, "val", task, 20, 10);
  EXPECT_GE(report.get("ccc_mean"), -1.0);
  EXPECT_LE(report.get("ccc_mean"), 1.0);
  EXPECT_THROW(evaluate_checkpoint<float>(ckpt, manifest, "val", Task(TaskKind::kEXPR), 20, 10), ConfigError);
}

}  // namespace
}  // namespace mmer
