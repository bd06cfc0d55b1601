#include "mmer/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>

#include "mmer/losses.hpp"
#include "mmer/synth.hpp"
#include "mmer/train.hpp"

namespace mmer {

namespace fs = std::filesystem;

FusionConfig tiny_fusion_config(Task task) {
  FusionConfig cfg;
  cfg.task = task;
  cfg.visual_dim = 4;
  cfg.audio_dim = 4;
  cfg.visual_tcn.channels = 4;
  cfg.visual_tcn.kernel_size = 2;
  cfg.visual_tcn.dilations = {1, 2};
  cfg.audio_tcn = cfg.visual_tcn;
  cfg.encoder.d_model = 8;
  cfg.encoder.n_heads = 2;
  cfg.encoder.n_layers = 1;
  cfg.encoder.ffn_dim = 8;
  cfg.mlp_hidden = 6;
  cfg.visual_tcn.activation = cfg.audio_tcn.activation = cfg.encoder.activation = Activation::kGelu;
  cfg.set_dropout(0.0);
  cfg.validate();
  return cfg;
}

GradientReport gradcheck_fusion(Task task, std::uint64_t seed, GradCheckOptions options,
                                const FusionConfig* cfg_override) {
  constexpr std::size_t kSteps = 5;
  FusionModel<double> model(cfg_override ? *cfg_override : tiny_fusion_config(task), seed);
  const FusionConfig& cfg = model.config();
  Rng rng(seed + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(kSteps * cfg.visual_dim), a(kSteps * cfg.audio_dim);
  for (auto& x : v) x = normal(rng);
  for (auto& x : a) x = normal(rng);
  const auto visual = Tensor<double>::from({kSteps, cfg.visual_dim}, v);
  const auto audio = Tensor<double>::from({kSteps, cfg.audio_dim}, a);
  const ValidityMask mask{true, true, false, true, true};

  std::vector<double> va;
  std::vector<int> expr, au;
  std::uniform_int_distribution<int> cls(0, kExprClasses - 1), bit(0, 1);
  std::uniform_real_distribution<double> unit(-0.9, 0.9);
  for (std::size_t t = 0; t < kSteps; ++t) {
    va.push_back(unit(rng));
    va.push_back(unit(rng));
    expr.push_back(cls(rng));
    for (std::size_t u = 0; u < kActionUnits; ++u) au.push_back(bit(rng));
  }
  const auto va_gt = Tensor<double>::from({kSteps, 2}, va);

  const auto loss_fn = [&]() {
    const auto pred = model.forward(visual, audio, ForwardContext{Mode::kEval, nullptr});
    switch (cfg.task.kind()) {
      case TaskKind::kVA: return va_loss(pred, va_gt, mask);
      case TaskKind::kEXPR: return expr_loss(pred, std::span<const int>(expr), mask);
      case TaskKind::kAU: break;
    }
    return au_loss(pred, std::span<const int>(au), mask);
  };
  return finite_diff_check(loss_fn, model.params().named(), options);
}

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

Precision parse_precision(int bits) {
  if (bits == 32) return Precision::k32;
  if (bits == 64) return Precision::k64;
  throw UsageError("--precision must be 32 or 64");
}

// Feature widths come from the data; a config that names other widths is an error.
void bind_feature_dims(FusionConfig& cfg, const KeyValues& kv, const Manifest& manifest) {
  if (manifest.entries.empty()) throw std::invalid_argument("manifest lists no videos");
  const ManifestEntry& first = manifest.entries.front();
  const FeatureSequence visual = load_feature_file(first.visual_path);
  const FeatureSequence audio = load_feature_file(first.audio_path);
  if (kv.contains("visual_dim") && cfg.visual_dim != visual.dim) {
    throw ConfigError("config visual_dim " + std::to_string(cfg.visual_dim) + " but features have " +
                      std::to_string(visual.dim));
  }
  if (kv.contains("audio_dim") && cfg.audio_dim != audio.dim) {
    throw ConfigError("config audio_dim " + std::to_string(cfg.audio_dim) + " but features have " +
                      std::to_string(audio.dim));
  }
  cfg.visual_dim = visual.dim;
  cfg.audio_dim = audio.dim;
}

template <typename T>
std::vector<FramePredictions> predict_all(const std::string& checkpoint, const Manifest& manifest,
                                          const std::string& split, std::size_t window, std::size_t stride) {
  const FusionModel<T> model = FusionModel<T>::load(checkpoint);
  const Task task = model.config().task;
  std::vector<FramePredictions> preds;
  for (const auto& entry : manifest.entries) {
    if (!split.empty() && entry.split != split) continue;
    const VideoData video = load_video(entry, task);
    const Tensor<T> out = predict_video(model, video, window, stride);
    const std::vector<double> raw(out.data().begin(), out.data().end());
    preds.push_back(decode_outputs(video.video_id, task, raw, video.n_frames()));
  }
  return preds;
}

struct Options {
  std::string manifest, task, config, out, checkpoint, predictions, split;
  std::uint64_t seed = 0;
  std::optional<std::size_t> epochs;
  std::size_t window = 300;
  std::size_t stride = 200;
  int precision = 32;
  std::optional<std::size_t> max_steps;
  std::optional<double> lr;
  bool quiet = false;
  // synth
  SynthSpec synth;
  std::string synth_snr;
};

int run_synth(const Options& o, std::ostream& out) {
  SynthSpec spec = o.synth;
  spec.task = Task::parse(o.task.empty() ? "va" : o.task);
  spec.seed = o.seed;
  if (!o.synth_snr.empty()) spec.snr = o.synth_snr == "inf" ? std::numeric_limits<double>::infinity() : std::stod(o.synth_snr);
  const std::string manifest = synth_dataset(spec, o.out);
  out << "wrote " << manifest << '\n';
  return 0;
}

int run_train(const Options& o, std::ostream& out) {
  const Manifest manifest = Manifest::load(o.manifest);
  KeyValues kv;
  if (!o.config.empty()) kv = KeyValues::load(o.config);
  const KeyValues model_kv = kv.without_prefix("train.");
  FusionConfig model_cfg = FusionConfig::from_kv(model_kv);
  if (!o.task.empty()) {
    const Task task = Task::parse(o.task);
    if (model_kv.contains("task") && !(task == model_cfg.task)) throw ConfigError("--task disagrees with config task");
    model_cfg.task = task;
  } else if (!model_kv.contains("task")) {
    throw UsageError("train needs --task (or task= in --config)");
  }
  bind_feature_dims(model_cfg, model_kv, manifest);

  if (!o.epochs && !kv.contains("train.epochs")) throw UsageError("train needs --epochs (or train.epochs= in --config)");

  TrainConfig base;
  base.window = o.window;
  base.stride = o.stride;
  base.seed = o.seed;
  base.precision = parse_precision(o.precision);
  TrainConfig cfg = TrainConfig::from_kv(kv.with_prefix("train."), base);
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.max_steps) cfg.max_steps = *o.max_steps;
  if (o.lr) cfg.peak_lr = *o.lr;
  cfg.log_progress = !o.quiet;
  cfg.validate();

  RunRecord record;
  if (cfg.precision == Precision::k64) {
    record = train<double>(model_cfg, manifest, cfg, o.out).record;
  } else {
    record = train<float>(model_cfg, manifest, cfg, o.out).record;
  }
  out << "steps: " << record.steps.size() << " (skipped " << record.skipped_steps << ")\n";
  if (!record.epochs.empty()) out << record.epochs.back().metrics.to_text();
  out << "best checkpoint: " << record.best_checkpoint << '\n';
  out << "last checkpoint: " << record.last_checkpoint << '\n';
  return 0;
}

int run_eval(const Options& o, std::ostream& out) {
  const Manifest manifest = Manifest::load(o.manifest);
  const std::string split = o.split.empty() ? "val" : o.split;
  std::optional<Task> task;
  if (!o.task.empty()) task = Task::parse(o.task);
  MetricReport report;
  if (!o.predictions.empty()) {
    if (!task) throw UsageError("eval --predictions requires --task");
    std::vector<LabelTrack> labels;
    for (const auto& v : load_split(manifest, split, *task)) labels.push_back(v.labels);
    if (labels.empty()) throw std::invalid_argument("manifest has no '" + split + "' videos");
    std::vector<FramePredictions> preds = read_predictions_csv(o.predictions, *task);
    report = score_predictions(labels, preds);
  } else {
    if (o.checkpoint.empty()) throw UsageError("eval needs --checkpoint or --predictions");
    report = parse_precision(o.precision) == Precision::k64
                 ? evaluate_checkpoint<double>(o.checkpoint, manifest, split, task, o.window, o.stride)
                 : evaluate_checkpoint<float>(o.checkpoint, manifest, split, task, o.window, o.stride);
  }
  out << report.to_text();
  return 0;
}

int run_predict(const Options& o, std::ostream& out) {
  const Manifest manifest = Manifest::load(o.manifest);
  const auto preds = parse_precision(o.precision) == Precision::k64
                         ? predict_all<double>(o.checkpoint, manifest, o.split, o.window, o.stride)
                         : predict_all<float>(o.checkpoint, manifest, o.split, o.window, o.stride);
  if (preds.empty()) throw std::invalid_argument("no videos selected");
  if (!o.task.empty() && !(Task::parse(o.task) == preds.front().task)) {
    throw ConfigError("checkpoint predicts " + preds.front().task.name() + ", not " + o.task);
  }
  if (const auto parent = fs::path(o.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_predictions_csv(o.out, preds);
  std::size_t rows = 0;
  for (const auto& p : preds) rows += p.n_frames;
  out << "wrote " << rows << " rows to " << o.out << '\n';
  return 0;
}

int run_gradcheck(const Options& o, std::ostream& out) {
  constexpr double kTolerance = 1e-4;
  const std::vector<Task> tasks = o.task.empty()
                                      ? std::vector<Task>{Task(TaskKind::kVA), Task(TaskKind::kEXPR), Task(TaskKind::kAU)}
                                      : std::vector<Task>{Task::parse(o.task)};
  double worst = 0.0;
  for (const Task task : tasks) {
    const GradientReport report = gradcheck_fusion(task, o.seed, GradCheckOptions{1e-4, 1e-5});
    out << "task " << task.name() << ": " << report.params.size() << " tensors, max abs error " << std::scientific
        << std::setprecision(3) << report.max_abs_error << ", max relative error " << report.max_rel_error << " ("
        << std::fixed << std::setprecision(2) << report.elapsed.count() << " s)\n";
    worst = std::max(worst, report.max_rel_error);
  }
  out << "max relative error " << std::scientific << std::setprecision(3) << worst
      << (worst < kTolerance ? " < " : " >= ") << kTolerance << '\n';
  return worst < kTolerance ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audio-visual affect recognition: synthetic data, training, evaluation", "mmer"};
  app.require_subcommand(1, 1);
  Options o;

  auto* synth = app.add_subcommand("synth", "write a planted-signal dataset");
  synth->add_option("--out", o.out, "output directory")->required();
  synth->add_option("--task", o.task, "va | expr | au")->check(CLI::IsMember({"va", "expr", "au"}));
  synth->add_option("--seed", o.seed)->capture_default_str();
  synth->add_option("--videos", o.synth.n_videos, "training videos")->capture_default_str();
  synth->add_option("--val-videos", o.synth.n_val_videos, "validation videos")->capture_default_str();
  synth->add_option("--frames", o.synth.frames)->capture_default_str();
  synth->add_option("--visual-dim", o.synth.visual_dim)->capture_default_str();
  synth->add_option("--audio-dim", o.synth.audio_dim)->capture_default_str();
  synth->add_option("--snr", o.synth_snr, "signal-to-noise variance ratio, or inf");
  synth->add_option("--missing-face-rate", o.synth.missing_face_rate)->capture_default_str();
  synth->add_option("--audio-rate", o.synth.audio_rate, "audio frames per visual frame")->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "train a fusion model");
  train_cmd->add_option("--manifest", o.manifest)->required();
  train_cmd->add_option("--out", o.out, "run directory (checkpoints, CSVs)")->required();
  train_cmd->add_option("--task", o.task)->check(CLI::IsMember({"va", "expr", "au"}));
  train_cmd->add_option("--config", o.config, "key=value file; train.* keys set the optimizer");
  train_cmd->add_option("--seed", o.seed)->capture_default_str();
  train_cmd->add_option("--epochs", o.epochs, "required unless train.epochs is in --config");
  train_cmd->add_option("--max-steps", o.max_steps);
  train_cmd->add_option("--lr", o.lr, "peak learning rate");
  train_cmd->add_option("--window", o.window)->capture_default_str();
  train_cmd->add_option("--stride", o.stride)->capture_default_str();
  train_cmd->add_option("--precision", o.precision)->capture_default_str()->check(CLI::IsMember({32, 64}));
  train_cmd->add_flag("--quiet", o.quiet, "no per-epoch progress on stderr");

  auto* eval = app.add_subcommand("eval", "score a checkpoint or a predictions CSV");
  eval->add_option("--manifest", o.manifest)->required();
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint directory");
  eval->add_option("--predictions", o.predictions, "predictions CSV to score instead of a checkpoint");
  eval->add_option("--task", o.task)->check(CLI::IsMember({"va", "expr", "au"}));
  eval->add_option("--split", o.split, "train | val (default val)");
  eval->add_option("--seed", o.seed)->capture_default_str();
  eval->add_option("--window", o.window)->capture_default_str();
  eval->add_option("--stride", o.stride)->capture_default_str();
  eval->add_option("--precision", o.precision)->capture_default_str()->check(CLI::IsMember({32, 64}));

  auto* predict = app.add_subcommand("predict", "write stitched per-frame predictions");
  predict->add_option("--manifest", o.manifest)->required();
  predict->add_option("--checkpoint", o.checkpoint)->required();
  predict->add_option("--out", o.out, "predictions CSV path")->required();
  predict->add_option("--task", o.task)->check(CLI::IsMember({"va", "expr", "au"}));
  predict->add_option("--split", o.split, "restrict to one split (default: every video)");
  predict->add_option("--seed", o.seed)->capture_default_str();
  predict->add_option("--window", o.window)->capture_default_str();
  predict->add_option("--stride", o.stride)->capture_default_str();
  predict->add_option("--precision", o.precision)->capture_default_str()->check(CLI::IsMember({32, 64}));

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of a tiny model");
  gradcheck->add_option("--task", o.task, "default: all three")->check(CLI::IsMember({"va", "expr", "au"}));
  gradcheck->add_option("--seed", o.seed)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(o, out);
    if (train_cmd->parsed()) return run_train(o, out);
    if (eval->parsed()) return run_eval(o, out);
    if (predict->parsed()) return run_predict(o, out);
    return run_gradcheck(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.get_subcommands().front()->help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mmer
