#include "mmer/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "mmer/losses.hpp"

namespace mmer {

namespace fs = std::filesystem;

// ---- configuration --------------------------------------------------------

void TrainConfig::validate() const {
  if (!(peak_lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be non-negative");
  if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train: dropout must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train: betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train: adam_eps must be positive");
  if (grad_clip_norm && !(*grad_clip_norm > 0.0)) throw ConfigError("train: grad_clip_norm must be positive");
  if (window == 0 || stride == 0 || stride > window) throw ConfigError("train: need 1 <= stride <= window");
}

TrainConfig TrainConfig::from_kv(const KeyValues& kv, TrainConfig base) {
  kv.require_known({"lr", "weight_decay", "batch_size", "epochs", "dropout", "beta1", "beta2", "adam_eps",
                    "grad_clip_norm", "seed", "precision", "window", "stride", "warmup_epochs", "max_steps",
                    "eval_every"});
  TrainConfig cfg = base;
  kv.read("lr", cfg.peak_lr);
  kv.read("weight_decay", cfg.weight_decay);
  kv.read("batch_size", cfg.batch_size);
  kv.read("epochs", cfg.epochs);
  kv.read("dropout", cfg.dropout);
  kv.read("beta1", cfg.beta1);
  kv.read("beta2", cfg.beta2);
  kv.read("adam_eps", cfg.adam_eps);
  if (kv.contains("grad_clip_norm")) {
    double clip = 0.0;
    kv.read("grad_clip_norm", clip);
    cfg.grad_clip_norm = clip > 0.0 ? std::optional<double>(clip) : std::nullopt;
  }
  std::size_t seed = cfg.seed;
  kv.read("seed", seed);
  cfg.seed = seed;
  if (kv.contains("precision")) {
    std::size_t bits = 0;
    kv.read("precision", bits);
    if (bits != 32 && bits != 64) throw ConfigError("train: precision must be 32 or 64");
    cfg.precision = bits == 64 ? Precision::k64 : Precision::k32;
  }
  kv.read("window", cfg.window);
  kv.read("stride", cfg.stride);
  kv.read("warmup_epochs", cfg.warmup_epochs);
  kv.read("max_steps", cfg.max_steps);
  kv.read("eval_every", cfg.eval_every);
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::from_kv(const KeyValues& kv) { return from_kv(kv, TrainConfig{}); }

void RunRecord::save_csv(const std::string& dir) const {
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "steps.csv", std::ios::trunc);
    out << "step,lr,loss\n" << std::setprecision(10);
    for (const auto& s : steps) {
      out << s.step << ',' << s.lr << ',';
      if (s.skipped) {
        out << "nan";
      } else {
        out << s.loss;
      }
      out << '\n';
    }
  }
  std::ofstream out(fs::path(dir) / "metrics.csv", std::ios::trunc);
  out << "epoch,step,split";
  if (!epochs.empty()) {
    for (const auto& [k, v] : epochs.front().metrics.values) out << ',' << k;
  }
  out << '\n' << std::fixed << std::setprecision(6);
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.step << ',' << e.split;
    for (const auto& [k, v] : e.metrics.values) out << ',' << v;
    out << '\n';
  }
}

// ---- scoring --------------------------------------------------------------

FramePredictions decode_outputs(const std::string& video_id, Task task, std::span<const double> raw,
                                std::size_t n_frames) {
  const std::size_t width = task.out_dim();
  if (raw.size() != n_frames * width) throw std::invalid_argument("decode_outputs: output size mismatch");
  FramePredictions p;
  p.video_id = video_id;
  p.task = task;
  p.n_frames = n_frames;
  switch (task.kind()) {
    case TaskKind::kVA:
      p.va.assign(raw.begin(), raw.end());
      break;
    case TaskKind::kEXPR:
      for (std::size_t f = 0; f < n_frames; ++f) {
        const auto row = raw.subspan(f * width, width);
        const auto best = std::max_element(row.begin(), row.end());
        p.expr.push_back(static_cast<int>(best - row.begin()));
        double total = 0.0;
        for (double v : row) total += std::exp(v - *best);
        for (double v : row) p.expr_prob.push_back(std::exp(v - *best) / total);
      }
      break;
    case TaskKind::kAU:
      for (double v : raw) p.au_prob.push_back(1.0 / (1.0 + std::exp(-v)));
      break;
  }
  return p;
}

double selection_metric(const MetricReport& report) {
  for (const auto& [k, v] : report.values) {
    if (k == "ccc_mean" || k == "f1_macro") return v;
  }
  throw std::invalid_argument("selection_metric: report has no headline metric");
}

MetricReport score_predictions(const std::vector<LabelTrack>& labels, const std::vector<FramePredictions>& preds) {
  if (labels.empty()) throw std::invalid_argument("score_predictions: no videos");
  const Task task = labels.front().task;
  std::map<std::string, const FramePredictions*> by_id;
  for (const auto& p : preds) {
    if (!(p.task == task)) throw ConfigError("score_predictions: prediction task differs from label task");
    by_id[p.video_id] = &p;
  }
  std::vector<const LabelTrack*> ordered;
  for (const auto& l : labels) {
    if (!(l.task == task)) throw ConfigError("score_predictions: mixed label tasks");
    ordered.push_back(&l);
  }
  std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->video_id < b->video_id; });

  MetricReport report;
  report.task = task.name();
  std::vector<double> pv, pa, gv, ga;
  std::vector<int> pe, ge;
  std::vector<double> pau;
  std::vector<int> gau;
  for (const LabelTrack* l : ordered) {
    const auto it = by_id.find(l->video_id);
    if (it == by_id.end()) throw std::invalid_argument("score_predictions: no predictions for video '" + l->video_id + "'");
    const FramePredictions& p = *it->second;
    if (p.n_frames != l->n_frames) {
      throw std::invalid_argument("score_predictions: frame count mismatch for video '" + l->video_id + "'");
    }
    for (std::size_t f = 0; f < l->n_frames; ++f) {
      if (!l->frame_valid(f)) continue;
      switch (task.kind()) {
        case TaskKind::kVA:
          pv.push_back(p.va[2 * f]);
          pa.push_back(p.va[2 * f + 1]);
          gv.push_back(l->va[2 * f]);
          ga.push_back(l->va[2 * f + 1]);
          break;
        case TaskKind::kEXPR:
          pe.push_back(p.expr[f]);
          ge.push_back(l->expr[f]);
          break;
        case TaskKind::kAU:
          for (std::size_t u = 0; u < kActionUnits; ++u) {
            pau.push_back(p.au_prob[f * kActionUnits + u]);
            gau.push_back(l->au[f * kActionUnits + u]);
          }
          break;
      }
    }
  }
  switch (task.kind()) {
    case TaskKind::kVA: {
      if (gv.empty()) throw std::invalid_argument("score_predictions: no valid frames");
      const double cv = ccc(pv, gv);
      const double ca = ccc(pa, ga);
      report.add("ccc_valence", cv);
      report.add("ccc_arousal", ca);
      report.add("ccc_mean", 0.5 * (cv + ca));
      break;
    }
    case TaskKind::kEXPR: {
      const F1Report f1 = macro_f1(pe, ge, kExprClasses, ValidityMask(ge.size(), true));
      report.add("f1_macro", f1.macro);
      for (std::size_t c = 0; c < f1.per_class.size(); ++c) report.add("f1_class" + std::to_string(c), f1.per_class[c]);
      break;
    }
    case TaskKind::kAU: {
      const F1Report f1 = multilabel_f1(pau, gau, kActionUnits, ValidityMask(gau.size() / kActionUnits, true), 0.5,
                                        ScoreKind::kProbabilities);
      report.add("f1_macro", f1.macro);
      for (std::size_t u = 0; u < f1.per_class.size(); ++u) report.add("f1_au" + std::to_string(u + 1), f1.per_class[u]);
      break;
    }
  }
  return report;
}

// ---- inference ------------------------------------------------------------

namespace {

template <typename T>
Tensor<T> window_tensor(const FeatureSequence& seq, const SegmentSpec& seg) {
  const std::vector<float> window = extract_window(seq, seg);
  return Tensor<T>::from({seg.window, seq.dim}, std::vector<T>(window.begin(), window.end()));
}

}  // namespace

template <typename T>
Tensor<T> predict_video(const FusionModel<T>& model, const VideoData& video, std::size_t window, std::size_t stride) {
  NoGradGuard no_grad;
  std::vector<std::pair<SegmentSpec, Tensor<T>>> outputs;
  for (const auto& seg : split_segments(video.n_frames(), window, stride, video.video_id)) {
    const Tensor<T> visual = window_tensor<T>(video.visual, seg);
    const Tensor<T> audio = window_tensor<T>(video.audio, seg);
    outputs.emplace_back(seg, model.forward(visual, audio, ForwardContext{Mode::kEval, nullptr}));
  }
  return stitch_predictions(outputs, video.n_frames());
}

template <typename T>
MetricReport evaluate(const FusionModel<T>& model, const std::vector<VideoData>& videos, std::size_t window,
                      std::size_t stride) {
  std::vector<LabelTrack> labels;
  std::vector<FramePredictions> preds;
  const Task task = model.config().task;
  for (const auto& video : videos) {
    if (!(video.labels.task == task)) throw ConfigError("evaluate: labels are for task " + video.labels.task.name() +
                                                        ", model predicts " + task.name());
    const Tensor<T> out = predict_video(model, video, window, stride);
    const std::vector<double> raw(out.data().begin(), out.data().end());
    preds.push_back(decode_outputs(video.video_id, task, raw, video.n_frames()));
    labels.push_back(video.labels);
  }
  return score_predictions(labels, preds);
}

std::vector<VideoData> load_split(const Manifest& manifest, const std::string& split, Task task) {
  std::vector<VideoData> videos;
  for (const auto& entry : manifest.select(split)) videos.push_back(load_video(entry, task));
  return videos;
}

template <typename T>
MetricReport evaluate_checkpoint(const std::string& checkpoint_dir, const Manifest& manifest, const std::string& split,
                                 std::optional<Task> task, std::size_t window, std::size_t stride) {
  const FusionModel<T> model = FusionModel<T>::load(checkpoint_dir);
  if (task && !(*task == model.config().task)) {
    throw ConfigError("checkpoint was trained for task " + model.config().task.name() + ", not " + task->name());
  }
  const auto videos = load_split(manifest, split, model.config().task);
  if (videos.empty()) throw std::invalid_argument("manifest has no '" + split + "' videos");
  MetricReport report = evaluate(model, videos, window, stride);
  return report;
}

// ---- training -------------------------------------------------------------

namespace {

template <typename T>
struct Sample {
  Tensor<T> visual;
  Tensor<T> audio;
  ValidityMask mask;
  std::vector<T> va;     // (w x 2)
  std::vector<int> expr; // (w)
  std::vector<int> au;   // (w x 12)
};

template <typename T>
std::vector<Sample<T>> build_samples(const std::vector<VideoData>& videos, std::size_t window, std::size_t stride) {
  std::vector<Sample<T>> samples;
  for (const auto& video : videos) {
    ValidityMask frame_mask = video.labels.mask();
    for (std::size_t f = 0; f < frame_mask.size(); ++f) frame_mask[f] = frame_mask[f] && video.visual.valid[f];
    for (const auto& seg : split_segments(video.n_frames(), window, stride, video.video_id)) {
      Sample<T> s;
      s.visual = window_tensor<T>(video.visual, seg);
      s.audio = window_tensor<T>(video.audio, seg);
      s.mask = window_mask(seg, frame_mask);
      for (std::size_t f = 0; f < seg.window; ++f) {
        const std::size_t src = seg.start + std::min(f, seg.real_length() - 1);
        const LabelTrack& l = video.labels;
        switch (l.task.kind()) {
          case TaskKind::kVA:
            s.va.push_back(static_cast<T>(l.va[2 * src]));
            s.va.push_back(static_cast<T>(l.va[2 * src + 1]));
            break;
          case TaskKind::kEXPR: s.expr.push_back(l.expr[src]); break;
          case TaskKind::kAU:
            s.au.insert(s.au.end(), l.au.begin() + static_cast<std::ptrdiff_t>(src * kActionUnits),
                        l.au.begin() + static_cast<std::ptrdiff_t>((src + 1) * kActionUnits));
            break;
        }
      }
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

// Returns an undefined tensor when the batch has too few valid frames.
template <typename T>
Tensor<T> batch_loss(const FusionModel<T>& model, const std::vector<Sample<T>>& samples,
                     std::span<const std::size_t> batch, const ForwardContext& ctx) {
  std::vector<Tensor<T>> outputs;
  ValidityMask mask;
  std::vector<T> va;
  std::vector<int> expr, au;
  for (std::size_t idx : batch) {
    const Sample<T>& s = samples[idx];
    outputs.push_back(model.forward(s.visual, s.audio, ctx));
    mask.insert(mask.end(), s.mask.begin(), s.mask.end());
    va.insert(va.end(), s.va.begin(), s.va.end());
    expr.insert(expr.end(), s.expr.begin(), s.expr.end());
    au.insert(au.end(), s.au.begin(), s.au.end());
  }
  const std::size_t valid = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  const Tensor<T> pred = outputs.size() == 1 ? outputs.front() : concat(outputs, 0);
  switch (model.config().task.kind()) {
    case TaskKind::kVA: {
      if (valid < 2) return {};
      const Tensor<T> gt = Tensor<T>::from({mask.size(), 2}, std::move(va));
      return va_loss(pred, gt, mask);
    }
    case TaskKind::kEXPR:
      if (valid == 0) return {};
      return expr_loss(pred, std::span<const int>(expr), mask);
    case TaskKind::kAU:
      if (valid == 0) return {};
      return au_loss(pred, std::span<const int>(au), mask);
  }
  return {};
}

template <typename T>
bool grads_finite(const ParamStore<T>& params) {
  for (const auto& e : params.entries()) {
    for (T g : e.tensor.grad()) {
      if (!std::isfinite(g)) return false;
    }
  }
  return true;
}

}  // namespace

template <typename T>
TrainResult<T> train(FusionConfig model_cfg, const Manifest& manifest, const TrainConfig& cfg,
                     const std::string& out_dir) {
  cfg.validate();
  model_cfg.set_dropout(cfg.dropout);
  model_cfg.validate();
  if (cfg.window > model_cfg.encoder.max_len) {
    throw ConfigError("train: window " + std::to_string(cfg.window) + " exceeds encoder max_len " +
                      std::to_string(model_cfg.encoder.max_len));
  }
  const Task task = model_cfg.task;
  const std::vector<VideoData> train_videos = load_split(manifest, "train", task);
  if (train_videos.empty()) throw TrainingError("train: manifest has no training videos");
  std::vector<VideoData> val_videos = load_split(manifest, "val", task);
  const bool has_val = !val_videos.empty();
  const std::vector<VideoData>& selection_videos = has_val ? val_videos : train_videos;

  const std::vector<Sample<T>> samples = build_samples<T>(train_videos, cfg.window, cfg.stride);
  const std::size_t steps_per_epoch = (samples.size() + cfg.batch_size - 1) / cfg.batch_size;
  std::size_t total_steps = cfg.epochs * steps_per_epoch;
  if (cfg.max_steps > 0) total_steps = std::min(total_steps, cfg.max_steps);
  const std::size_t warmup = total_steps == 0 ? 0 : std::min(cfg.warmup_epochs * steps_per_epoch, total_steps - 1);

  TrainResult<T> result{FusionModel<T>(model_cfg, cfg.seed), {}};
  FusionModel<T>& model = result.model;
  RunRecord& record = result.record;
  Rng rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  OptimizerState<T> state;
  const AdamWConfig adamw = cfg.adamw();
  const std::string best_dir = out_dir.empty() ? "" : (fs::path(out_dir) / "checkpoint_best").string();
  const std::string last_dir = out_dir.empty() ? "" : (fs::path(out_dir) / "checkpoint_last").string();

  const auto run_validation = [&](std::size_t epoch, std::size_t step) {
    EpochRecord e;
    e.epoch = epoch;
    e.step = step;
    e.split = has_val ? "val" : "train";
    e.metrics = evaluate(model, selection_videos, cfg.window, cfg.stride);
    e.selection = selection_metric(e.metrics);
    if (cfg.log_progress) {
      std::cerr << "epoch " << epoch << " step " << step << " " << e.split << " selection " << std::fixed
                << std::setprecision(4) << e.selection << '\n';
    }
    if (e.selection > record.best_selection) {
      record.best_selection = e.selection;
      if (!best_dir.empty()) {
        model.save(best_dir);
        record.best_checkpoint = best_dir;
      }
    }
    record.epochs.push_back(std::move(e));
  };

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  std::size_t consecutive_skips = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs && step < total_steps; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < steps_per_epoch && step < total_steps; ++b) {
      const std::size_t begin = b * cfg.batch_size;
      const std::size_t end = std::min(begin + cfg.batch_size, order.size());
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      const double lr = cosine_warmup_lr(step, warmup, total_steps, cfg.peak_lr);
      StepRecord rec{step, lr, 0.0, false};

      model.params().zero_grad();
      const Tensor<T> loss = batch_loss(model, samples, batch, ForwardContext{Mode::kTrain, &rng});
      if (!loss.defined()) {
        rec.skipped = true;
      } else {
        rec.loss = static_cast<double>(loss.item());
        bool ok = std::isfinite(rec.loss);
        if (ok) {
          loss.backward();
          ok = grads_finite(model.params());
        }
        if (ok && cfg.grad_clip_norm) clip_grad_norm(model.params(), *cfg.grad_clip_norm);
        if (ok) ok = adamw_step(model.params(), state, lr, adamw);
        if (!ok) {
          rec.skipped = true;
          ++record.skipped_steps;
          if (cfg.log_progress) std::cerr << "step " << step << ": non-finite loss or gradient, step skipped\n";
          if (++consecutive_skips >= 3) {
            record.steps.push_back(rec);
            throw TrainingError("train: " + std::to_string(consecutive_skips) +
                                " consecutive non-finite steps ending at step " + std::to_string(step) +
                                "; lower the learning rate or inspect the input features");
          }
        } else {
          consecutive_skips = 0;
        }
      }
      record.steps.push_back(rec);
      ++step;
    }
    const bool last_epoch = epoch + 1 == cfg.epochs || step >= total_steps;
    if ((cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) || last_epoch) run_validation(epoch, step);
  }

  if (!out_dir.empty()) {
    model.save(last_dir);
    record.last_checkpoint = last_dir;
    if (record.best_checkpoint.empty()) {
      model.save(best_dir);
      record.best_checkpoint = best_dir;
    }
    record.save_csv(out_dir);
  }
  return result;
}

// ---- predictions CSV ------------------------------------------------------

namespace {

std::vector<std::string> prediction_header(Task task) {
  std::vector<std::string> h{"video_id", "frame"};
  switch (task.kind()) {
    case TaskKind::kVA:
      h.insert(h.end(), {"valence", "arousal"});
      break;
    case TaskKind::kEXPR:
      h.push_back("expr_class");
      for (std::size_t c = 0; c < kExprClasses; ++c) h.push_back("p" + std::to_string(c));
      break;
    case TaskKind::kAU:
      for (std::size_t u = 1; u <= kActionUnits; ++u) h.push_back("au" + std::to_string(u) + "_prob");
      for (std::size_t u = 1; u <= kActionUnits; ++u) h.push_back("au" + std::to_string(u));
      break;
  }
  return h;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    cells.push_back(cell);
  }
  return cells;
}

double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("predictions: bad number '" + s + "'", line_no);
  return v;
}

}  // namespace

void write_predictions_csv(const std::string& path, const std::vector<FramePredictions>& preds) {
  if (preds.empty()) throw std::invalid_argument("write_predictions_csv: nothing to write");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write predictions " + path);
  out.imbue(std::locale::classic());
  const Task task = preds.front().task;
  const auto header = prediction_header(task);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& p : preds) {
    for (std::size_t f = 0; f < p.n_frames; ++f) {
      out << p.video_id << ',' << f;
      switch (task.kind()) {
        case TaskKind::kVA: out << ',' << p.va[2 * f] << ',' << p.va[2 * f + 1]; break;
        case TaskKind::kEXPR:
          out << ',' << p.expr[f];
          for (std::size_t c = 0; c < kExprClasses; ++c) out << ',' << p.expr_prob[f * kExprClasses + c];
          break;
        case TaskKind::kAU:
          for (std::size_t u = 0; u < kActionUnits; ++u) out << ',' << p.au_prob[f * kActionUnits + u];
          for (std::size_t u = 0; u < kActionUnits; ++u) out << ',' << (p.au_prob[f * kActionUnits + u] >= 0.5 ? 1 : 0);
          break;
      }
      out << '\n';
    }
  }
}

std::vector<FramePredictions> read_predictions_csv(const std::string& path, Task task) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions " + path);
  const auto header = prediction_header(task);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || split_line(line) != header) {
    throw ParseError(path + ": header does not match the " + task.name() + " prediction layout", line_no);
  }
  std::vector<FramePredictions> preds;
  std::map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) throw ParseError(path + ": wrong column count", line_no);
    auto [it, inserted] = index.emplace(cells[0], preds.size());
    if (inserted) {
      FramePredictions p;
      p.video_id = cells[0];
      p.task = task;
      preds.push_back(std::move(p));
    }
    FramePredictions& p = preds[it->second];
    if (static_cast<std::size_t>(parse_double(cells[1], line_no)) != p.n_frames) {
      throw ParseError(path + ": frames of '" + p.video_id + "' must be consecutive from 0", line_no);
    }
    switch (task.kind()) {
      case TaskKind::kVA:
        p.va.push_back(parse_double(cells[2], line_no));
        p.va.push_back(parse_double(cells[3], line_no));
        break;
      case TaskKind::kEXPR:
        p.expr.push_back(static_cast<int>(parse_double(cells[2], line_no)));
        for (std::size_t c = 0; c < kExprClasses; ++c) p.expr_prob.push_back(parse_double(cells[3 + c], line_no));
        break;
      case TaskKind::kAU:
        for (std::size_t u = 0; u < kActionUnits; ++u) p.au_prob.push_back(parse_double(cells[2 + u], line_no));
        break;
    }
    ++p.n_frames;
  }
  return preds;
}

#define MMER_INSTANTIATE_TRAIN(T)                                                                              \
  template Tensor<T> predict_video(const FusionModel<T>&, const VideoData&, std::size_t, std::size_t);         \
  template MetricReport evaluate(const FusionModel<T>&, const std::vector<VideoData>&, std::size_t, std::size_t); \
  template MetricReport evaluate_checkpoint<T>(const std::string&, const Manifest&, const std::string&,       \
                                               std::optional<Task>, std::size_t, std::size_t);                 \
  template TrainResult<T> train(FusionConfig, const Manifest&, const TrainConfig&, const std::string&);

MMER_INSTANTIATE_TRAIN(float)
MMER_INSTANTIATE_TRAIN(double)

}  // namespace mmer
