#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmer/data.hpp"
#include "mmer/fusion.hpp"
#include "mmer/metrics.hpp"
#include "mmer/optim.hpp"
#include "mmer/segments.hpp"

namespace mmer {

enum class Precision { k32, k64 };

struct TrainConfig {
  double peak_lr = 3e-5;
  double weight_decay = 1e-5;
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  double dropout = 0.3;  // applied to every dropout site of the model
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::optional<double> grad_clip_norm = 1.0;
  std::uint64_t seed = 0;
  Precision precision = Precision::k32;
  std::size_t window = 300;
  std::size_t stride = 200;
  std::size_t warmup_epochs = 1;
  std::size_t max_steps = 0;   // 0: run all epochs
  std::size_t eval_every = 1;  // epochs between validation passes; 0 disables
  bool log_progress = false;

  void validate() const;
  AdamWConfig adamw() const { return {beta1, beta2, adam_eps, weight_decay}; }
  /// Keys: lr, weight_decay, batch_size, epochs, dropout, beta1, beta2,
  /// adam_eps, grad_clip_norm (0 disables), seed, precision (32|64),
  /// window, stride, warmup_epochs, max_steps, eval_every.
  static TrainConfig from_kv(const KeyValues& kv, TrainConfig base);
  static TrainConfig from_kv(const KeyValues& kv);
};

struct StepRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  bool skipped = false;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::string split;
  MetricReport metrics;
  double selection = 0.0;
};

struct RunRecord {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::string best_checkpoint;
  std::string last_checkpoint;
  double best_selection = -1.0;
  std::size_t skipped_steps = 0;

  /// `steps.csv` (step,lr,loss) and `metrics.csv` (epoch,step,split,metrics...).
  void save_csv(const std::string& dir) const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-frame model outputs decoded for scoring.
struct FramePredictions {
  std::string video_id;
  Task task;
  std::size_t n_frames = 0;
  std::vector<double> va;        // (n x 2)
  std::vector<int> expr;         // (n) argmax class
  std::vector<double> expr_prob; // (n x 8) softmax
  std::vector<double> au_prob;   // (n x 12) sigmoid
};

/// Decodes stitched raw outputs (tanh values or logits).
FramePredictions decode_outputs(const std::string& video_id, Task task, std::span<const double> raw,
                                std::size_t n_frames);

/// Headline metric used to pick checkpoints: mean CCC (va) or macro F1.
double selection_metric(const MetricReport& report);

/// Mask-aware metrics over the concatenated frames of all videos, in video
/// id order. VA: ccc_valence, ccc_arousal, ccc_mean. EXPR: f1_macro and
/// f1_class<k>. AU: f1_macro and f1_au<k>.
MetricReport score_predictions(const std::vector<LabelTrack>& labels, const std::vector<FramePredictions>& preds);

/// Eval-mode segment inference, stitched to (n_frames x out_dim).
template <typename T>
Tensor<T> predict_video(const FusionModel<T>& model, const VideoData& video, std::size_t window, std::size_t stride);

template <typename T>
MetricReport evaluate(const FusionModel<T>& model, const std::vector<VideoData>& videos, std::size_t window,
                      std::size_t stride);

/// Loads the checkpoint in `checkpoint_dir` and scores one manifest split.
/// Throws ConfigError if `task` disagrees with the checkpoint.
template <typename T>
MetricReport evaluate_checkpoint(const std::string& checkpoint_dir, const Manifest& manifest, const std::string& split,
                                 std::optional<Task> task, std::size_t window, std::size_t stride);

std::vector<VideoData> load_split(const Manifest& manifest, const std::string& split, Task task);

template <typename T>
struct TrainResult {
  FusionModel<T> model;
  RunRecord record;
};

/// Trains on the manifest's train split and validates on its val split
/// (train split when val is empty). With a non-empty `out_dir` writes
/// checkpoint_best/, checkpoint_last/ and the run CSVs there.
template <typename T>
TrainResult<T> train(FusionConfig model_cfg, const Manifest& manifest, const TrainConfig& cfg,
                     const std::string& out_dir);

/// Predictions CSV: video_id,frame, then valence,arousal | expr_class,p0..p7 |
/// au1_prob..au12_prob,au1..au12.
void write_predictions_csv(const std::string& path, const std::vector<FramePredictions>& preds);
std::vector<FramePredictions> read_predictions_csv(const std::string& path, Task task);

}  // namespace mmer
