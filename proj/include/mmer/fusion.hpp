#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mmer/config.hpp"
#include "mmer/encoder.hpp"
#include "mmer/tcn.hpp"

namespace mmer {

enum class TaskKind { kVA, kEXPR, kAU };

/// Prediction task; the output width is fixed by the kind.
class Task {
 public:
  constexpr Task() = default;
  constexpr explicit Task(TaskKind kind) : kind_(kind) {}

  static Task parse(std::string_view name);  // "va" | "expr" | "au"

  constexpr TaskKind kind() const { return kind_; }
  constexpr std::size_t out_dim() const {
    switch (kind_) {
      case TaskKind::kVA: return 2;
      case TaskKind::kEXPR: return 8;
      case TaskKind::kAU: return 12;
    }
    return 0;
  }
  std::string name() const;

  friend constexpr bool operator==(Task a, Task b) { return a.kind_ == b.kind_; }

 private:
  TaskKind kind_ = TaskKind::kVA;
};

inline constexpr std::size_t kExprClasses = 8;
inline constexpr std::size_t kActionUnits = 12;

struct FusionConfig {
  std::size_t visual_dim = 2816;  // ArcFace 512 + EfficientNet 1280 + DAN 512 + 512
  std::size_t audio_dim = 512;
  TcnConfig visual_tcn;
  TcnConfig audio_tcn;
  EncoderConfig encoder;
  std::size_t mlp_hidden = 256;
  double mlp_dropout = 0.3;
  Task task;

  /// Copies visual_dim/audio_dim into the TCN in_dims, then checks everything.
  void validate();
  std::size_t fused_dim() const { return visual_tcn.channels + audio_tcn.channels; }
  bool needs_input_projection() const { return fused_dim() != encoder.d_model; }
  /// Sets every dropout probability in the model.
  void set_dropout(double p);

  KeyValues to_kv() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static FusionConfig from_kv(const KeyValues& kv);
};

/// g_c = [g_v, g_a] along channels, visual first.
template <typename T>
Tensor<T> concat_features(const Tensor<T>& g_v, const Tensor<T>& g_a);

/// Visual TCN and audio TCN, concatenated, (projected,) encoded per segment
/// and mapped per frame by an MLP head:
///   linear(mlp_hidden) -> act -> dropout -> linear(out_dim)
/// VA outputs pass through tanh; EXPR and AU emit logits.
template <typename T>
class FusionModel {
 public:
  FusionModel(FusionConfig cfg, std::uint64_t seed);

  const FusionConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }

  Tensor<T> forward(const Tensor<T>& visual, const Tensor<T>& audio, const ForwardContext& ctx) const;

  /// Writes `<dir>/params.tnsr` and `<dir>/model.cfg`.
  void save(const std::string& dir) const;
  /// Rejects parameter files whose names or shapes disagree with the config.
  static FusionModel load(const std::string& dir);
  /// Copies values from `tensors`, which must match the store exactly.
  void assign(const std::vector<NamedTensor<T>>& tensors);

 private:
  FusionConfig cfg_;
  ParamStore<T> store_;
  TcnParams<T> visual_tcn_;
  TcnParams<T> audio_tcn_;
  std::optional<LinearParams<T>> projection_;
  EncoderParams<T> encoder_;
  LinearParams<T> head_hidden_;
  LinearParams<T> head_out_;
};

inline constexpr const char* kParamsFile = "params.tnsr";
inline constexpr const char* kConfigFile = "model.cfg";

}  // namespace mmer
