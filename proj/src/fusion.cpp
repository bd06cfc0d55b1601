#include "mmer/fusion.hpp"

#include <filesystem>
#include <sstream>

#include "mmer/serialize.hpp"

namespace mmer {

Task Task::parse(std::string_view name) {
  if (name == "va") return Task(TaskKind::kVA);
  if (name == "expr") return Task(TaskKind::kEXPR);
  if (name == "au") return Task(TaskKind::kAU);
  throw ConfigError("unknown task '" + std::string(name) + "' (expected va, expr or au)");
}

std::string Task::name() const {
  switch (kind_) {
    case TaskKind::kVA: return "va";
    case TaskKind::kEXPR: return "expr";
    case TaskKind::kAU: return "au";
  }
  return "?";
}

void FusionConfig::validate() {
  if (visual_dim == 0 || audio_dim == 0 || mlp_hidden == 0) {
    throw ConfigError("fusion: visual_dim, audio_dim and mlp_hidden must be positive");
  }
  if (!(mlp_dropout >= 0.0 && mlp_dropout < 1.0)) throw ConfigError("fusion: mlp_dropout must lie in [0, 1)");
  visual_tcn.in_dim = visual_dim;
  audio_tcn.in_dim = audio_dim;
  visual_tcn.validate();
  audio_tcn.validate();
  encoder.validate();
}

void FusionConfig::set_dropout(double p) {
  visual_tcn.dropout = p;
  audio_tcn.dropout = p;
  encoder.dropout = p;
  mlp_dropout = p;
}

namespace {

std::string activation_name(Activation a) { return a == Activation::kGelu ? "gelu" : "relu"; }

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "gelu") return Activation::kGelu;
  throw ConfigError("unknown activation '" + s + "'");
}

std::string join(const std::vector<std::size_t>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

void put_tcn(KeyValues& kv, const std::string& prefix, const TcnConfig& c) {
  kv.set(prefix + "channels", std::to_string(c.channels));
  kv.set(prefix + "kernel_size", std::to_string(c.kernel_size));
  kv.set(prefix + "dilations", join(c.dilations));
  kv.set(prefix + "dropout", format_double(c.dropout));
}

void get_tcn(const KeyValues& kv, const std::string& prefix, TcnConfig& c) {
  kv.read(prefix + "channels", c.channels);
  kv.read(prefix + "kernel_size", c.kernel_size);
  kv.read(prefix + "dilations", c.dilations);
  kv.read(prefix + "dropout", c.dropout);
}

}  // namespace

KeyValues FusionConfig::to_kv() const {
  KeyValues kv;
  kv.set("task", task.name());
  kv.set("visual_dim", std::to_string(visual_dim));
  kv.set("audio_dim", std::to_string(audio_dim));
  put_tcn(kv, "visual_tcn.", visual_tcn);
  put_tcn(kv, "audio_tcn.", audio_tcn);
  kv.set("encoder.d_model", std::to_string(encoder.d_model));
  kv.set("encoder.n_heads", std::to_string(encoder.n_heads));
  kv.set("encoder.n_layers", std::to_string(encoder.n_layers));
  kv.set("encoder.ffn_dim", std::to_string(encoder.ffn_dim));
  kv.set("encoder.dropout", format_double(encoder.dropout));
  kv.set("encoder.use_positional_encoding", encoder.use_positional_encoding ? "true" : "false");
  kv.set("encoder.max_len", std::to_string(encoder.max_len));
  kv.set("mlp_hidden", std::to_string(mlp_hidden));
  kv.set("mlp_dropout", format_double(mlp_dropout));
  kv.set("activation", activation_name(encoder.activation));
  return kv;
}

FusionConfig FusionConfig::from_kv(const KeyValues& kv) {
  kv.require_known({"task", "visual_dim", "audio_dim", "visual_tcn.channels", "visual_tcn.kernel_size",
                    "visual_tcn.dilations", "visual_tcn.dropout", "audio_tcn.channels",
                    "audio_tcn.kernel_size", "audio_tcn.dilations", "audio_tcn.dropout", "encoder.d_model",
                    "encoder.n_heads", "encoder.n_layers", "encoder.ffn_dim", "encoder.dropout",
                    "encoder.use_positional_encoding", "encoder.max_len", "mlp_hidden", "mlp_dropout",
                    "activation"});
  FusionConfig cfg;
  std::string task_name = cfg.task.name();
  kv.read("task", task_name);
  cfg.task = Task::parse(task_name);
  kv.read("visual_dim", cfg.visual_dim);
  kv.read("audio_dim", cfg.audio_dim);
  get_tcn(kv, "visual_tcn.", cfg.visual_tcn);
  get_tcn(kv, "audio_tcn.", cfg.audio_tcn);
  kv.read("encoder.d_model", cfg.encoder.d_model);
  kv.read("encoder.n_heads", cfg.encoder.n_heads);
  kv.read("encoder.n_layers", cfg.encoder.n_layers);
  kv.read("encoder.ffn_dim", cfg.encoder.ffn_dim);
  kv.read("encoder.dropout", cfg.encoder.dropout);
  kv.read("encoder.use_positional_encoding", cfg.encoder.use_positional_encoding);
  kv.read("encoder.max_len", cfg.encoder.max_len);
  kv.read("mlp_hidden", cfg.mlp_hidden);
  kv.read("mlp_dropout", cfg.mlp_dropout);
  std::string act = activation_name(cfg.encoder.activation);
  kv.read("activation", act);
  const Activation activation = parse_activation(act);
  cfg.encoder.activation = activation;
  cfg.visual_tcn.activation = activation;
  cfg.audio_tcn.activation = activation;
  cfg.validate();
  return cfg;
}

template <typename T>
Tensor<T> concat_features(const Tensor<T>& g_v, const Tensor<T>& g_a) {
  if (g_v.rank() != 2 || g_a.rank() != 2 || g_v.dim(0) != g_a.dim(0)) {
    throw ShapeError("concat_features", {g_v.shape(), g_a.shape()}, "sequence lengths differ");
  }
  if (g_a.dim(1) == 0) return g_v;
  return concat(std::vector<Tensor<T>>{g_v, g_a}, 1);
}

template <typename T>
FusionModel<T>::FusionModel(FusionConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(seed);
  visual_tcn_ = init_tcn(store_, "visual_tcn", cfg_.visual_tcn, rng);
  audio_tcn_ = init_tcn(store_, "audio_tcn", cfg_.audio_tcn, rng);
  if (cfg_.needs_input_projection()) {
    projection_ = init_linear(store_, "input_projection", cfg_.fused_dim(), cfg_.encoder.d_model, rng);
  }
  encoder_ = init_encoder(store_, "encoder", cfg_.encoder, rng);
  head_hidden_ = init_linear(store_, "head.hidden", cfg_.encoder.d_model, cfg_.mlp_hidden, rng);
  head_out_ = init_linear(store_, "head.out", cfg_.mlp_hidden, cfg_.task.out_dim(), rng);
}

template <typename T>
Tensor<T> FusionModel<T>::forward(const Tensor<T>& visual, const Tensor<T>& audio,
                                  const ForwardContext& ctx) const {
  if (visual.rank() != 2 || audio.rank() != 2 || visual.dim(0) == 0 || visual.dim(0) != audio.dim(0) ||
      visual.dim(1) != cfg_.visual_dim || audio.dim(1) != cfg_.audio_dim) {
    throw ShapeError("fuse_forward", {visual.shape(), audio.shape()},
                     "expected (T x " + std::to_string(cfg_.visual_dim) + ") and (T x " +
                         std::to_string(cfg_.audio_dim) + ") with T >= 1");
  }
  const Tensor<T> g_v = tcn_forward(visual, cfg_.visual_tcn, visual_tcn_, ctx);
  const Tensor<T> g_a = tcn_forward(audio, cfg_.audio_tcn, audio_tcn_, ctx);
  Tensor<T> g_c = concat_features(g_v, g_a);
  if (projection_) g_c = linear_forward(g_c, *projection_);
  const Tensor<T> h = encoder_forward(g_c, encoder_, cfg_.encoder, ctx);
  Tensor<T> hidden = activate(linear_forward(h, head_hidden_), cfg_.encoder.activation);
  hidden = dropout(hidden, cfg_.mlp_dropout, ctx);
  Tensor<T> y = linear_forward(hidden, head_out_);
  if (cfg_.task.kind() == TaskKind::kVA) y = tanh(y);
  return y;
}

template <typename T>
void FusionModel<T>::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  const auto named = store_.named();
  save_tensors<T>((std::filesystem::path(dir) / kParamsFile).string(), named);
  cfg_.to_kv().save((std::filesystem::path(dir) / kConfigFile).string());
}

template <typename T>
FusionModel<T> FusionModel<T>::load(const std::string& dir) {
  const FusionConfig cfg = FusionConfig::from_kv(KeyValues::load((std::filesystem::path(dir) / kConfigFile).string()));
  FusionModel model(cfg, 0);
  model.assign(load_tensors<T>((std::filesystem::path(dir) / kParamsFile).string()));
  return model;
}

template <typename T>
void FusionModel<T>::assign(const std::vector<NamedTensor<T>>& tensors) {
  if (tensors.size() != store_.entries().size()) {
    throw ConfigError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, config expects " +
                      std::to_string(store_.entries().size()));
  }
  for (const auto& [name, tensor] : tensors) {
    if (!store_.contains(name)) throw ConfigError("checkpoint tensor '" + name + "' is not part of the model");
    Tensor<T> target = store_.get(name);
    if (target.shape() != tensor.shape()) {
      throw ConfigError("checkpoint tensor '" + name + "' has shape " + shape_str(tensor.shape()) +
                        ", config expects " + shape_str(target.shape()));
    }
    std::ranges::copy(tensor.data(), target.mutable_data().begin());
  }
}

template Tensor<float> concat_features(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> concat_features(const Tensor<double>&, const Tensor<double>&);
template class FusionModel<float>;
template class FusionModel<double>;

}  // namespace mmer
