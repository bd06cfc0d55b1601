#include "mmer/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "mmer/data.hpp"

namespace mmer {

namespace fs = std::filesystem;

void SynthSpec::validate() const {
  if (n_videos == 0 || frames == 0 || visual_dim == 0 || audio_dim == 0) {
    throw ConfigError("synth: n_videos, frames, visual_dim and audio_dim must be positive");
  }
  if (!(snr > 0.0)) throw ConfigError("synth: snr must be positive");
  if (!(missing_face_rate >= 0.0 && missing_face_rate < 1.0)) {
    throw ConfigError("synth: missing_face_rate must lie in [0, 1)");
  }
  if (!(audio_rate > 0.0)) throw ConfigError("synth: audio_rate must be positive");
}

int latent_sector(double valence, double arousal) {
  const double angle = std::atan2(arousal, valence) + std::numbers::pi;  // [0, 2 pi]
  const int sector = static_cast<int>(std::floor(angle / (std::numbers::pi / 4.0)));
  return std::clamp(sector, 0, 7);
}

namespace {

struct Wave {
  double amplitude, cycles, phase;
};

// Latent trajectory, evaluated at continuous frame time t in [0, frames - 1].
struct Trajectory {
  std::vector<Wave> dims[2];
  double frames;

  std::pair<double, double> at(double t) const {
    double z[2] = {0.0, 0.0};
    for (int d = 0; d < 2; ++d) {
      for (const auto& w : dims[d]) z[d] += w.amplitude * std::sin(2.0 * std::numbers::pi * w.cycles * t / frames + w.phase);
      z[d] = std::clamp(z[d], -1.0, 1.0);
    }
    return {z[0], z[1]};
  }
};

struct Lift {
  std::size_t dim;
  std::vector<double> weights;  // (2 x dim)
  std::vector<double> offset;   // (dim)

  Lift(std::size_t d, Rng& rng) : dim(d), weights(2 * d), offset(d) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& w : weights) w = normal(rng);
    for (auto& b : offset) b = 0.5 * normal(rng);
  }
  double clean(std::size_t k, double v, double a) const { return v * weights[k] + a * weights[dim + k]; }
};

FeatureSequence lift_track(const Lift& lift, const std::vector<std::pair<double, double>>& latent, Modality modality,
                           double snr, Rng& rng) {
  FeatureSequence seq;
  seq.modality = modality;
  seq.n_frames = latent.size();
  seq.dim = lift.dim;
  seq.valid.assign(latent.size(), true);
  seq.data.resize(latent.size() * lift.dim);
  double power = 0.0;
  for (std::size_t t = 0; t < latent.size(); ++t) {
    for (std::size_t k = 0; k < lift.dim; ++k) {
      const double s = lift.clean(k, latent[t].first, latent[t].second);
      power += s * s;
      seq.data[t * lift.dim + k] = static_cast<float>(s);
    }
  }
  power /= static_cast<double>(seq.data.size());
  const double noise_std = std::isinf(snr) ? 0.0 : std::sqrt(power / snr);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t t = 0; t < latent.size(); ++t) {
    for (std::size_t k = 0; k < lift.dim; ++k) {
      float& v = seq.data[t * lift.dim + k];
      const double n = noise_std > 0.0 ? noise_std * noise(rng) : 0.0;
      v = static_cast<float>(static_cast<double>(v) + lift.offset[k] + n);
    }
  }
  return seq;
}

}  // namespace

std::string synth_dataset(const SynthSpec& spec, const std::string& out_dir) {
  spec.validate();
  fs::create_directories(out_dir);
  Rng rng(spec.seed);

  const Lift visual_lift(spec.visual_dim, rng);
  const Lift audio_lift(spec.audio_dim, rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<double, double>> au_direction(kActionUnits);
  std::vector<double> au_offset(kActionUnits);
  for (std::size_t u = 0; u < kActionUnits; ++u) {
    const double theta = 2.0 * std::numbers::pi * unit(rng);
    au_direction[u] = {std::cos(theta), std::sin(theta)};
    au_offset[u] = -0.3 + 0.6 * unit(rng);
  }

  Manifest manifest;
  const std::size_t total = spec.n_videos + spec.n_val_videos;
  const std::size_t audio_frames =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(spec.frames) * spec.audio_rate)));
  for (std::size_t v = 0; v < total; ++v) {
    char id_buf[32];
    std::snprintf(id_buf, sizeof(id_buf), "vid%03zu", v);
    const std::string id = id_buf;

    Trajectory traj;
    traj.frames = static_cast<double>(spec.frames);
    for (auto& dim : traj.dims) {
      for (int k = 0; k < 3; ++k) {
        dim.push_back({0.2 + 0.4 * unit(rng), 0.5 + 2.5 * unit(rng), 2.0 * std::numbers::pi * unit(rng)});
      }
    }
    std::vector<std::pair<double, double>> latent(spec.frames);
    for (std::size_t t = 0; t < spec.frames; ++t) latent[t] = traj.at(static_cast<double>(t));
    std::vector<std::pair<double, double>> audio_latent(audio_frames);
    for (std::size_t j = 0; j < audio_frames; ++j) {
      const double u = audio_frames == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(audio_frames - 1);
      audio_latent[j] = traj.at(u * static_cast<double>(spec.frames - 1));
    }

    FeatureSequence visual = lift_track(visual_lift, latent, Modality::kVisual, spec.snr, rng);
    FeatureSequence audio = lift_track(audio_lift, audio_latent, Modality::kAudio, spec.snr, rng);
    if (spec.missing_face_rate > 0.0) {
      std::size_t valid_count = 0;
      for (std::size_t t = 0; t < spec.frames; ++t) {
        if (unit(rng) < spec.missing_face_rate) {
          visual.valid[t] = false;
          std::fill_n(visual.data.begin() + static_cast<std::ptrdiff_t>(t * visual.dim), visual.dim, 0.0f);
        } else {
          ++valid_count;
        }
      }
      if (valid_count == 0) visual.valid[0] = true;
    }

    LabelTrack labels;
    labels.task = spec.task;
    labels.n_frames = spec.frames;
    for (const auto& [val, aro] : latent) {
      switch (spec.task.kind()) {
        case TaskKind::kVA:
          labels.va.push_back(static_cast<float>(val));
          labels.va.push_back(static_cast<float>(aro));
          break;
        case TaskKind::kEXPR:
          labels.expr.push_back(latent_sector(val, aro));
          break;
        case TaskKind::kAU:
          for (std::size_t u = 0; u < kActionUnits; ++u) {
            const double s = au_direction[u].first * val + au_direction[u].second * aro + au_offset[u];
            labels.au.push_back(s > 0.0 ? 1 : 0);
          }
          break;
      }
    }

    const std::string visual_name = id + ".visual.fseq";
    const std::string audio_name = id + ".audio.fseq";
    const std::string label_name = id + "." + spec.task.name() + ".csv";
    write_feature_file((fs::path(out_dir) / visual_name).string(), visual);
    write_feature_file((fs::path(out_dir) / audio_name).string(), audio);
    write_label_csv((fs::path(out_dir) / label_name).string(), labels);
    manifest.entries.push_back({id, visual_name, audio_name, label_name, v < spec.n_videos ? "train" : "val"});
  }
  const std::string manifest_path = (fs::path(out_dir) / "manifest.csv").string();
  manifest.save(manifest_path);
  return manifest_path;
}

}  // namespace mmer
