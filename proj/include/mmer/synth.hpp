#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "mmer/fusion.hpp"

namespace mmer {

/// Planted-signal dataset. Each video follows a smooth 2-D latent
/// trajectory (sum of low-frequency sinusoids, clipped to [-1, 1]).
/// Visual and audio features are two fixed random linear lifts of the latent
/// plus Gaussian noise at the given signal-to-noise variance ratio. Labels:
///   va   the latent itself (valence, arousal)
///   expr the latent angle quantized into 8 sectors of 45 degrees
///   au   12 thresholded random linear functionals of the latent
struct SynthSpec {
  std::size_t n_videos = 8;      // train split
  std::size_t n_val_videos = 2;  // val split
  std::size_t frames = 600;
  std::size_t visual_dim = 64;
  std::size_t audio_dim = 16;
  Task task;
  double snr = 100.0;  // infinity disables noise
  std::uint64_t seed = 0;
  double missing_face_rate = 0.0;  // fraction of visual frames flagged invalid
  double audio_rate = 1.0;         // audio frames per visual frame

  void validate() const;
};

/// Writes features, labels and `manifest.csv` into `out_dir`; returns the
/// manifest path. Output bytes depend only on the spec.
std::string synth_dataset(const SynthSpec& spec, const std::string& out_dir);

/// 8-sector quantization of atan2(arousal, valence), sector 0 starting at -pi.
int latent_sector(double valence, double arousal);

}  // namespace mmer
