#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmer/fusion.hpp"
#include "mmer/losses.hpp"

namespace mmer {

enum class Modality : std::uint8_t { kVisual = 0, kAudio = 1 };

/// Frame-aligned features of one modality of one video.
struct FeatureSequence {
  std::string video_id;
  Modality modality = Modality::kVisual;
  std::size_t n_frames = 0;
  std::size_t dim = 0;
  std::vector<float> data;  // row-major (n_frames x dim)
  std::vector<bool> valid;  // face detected; audio frames are always valid

  std::span<const float> row(std::size_t frame) const {
    return std::span<const float>(data).subspan(frame * dim, dim);
  }
  void check() const;
};

// FSEQ feature files:
//   "FSEQ" | version u32 = 1 | modality u8 | n_frames u32 | dim u32 |
//   validity bitmap ceil(n_frames / 8) bytes, LSB first (visual only) |
//   payload f32 x n_frames x dim, row-major, little-endian
inline constexpr std::uint32_t kFeatureFileVersion = 1;

std::vector<char> encode_feature_sequence(const FeatureSequence& seq);
FeatureSequence decode_feature_sequence(std::span<const char> bytes, std::string video_id = {});
void write_feature_file(const std::string& path, const FeatureSequence& seq);
/// video_id is taken from the file name up to its first '.'.
FeatureSequence load_feature_file(const std::string& path);

inline constexpr float kVaSentinel = -5.0f;
inline constexpr int kLabelSentinel = -1;

/// Per-frame labels for one task. Sentinel rows are excluded everywhere.
struct LabelTrack {
  std::string video_id;
  Task task;
  std::size_t n_frames = 0;
  std::vector<float> va;  // (n x 2) valence, arousal
  std::vector<int> expr;  // (n)
  std::vector<int> au;    // (n x 12)

  bool frame_valid(std::size_t frame) const;
  ValidityMask mask() const;
};

/// Label CSVs with a header row:
///   va:   frame,valence,arousal
///   expr: frame,expression
///   au:   frame,au1,...,au12
/// Frames must be listed in order starting at 0.
LabelTrack read_label_csv(const std::string& path, Task task, std::string video_id = {});
void write_label_csv(const std::string& path, const LabelTrack& track);

struct ManifestEntry {
  std::string video_id;
  std::string visual_path;
  std::string audio_path;
  std::string label_path;
  std::string split;  // "train" | "val"
};

/// CSV with header video_id,visual_path,audio_path,label_path,split.
/// Relative paths resolve against the manifest's directory.
struct Manifest {
  std::vector<ManifestEntry> entries;

  static Manifest load(const std::string& path);
  void save(const std::string& path) const;
  std::vector<ManifestEntry> select(const std::string& split) const;
};

/// Resamples m audio frames onto n_frames by per-dimension linear
/// interpolation over normalized time [0, 1].
FeatureSequence align_audio(const FeatureSequence& audio, std::size_t n_frames);

/// Replaces each invalid frame with its nearest valid frame (ties go to the
/// earlier one). Validity flags are kept so losses can still mask them.
FeatureSequence fill_missing_faces(const FeatureSequence& visual);

/// A video ready for segmentation: faces filled, audio aligned, labels loaded.
struct VideoData {
  std::string video_id;
  FeatureSequence visual;
  FeatureSequence audio;
  LabelTrack labels;

  std::size_t n_frames() const { return visual.n_frames; }
};

VideoData load_video(const ManifestEntry& entry, Task task);

}  // namespace mmer
