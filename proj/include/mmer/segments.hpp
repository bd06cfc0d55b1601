#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mmer/data.hpp"
#include "mmer/tensor.hpp"

namespace mmer {

/// One fixed-length window of a video. Frames [start, start + window - pad)
/// are real; the trailing `pad` frames repeat the last real frame.
struct SegmentSpec {
  std::string video_id;
  std::size_t index = 0;
  std::size_t start = 0;
  std::size_t window = 0;
  std::size_t stride = 0;
  std::size_t pad = 0;

  std::size_t real_length() const { return window - pad; }
};

/// Starts at 0, s, 2s, ... for every start < n. Requires 1 <= s <= w.
std::vector<SegmentSpec> split_segments(std::size_t n, std::size_t w, std::size_t s,
                                        const std::string& video_id = {});

/// (window x dim) rows of `seq` for `seg`, tail padded by repetition.
std::vector<float> extract_window(const FeatureSequence& seq, const SegmentSpec& seg);

/// Segment-local validity: false on pad frames and wherever `frame_mask`
/// is false for the underlying global frame.
ValidityMask window_mask(const SegmentSpec& seg, const ValidityMask& frame_mask);

/// Averages each global frame over every segment prediction covering it,
/// ignoring pad rows. Throws when a frame in [0, n) is uncovered.
template <typename T>
Tensor<T> stitch_predictions(const std::vector<std::pair<SegmentSpec, Tensor<T>>>& segment_preds,
                             std::size_t n);

}  // namespace mmer
