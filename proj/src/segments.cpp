#include "mmer/segments.hpp"

#include <sstream>
#include <stdexcept>

namespace mmer {

std::vector<SegmentSpec> split_segments(std::size_t n, std::size_t w, std::size_t s, const std::string& video_id) {
  if (n < 1 || w < 1) throw std::invalid_argument("split_segments: n and w must be >= 1");
  if (s < 1) throw std::invalid_argument("split_segments: stride must be >= 1");
  if (s > w) {
    throw std::invalid_argument("split_segments: stride " + std::to_string(s) + " exceeds window " +
                                std::to_string(w) + ", frames would be skipped");
  }
  std::vector<SegmentSpec> segments;
  for (std::size_t start = 0, i = 0; start < n; start += s, ++i) {
    const std::size_t pad = start + w > n ? start + w - n : 0;
    segments.push_back({video_id, i, start, w, s, pad});
  }
  return segments;
}

std::vector<float> extract_window(const FeatureSequence& seq, const SegmentSpec& seg) {
  if (seg.start >= seq.n_frames || seg.start + seg.real_length() > seq.n_frames) {
    throw std::invalid_argument("extract_window: segment " + std::to_string(seg.index) + " exceeds video '" +
                                seq.video_id + "'");
  }
  std::vector<float> out(seg.window * seq.dim);
  for (std::size_t f = 0; f < seg.window; ++f) {
    const std::size_t src = seg.start + std::min(f, seg.real_length() - 1);
    std::copy_n(seq.data.begin() + static_cast<std::ptrdiff_t>(src * seq.dim), seq.dim,
                out.begin() + static_cast<std::ptrdiff_t>(f * seq.dim));
  }
  return out;
}

ValidityMask window_mask(const SegmentSpec& seg, const ValidityMask& frame_mask) {
  ValidityMask out(seg.window, false);
  for (std::size_t f = 0; f < seg.real_length(); ++f) out[f] = frame_mask.at(seg.start + f);
  return out;
}

template <typename T>
Tensor<T> stitch_predictions(const std::vector<std::pair<SegmentSpec, Tensor<T>>>& segment_preds, std::size_t n) {
  if (segment_preds.empty()) throw std::invalid_argument("stitch_predictions: no segments");
  const std::size_t width = segment_preds.front().second.rank() == 2 ? segment_preds.front().second.dim(1) : 0;
  // Extended precision keeps sums of a few identical doubles exact.
  std::vector<long double> totals(n * width, 0.0L);
  std::vector<std::size_t> coverage(n, 0);
  for (const auto& [seg, pred] : segment_preds) {
    if (pred.rank() != 2 || pred.dim(1) != width || pred.dim(0) < seg.real_length()) {
      throw ShapeError("stitch_predictions", {pred.shape()},
                       "segment " + std::to_string(seg.index) + " prediction does not match its spec");
    }
    const auto values = pred.data();
    for (std::size_t f = 0; f < seg.real_length(); ++f) {
      const std::size_t frame = seg.start + f;
      if (frame >= n) throw std::invalid_argument("stitch_predictions: segment extends past the video");
      ++coverage[frame];
      for (std::size_t d = 0; d < width; ++d) totals[frame * width + d] += values[f * width + d];
    }
  }
  std::vector<std::size_t> gaps;
  for (std::size_t f = 0; f < n; ++f) {
    if (coverage[f] == 0) gaps.push_back(f);
  }
  if (!gaps.empty()) {
    std::ostringstream os;
    os << "stitch_predictions: " << gaps.size() << " uncovered frame(s):";
    for (std::size_t i = 0; i < gaps.size() && i < 32; ++i) os << ' ' << gaps[i];
    if (gaps.size() > 32) os << " ...";
    throw std::invalid_argument(os.str());
  }
  std::vector<T> out(n * width);
  for (std::size_t f = 0; f < n; ++f) {
    for (std::size_t d = 0; d < width; ++d) {
      out[f * width + d] = static_cast<T>(totals[f * width + d] / static_cast<long double>(coverage[f]));
    }
  }
  return Tensor<T>::from({n, width}, std::move(out));
}

template Tensor<float> stitch_predictions(const std::vector<std::pair<SegmentSpec, Tensor<float>>>&, std::size_t);
template Tensor<double> stitch_predictions(const std::vector<std::pair<SegmentSpec, Tensor<double>>>&, std::size_t);

}  // namespace mmer
