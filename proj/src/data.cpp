#include "mmer/data.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "mmer/binary_io.hpp"

namespace mmer {

namespace fs = std::filesystem;

void FeatureSequence::check() const {
  if (data.size() != n_frames * dim) {
    throw std::invalid_argument("feature sequence '" + video_id + "': data size " + std::to_string(data.size()) +
                                " != " + std::to_string(n_frames) + " x " + std::to_string(dim));
  }
  if (valid.size() != n_frames) {
    throw std::invalid_argument("feature sequence '" + video_id + "': validity flags do not match n_frames");
  }
}

std::vector<char> encode_feature_sequence(const FeatureSequence& seq) {
  seq.check();
  binio::Writer w;
  w.bytes("FSEQ");
  w.u32(kFeatureFileVersion);
  w.u8(static_cast<std::uint8_t>(seq.modality));
  w.u32(static_cast<std::uint32_t>(seq.n_frames));
  w.u32(static_cast<std::uint32_t>(seq.dim));
  if (seq.modality == Modality::kVisual) {
    std::vector<std::uint8_t> bitmap((seq.n_frames + 7) / 8, 0);
    for (std::size_t i = 0; i < seq.n_frames; ++i) {
      if (seq.valid[i]) bitmap[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    for (auto b : bitmap) w.u8(b);
  }
  for (float v : seq.data) w.f32(v);
  return w.buffer();
}

FeatureSequence decode_feature_sequence(std::span<const char> bytes, std::string video_id) {
  binio::Reader r(bytes);
  r.expect_magic("FSEQ", "feature file");
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kFeatureFileVersion) {
    throw ParseError("feature file: unsupported version " + std::to_string(version), version_at);
  }
  const std::size_t modality_at = r.offset();
  const std::uint8_t modality = r.u8("modality");
  if (modality > 1) throw ParseError("feature file: unknown modality " + std::to_string(modality), modality_at);
  FeatureSequence seq;
  seq.video_id = std::move(video_id);
  seq.modality = static_cast<Modality>(modality);
  seq.n_frames = r.u32("n_frames");
  seq.dim = r.u32("dim");
  seq.valid.assign(seq.n_frames, true);
  if (seq.modality == Modality::kVisual) {
    const std::size_t bitmap_bytes = (seq.n_frames + 7) / 8;
    r.require(bitmap_bytes, "validity bitmap");
    for (std::size_t b = 0; b < bitmap_bytes; ++b) {
      const std::uint8_t bits = r.u8("validity bitmap");
      for (std::size_t k = 0; k < 8 && b * 8 + k < seq.n_frames; ++k) seq.valid[b * 8 + k] = (bits >> k) & 1u;
    }
  }
  const std::size_t expected = seq.n_frames * seq.dim * 4;
  r.require(expected, "feature payload");
  seq.data.resize(seq.n_frames * seq.dim);
  for (auto& v : seq.data) v = r.f32("feature payload");
  if (r.remaining() != 0) {
    throw ParseError("feature file: " + std::to_string(r.remaining()) + " trailing bytes", r.offset());
  }
  return seq;
}

void write_feature_file(const std::string& path, const FeatureSequence& seq) {
  binio::write_file(path, encode_feature_sequence(seq));
}

FeatureSequence load_feature_file(const std::string& path) {
  std::string id = fs::path(path).filename().string();
  id = id.substr(0, id.find('.'));
  return decode_feature_sequence(binio::read_file(path), std::move(id));
}

// ---- labels ---------------------------------------------------------------

bool LabelTrack::frame_valid(std::size_t frame) const {
  switch (task.kind()) {
    case TaskKind::kVA:
      return va[2 * frame] != kVaSentinel && va[2 * frame + 1] != kVaSentinel;
    case TaskKind::kEXPR:
      return expr[frame] != kLabelSentinel;
    case TaskKind::kAU:
      for (std::size_t u = 0; u < kActionUnits; ++u) {
        if (au[frame * kActionUnits + u] == kLabelSentinel) return false;
      }
      return true;
  }
  return false;
}

ValidityMask LabelTrack::mask() const {
  ValidityMask m(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) m[i] = frame_valid(i);
  return m;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

template <typename V>
V parse_cell(const std::string& cell, std::size_t line_no, const std::string& path) {
  V value{};
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw ParseError(path + ": cannot parse '" + cell + "'", line_no);
  }
  return value;
}

std::vector<std::string> label_header(Task task) {
  switch (task.kind()) {
    case TaskKind::kVA: return {"frame", "valence", "arousal"};
    case TaskKind::kEXPR: return {"frame", "expression"};
    case TaskKind::kAU: {
      std::vector<std::string> h{"frame"};
      for (std::size_t u = 1; u <= kActionUnits; ++u) h.push_back("au" + std::to_string(u));
      return h;
    }
  }
  return {};
}

}  // namespace

LabelTrack read_label_csv(const std::string& path, Task task, std::string video_id) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open label file " + path);
  LabelTrack track;
  track.video_id = std::move(video_id);
  track.task = task;
  const auto header = label_header(task);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || split_csv(line) != header) {
    throw ParseError(path + ": header does not match the " + task.name() + " label layout", line_no);
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw ParseError(path + ": wrong column count", line_no);
    if (parse_cell<std::size_t>(cells[0], line_no, path) != track.n_frames) {
      throw ParseError(path + ": frames must be consecutive from 0", line_no);
    }
    switch (task.kind()) {
      case TaskKind::kVA: {
        const float v = parse_cell<float>(cells[1], line_no, path);
        const float a = parse_cell<float>(cells[2], line_no, path);
        const bool sentinel = v == kVaSentinel || a == kVaSentinel;
        if (!sentinel && (std::abs(v) > 1.0f || std::abs(a) > 1.0f)) {
          throw ParseError(path + ": valence/arousal outside [-1, 1]", line_no);
        }
        track.va.push_back(v);
        track.va.push_back(a);
        break;
      }
      case TaskKind::kEXPR: {
        const int e = parse_cell<int>(cells[1], line_no, path);
        if (e != kLabelSentinel && (e < 0 || e >= static_cast<int>(kExprClasses))) {
          throw ParseError(path + ": expression label outside 0..7", line_no);
        }
        track.expr.push_back(e);
        break;
      }
      case TaskKind::kAU: {
        for (std::size_t u = 0; u < kActionUnits; ++u) {
          const int y = parse_cell<int>(cells[u + 1], line_no, path);
          if (y != kLabelSentinel && y != 0 && y != 1) throw ParseError(path + ": AU label not in {-1,0,1}", line_no);
          track.au.push_back(y);
        }
        break;
      }
    }
    ++track.n_frames;
  }
  return track;
}

void write_label_csv(const std::string& path, const LabelTrack& track) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write label file " + path);
  out.imbue(std::locale::classic());
  const auto header = label_header(track.task);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  out << std::setprecision(9);
  for (std::size_t f = 0; f < track.n_frames; ++f) {
    out << f;
    switch (track.task.kind()) {
      case TaskKind::kVA: out << ',' << track.va[2 * f] << ',' << track.va[2 * f + 1]; break;
      case TaskKind::kEXPR: out << ',' << track.expr[f]; break;
      case TaskKind::kAU:
        for (std::size_t u = 0; u < kActionUnits; ++u) out << ',' << track.au[f * kActionUnits + u];
        break;
    }
    out << '\n';
  }
}

// ---- manifest -------------------------------------------------------------

Manifest Manifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  const fs::path base = fs::path(path).parent_path();
  const auto resolve = [&](const std::string& p) {
    const fs::path candidate(p);
    return candidate.is_absolute() ? p : (base / candidate).string();
  };
  const std::vector<std::string> header{"video_id", "visual_path", "audio_path", "label_path", "split"};
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || split_csv(line) != header) {
    throw ParseError(path + ": expected header video_id,visual_path,audio_path,label_path,split", line_no);
  }
  Manifest m;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw ParseError(path + ": wrong column count", line_no);
    if (cells[4] != "train" && cells[4] != "val") throw ParseError(path + ": split must be train or val", line_no);
    m.entries.push_back({cells[0], resolve(cells[1]), resolve(cells[2]), resolve(cells[3]), cells[4]});
  }
  return m;
}

void Manifest::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + path);
  out << "video_id,visual_path,audio_path,label_path,split\n";
  for (const auto& e : entries) {
    out << e.video_id << ',' << e.visual_path << ',' << e.audio_path << ',' << e.label_path << ',' << e.split << '\n';
  }
}

std::vector<ManifestEntry> Manifest::select(const std::string& split) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(e);
  }
  return out;
}

// ---- alignment and imputation ---------------------------------------------

FeatureSequence align_audio(const FeatureSequence& audio, std::size_t n_frames) {
  if (audio.n_frames == 0) throw std::invalid_argument("align_audio: audio track has no frames");
  if (n_frames == 0) throw std::invalid_argument("align_audio: target length must be >= 1");
  FeatureSequence out;
  out.video_id = audio.video_id;
  out.modality = Modality::kAudio;
  out.n_frames = n_frames;
  out.dim = audio.dim;
  out.valid.assign(n_frames, true);
  if (audio.n_frames == n_frames) {
    out.data = audio.data;
    return out;
  }
  out.data.resize(n_frames * audio.dim);
  const std::size_t m = audio.n_frames;
  for (std::size_t j = 0; j < n_frames; ++j) {
    // Target frame j sits at normalized time j / (n - 1); source index u (m - 1).
    const double u = n_frames == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(n_frames - 1);
    const double pos = u * static_cast<double>(m - 1);
    const std::size_t lo = std::min(static_cast<std::size_t>(pos), m - 1);
    const std::size_t hi = std::min(lo + 1, m - 1);
    const double frac = pos - static_cast<double>(lo);
    for (std::size_t d = 0; d < audio.dim; ++d) {
      const double a = audio.data[lo * audio.dim + d];
      const double b = audio.data[hi * audio.dim + d];
      out.data[j * audio.dim + d] = static_cast<float>(a + (b - a) * frac);
    }
  }
  return out;
}

FeatureSequence fill_missing_faces(const FeatureSequence& visual) {
  visual.check();
  std::vector<std::size_t> valid_frames;
  for (std::size_t i = 0; i < visual.n_frames; ++i) {
    if (visual.valid[i]) valid_frames.push_back(i);
  }
  if (valid_frames.empty()) {
    throw std::invalid_argument("fill_missing_faces: video '" + visual.video_id + "' has no valid face frame");
  }
  FeatureSequence out = visual;
  std::size_t next = 0;  // index into valid_frames of the first valid frame > i
  for (std::size_t i = 0; i < visual.n_frames; ++i) {
    while (next < valid_frames.size() && valid_frames[next] <= i) ++next;
    if (visual.valid[i]) continue;
    std::size_t source;
    if (next == 0) {
      source = valid_frames.front();
    } else if (next == valid_frames.size()) {
      source = valid_frames.back();
    } else {
      const std::size_t before = valid_frames[next - 1];
      const std::size_t after = valid_frames[next];
      source = (i - before <= after - i) ? before : after;
    }
    std::copy_n(visual.data.begin() + static_cast<std::ptrdiff_t>(source * visual.dim), visual.dim,
                out.data.begin() + static_cast<std::ptrdiff_t>(i * visual.dim));
  }
  return out;
}

VideoData load_video(const ManifestEntry& entry, Task task) {
  VideoData video;
  video.video_id = entry.video_id;
  FeatureSequence visual = load_feature_file(entry.visual_path);
  if (visual.modality != Modality::kVisual) throw std::invalid_argument(entry.visual_path + ": not a visual track");
  visual.video_id = entry.video_id;
  FeatureSequence audio = load_feature_file(entry.audio_path);
  if (audio.modality != Modality::kAudio) throw std::invalid_argument(entry.audio_path + ": not an audio track");
  audio.video_id = entry.video_id;
  video.visual = fill_missing_faces(visual);
  video.audio = align_audio(audio, video.visual.n_frames);
  video.labels = read_label_csv(entry.label_path, task, entry.video_id);
  if (video.labels.n_frames != video.visual.n_frames) {
    throw std::invalid_argument("video '" + entry.video_id + "': " + std::to_string(video.labels.n_frames) +
                                " label rows for " + std::to_string(video.visual.n_frames) + " frames");
  }
  return video;
}

}  // namespace mmer
