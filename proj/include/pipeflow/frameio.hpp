#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pipeflow/error.hpp"
#include "pipeflow/frame.hpp"

namespace pipeflow {

// ---------------------------------------------------------------------------
// PPM (P6) / PGM (P5) codec. Canonical header written as
//   "P6\n<width> <height>\n255\n" followed by raw samples.
// The reader additionally tolerates netpbm '#' comments.
// ---------------------------------------------------------------------------

namespace detail {

inline int pnm_read_int(std::istream& in, const std::string& path) {
  int ch = in.get();
  // skip whitespace and comment lines
  while (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n' || ch == '#') {
    if (ch == '#') {
      while (ch != '\n' && ch != EOF) ch = in.get();
    }
    ch = in.get();
  }
  if (ch < '0' || ch > '9')
    throw Error(Errc::DecodeError, path + ": malformed PNM header");
  long value = 0;
  while (ch >= '0' && ch <= '9') {
    value = value * 10 + (ch - '0');
    if (value > kMaxDimension * 4L)
      throw Error(Errc::DecodeError, path + ": header value out of range");
    ch = in.get();
  }
  if (ch != EOF) in.unget();
  return static_cast<int>(value);
}

}  // namespace detail

inline Frame read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::DecodeError, path.string() + ": cannot open");
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  int channels = 0;
  if (m0 == 'P' && m1 == '6') channels = 3;
  else if (m0 == 'P' && m1 == '5') channels = 1;
  else throw Error(Errc::DecodeError, path.string() + ": not a P5/P6 file");

  const int width = detail::pnm_read_int(in, path.string());
  const int height = detail::pnm_read_int(in, path.string());
  const int maxval = detail::pnm_read_int(in, path.string());
  if (maxval != 255)
    throw Error(Errc::DecodeError, path.string() + ": only maxval 255 supported");
  if (width <= 0 || height <= 0 || width > kMaxDimension || height > kMaxDimension)
    throw Error(Errc::DecodeError, path.string() + ": bad dimensions in header");
  const int sep = in.get();  // single whitespace byte between header and samples
  if (sep != ' ' && sep != '\n' && sep != '\t' && sep != '\r')
    throw Error(Errc::DecodeError, path.string() + ": missing sample separator");

  std::vector<std::uint8_t> data(static_cast<std::size_t>(width) * height * channels);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (static_cast<std::size_t>(in.gcount()) != data.size())
    throw Error(Errc::DecodeError, path.string() + ": truncated sample payload");
  return make_frame(width, height, channels, 0, std::move(data));
}

inline void write_pnm(const Frame& f, const std::filesystem::path& path) {
  validate_frame(f);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::WriteError, path.string() + ": cannot open for writing");
  out << (f.channels == 3 ? "P6" : "P5") << '\n'
      << f.width << ' ' << f.height << '\n'
      << "255" << '\n';
  out.write(reinterpret_cast<const char*>(f.data.data()),
            static_cast<std::streamsize>(f.data.size()));
  if (!out) throw Error(Errc::WriteError, path.string() + ": write failed");
}

// ---------------------------------------------------------------------------
// Sequence manifest
// ---------------------------------------------------------------------------

struct VideoManifest {
  std::size_t frame_count = 0;
  int width = 0;
  int height = 0;
  long fps_num = 0;
  long fps_den = 1;
  std::string pattern;  // e.g. "frame_{:06}.ppm"

  int channels() const {
    if (pattern.size() >= 4 && pattern.compare(pattern.size() - 4, 4, ".pgm") == 0) return 1;
    return 3;
  }
};

inline constexpr const char* kManifestFileName = "manifest.json";
inline constexpr const char* kPatternPlaceholder = "{:06}";

/// Expands the zero-padded index placeholder in a manifest pattern.
inline std::string expand_pattern(const std::string& pattern, std::size_t index) {
  const auto pos = pattern.find(kPatternPlaceholder);
  if (pos == std::string::npos)
    throw Error(Errc::CorruptSequence, "pattern lacks {:06} placeholder: " + pattern);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  std::string out = pattern;
  out.replace(pos, std::string(kPatternPlaceholder).size(), buf);
  return out;
}

inline void validate_manifest(const VideoManifest& m) {
  if (m.frame_count < 1) throw Error(Errc::CorruptSequence, "manifest frame_count must be >= 1");
  if (m.fps_num <= 0 || m.fps_den <= 0)
    throw Error(Errc::CorruptSequence, "manifest fps must be positive");
  if (m.width <= 0 || m.height <= 0 || m.width > kMaxDimension || m.height > kMaxDimension)
    throw Error(Errc::CorruptSequence, "manifest dimensions out of range");
  expand_pattern(m.pattern, 0);  // placeholder must resolve
}

inline nlohmann::json manifest_to_json(const VideoManifest& m) {
  return nlohmann::json{{"frame_count", m.frame_count}, {"width", m.width},
                        {"height", m.height},           {"fps_num", m.fps_num},
                        {"fps_den", m.fps_den},         {"pattern", m.pattern}};
}

inline VideoManifest manifest_from_json(const nlohmann::json& j) {
  VideoManifest m;
  try {
    m.frame_count = j.at("frame_count").get<std::size_t>();
    m.width = j.at("width").get<int>();
    m.height = j.at("height").get<int>();
    m.fps_num = j.at("fps_num").get<long>();
    m.fps_den = j.at("fps_den").get<long>();
    m.pattern = j.at("pattern").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptSequence, std::string("manifest schema: ") + e.what());
  }
  validate_manifest(m);
  return m;
}

// ---------------------------------------------------------------------------
// Sequence reader / writer
// ---------------------------------------------------------------------------

/// Lazy, read-only view of an on-disk frame sequence. Frames are decoded on
/// demand; the reader itself holds no pixel data, so concurrent frame() calls
/// from different threads are fine.
class SequenceReader final : public FrameSource {
 public:
  static SequenceReader open(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path manifest_path = dir / kManifestFileName;
    if (!fs::exists(manifest_path))
      throw Error(Errc::ManifestMissing, manifest_path.string());
    std::ifstream in(manifest_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::CorruptSequence, std::string("manifest parse: ") + e.what());
    }
    VideoManifest m = manifest_from_json(j);
    for (std::size_t i = 0; i < m.frame_count; ++i) {
      if (!fs::exists(dir / expand_pattern(m.pattern, i)))
        throw Error(Errc::CorruptSequence,
                    "manifest claims " + std::to_string(m.frame_count) +
                        " frames but frame " + std::to_string(i) + " is missing");
    }
    return SequenceReader(dir, std::move(m));
  }

  const VideoManifest& manifest() const { return manifest_; }
  std::size_t frame_count() const override { return manifest_.frame_count; }

  Frame frame(std::size_t index) const override {
    if (index >= manifest_.frame_count)
      throw Error(Errc::CorruptSequence, "frame index " + std::to_string(index) +
                                             " out of range");
    Frame f = read_pnm(dir_ / expand_pattern(manifest_.pattern, index));
    if (f.width != manifest_.width || f.height != manifest_.height ||
        f.channels != manifest_.channels())
      throw Error(Errc::CorruptSequence,
                  "frame " + std::to_string(index) + " does not match manifest shape");
    f.index = index;
    return f;
  }

 private:
  SequenceReader(std::filesystem::path dir, VideoManifest m)
      : dir_(std::move(dir)), manifest_(std::move(m)) {}

  std::filesystem::path dir_;
  VideoManifest manifest_;
};

inline VideoManifest write_sequence(const std::vector<Frame>& frames,
                                    const std::filesystem::path& dir, long fps_num = 30,
                                    long fps_den = 1) {
  namespace fs = std::filesystem;
  if (frames.empty()) throw Error(Errc::EmptyInput, "refusing to write empty sequence");
  if (fps_num <= 0 || fps_den <= 0) throw Error(Errc::BadConfig, "fps must be positive");
  const Frame& first = frames.front();
  validate_frame(first);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!frames[i].same_shape(first))
      throw Error(Errc::DimensionMismatch,
                  "frame " + std::to_string(i) + " differs in shape from frame 0");
    if (frames[i].index != i)
      throw Error(Errc::BadConfig, "frame indices must be contiguous from 0");
  }

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::WriteError, dir.string() + ": " + ec.message());

  VideoManifest m;
  m.frame_count = frames.size();
  m.width = first.width;
  m.height = first.height;
  m.fps_num = fps_num;
  m.fps_den = fps_den;
  m.pattern = first.channels == 3 ? "frame_{:06}.ppm" : "frame_{:06}.pgm";

  for (std::size_t i = 0; i < frames.size(); ++i)
    write_pnm(frames[i], dir / expand_pattern(m.pattern, i));

  std::ofstream out(dir / kManifestFileName, std::ios::trunc);
  if (!out) throw Error(Errc::WriteError, "cannot write manifest");
  out << manifest_to_json(m).dump(2) << '\n';
  if (!out) throw Error(Errc::WriteError, "manifest write failed");
  return m;
}

}  // namespace pipeflow
