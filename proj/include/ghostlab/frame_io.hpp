#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "ghostlab/error.hpp"
#include "ghostlab/speckle.hpp"

// Frame-stack files:
//   "GIFR" | version u16 | width u32 | height u32 | frame count u32 |
//   frames as row-major little-endian IEEE-754 binary64.
// Ghost images use the same layout with a frame count of 1.

namespace ghostlab {

inline constexpr std::array<char, 4> kFrameMagic{'G', 'I', 'F', 'R'};
inline constexpr std::uint16_t kFrameVersion = 1;
inline constexpr std::size_t kFrameHeaderBytes = 4 + 2 + 4 + 4 + 4;

namespace detail {

template <class T>
void put_le(std::vector<unsigned char>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

template <class T>
T get_le(const unsigned char* in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(static_cast<U>(in[i]) << (8 * i));
  return std::bit_cast<T>(bits);
}

}  // namespace detail

/// Streams frames to a GIFR file whose frame count is fixed up front.
class FrameWriter {
 public:
  FrameWriter(const std::filesystem::path& path, int width, int height, std::uint32_t frame_count)
      : out_(path, std::ios::binary | std::ios::trunc), width_(width), height_(height), expected_(frame_count) {
    if (!out_) throw FormatError("cannot open '" + path.string() + "' for writing");
    if (width <= 0 || height <= 0) throw FormatError("frame dimensions must be positive");
    std::vector<unsigned char> header(kFrameMagic.begin(), kFrameMagic.end());
    detail::put_le(header, kFrameVersion);
    detail::put_le(header, static_cast<std::uint32_t>(width));
    detail::put_le(header, static_cast<std::uint32_t>(height));
    detail::put_le(header, frame_count);
    write(header);
  }

  void append(std::span<const double> pixels) {
    if (pixels.size() != static_cast<std::size_t>(width_) * height_) throw FormatError("frame size mismatch");
    if (written_ >= expected_) throw FormatError("more frames written than declared");
    std::vector<unsigned char> bytes;
    bytes.reserve(pixels.size() * 8);
    for (double v : pixels) detail::put_le(bytes, v);
    write(bytes);
    ++written_;
  }

  void append(const SpeckleFrame& frame) { append(frame.pixels); }

  void close() {
    if (written_ != expected_)
      throw FormatError("declared " + std::to_string(expected_) + " frames but wrote " + std::to_string(written_));
    out_.close();
    if (!out_) throw FormatError("error closing frame file");
  }

 private:
  void write(const std::vector<unsigned char>& bytes) {
    out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out_) throw FormatError("write failed");
  }

  std::ofstream out_;
  int width_;
  int height_;
  std::uint32_t expected_;
  std::uint32_t written_ = 0;
};

inline void write_frames(const std::filesystem::path& path, std::span<const SpeckleFrame> frames) {
  if (frames.empty()) throw FormatError("no frames to write");
  FrameWriter writer(path, frames.front().width, frames.front().height, static_cast<std::uint32_t>(frames.size()));
  for (const auto& f : frames) {
    if (f.width != frames.front().width || f.height != frames.front().height) throw FormatError("frame dimensions differ");
    writer.append(f);
  }
  writer.close();
}

inline std::vector<SpeckleFrame> read_frames(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::array<unsigned char, kFrameHeaderBytes> header{};
  if (!in.read(reinterpret_cast<char*>(header.data()), header.size())) throw FormatError("truncated header");
  if (!std::equal(kFrameMagic.begin(), kFrameMagic.end(), header.begin())) throw FormatError("bad magic bytes");
  const auto version = detail::get_le<std::uint16_t>(header.data() + 4);
  if (version != kFrameVersion) throw FormatError("unsupported frame file version " + std::to_string(version));
  const auto width = detail::get_le<std::uint32_t>(header.data() + 6);
  const auto height = detail::get_le<std::uint32_t>(header.data() + 10);
  const auto count = detail::get_le<std::uint32_t>(header.data() + 14);
  if (width == 0 || height == 0 || width > (1u << 20) || height > (1u << 20)) throw FormatError("bad frame dimensions");
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  std::vector<SpeckleFrame> frames;
  frames.reserve(count);
  std::vector<unsigned char> buffer(pixels * 8);
  for (std::uint32_t f = 0; f < count; ++f) {
    if (!in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size())))
      throw FormatError("truncated frame data at frame " + std::to_string(f));
    SpeckleFrame frame(static_cast<int>(width), static_cast<int>(height));
    for (std::size_t i = 0; i < pixels; ++i) frame.pixels[i] = detail::get_le<double>(buffer.data() + 8 * i);
    frames.push_back(std::move(frame));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after declared frames");
  return frames;
}

inline void write_ghost_image(const std::filesystem::path& path, const GhostImage& image) {
  FrameWriter writer(path, image.width, image.height, 1);
  writer.append(image.values);
  writer.close();
}

/// Plain-text 16-bit PGM (P2), min-max scaled over the finite values;
/// non-finite pixels map to 0.
inline void write_pgm(const std::filesystem::path& path, int width, int height, std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(width) * height) throw FormatError("PGM size mismatch");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : values)
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double span = (std::isfinite(lo) && hi > lo) ? hi - lo : 1.0;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << "P2\n" << width << ' ' << height << "\n65535\n";
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double v = values[static_cast<std::size_t>(r) * width + c];
      const long level = std::isfinite(v) && std::isfinite(lo) ? std::lround((v - lo) / span * 65535.0) : 0;
      out << (c ? " " : "") << std::clamp(level, 0L, 65535L);
    }
    out << '\n';
  }
  if (!out) throw FormatError("PGM write failed");
}

inline void write_pgm(const std::filesystem::path& path, const GhostImage& image) {
  write_pgm(path, image.width, image.height, image.values);
}

}  // namespace ghostlab
