#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "irtk/geometry.hpp"

namespace irtk {

/// Single-channel 16-bit intensity image with its frame number.
class Frame {
 public:
  Frame() = default;
  Frame(int width, int height, std::size_t index = 0);
  Frame(int width, int height, std::vector<std::uint16_t> pixels, std::size_t index = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t index() const { return index_; }
  void set_index(std::size_t index) { index_ = index; }
  bool empty() const { return pixels_.empty(); }

  std::uint16_t at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint16_t &at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<const std::uint16_t> pixels() const { return pixels_; }
  std::span<std::uint16_t> pixels() { return pixels_; }

  friend bool operator==(const Frame &, const Frame &) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::size_t index_ = 0;
  std::vector<std::uint16_t> pixels_;
};

enum class Polarity : std::int8_t { bright = 1, dark = -1 };

/// Per-pixel interest labels: 0 background, +1 bright, -1 dark.
struct LabelMask {
  int width = 0;
  int height = 0;
  std::vector<std::int8_t> labels;

  LabelMask() = default;
  LabelMask(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}

  std::int8_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::int8_t &at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// One maximal 8-connected same-polarity region of a LabelMask.
struct Component {
  Polarity polarity = Polarity::bright;
  std::vector<Pixel> pixels;  // raster order
  Pixel representative;
};

/// Reads a binary PGM (P5). 16-bit samples are big-endian; 8-bit samples are
/// widened without scaling.
Frame load_frame(const std::filesystem::path &path, std::size_t index = 0);

/// Writes a binary PGM (P5) with maxval 65535.
void save_frame(const Frame &frame, const std::filesystem::path &path);

/// Components ordered by (min row, min col), ties by first raster pixel.
std::vector<Component> connected_components(const LabelMask &mask);

/// Same partition as connected_components, without materializing pixel lists.
std::size_t count_components(const LabelMask &mask);

/// Mirror index into [0, n) without repeating the edge sample (dcb|abcd|cba),
/// applied periodically for offsets larger than the extent.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace irtk
