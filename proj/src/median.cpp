#include <array>
#include <vector>

#include "irtk/candidates.hpp"
#include "irtk/errors.hpp"

namespace irtk {

namespace {

// Two-level (256 x 256) histogram over 16-bit values. The coarse cursor and
// the count below it are maintained across updates so that consecutive
// medians only walk a few coarse bins.
class SlidingMedian {
 public:
  SlidingMedian() : fine_(65536, 0) {}

  void add(std::uint16_t v) {
    ++fine_[v];
    ++coarse_[v >> 8];
    if ((v >> 8) < cursor_) ++below_;
  }

  void remove(std::uint16_t v) {
    --fine_[v];
    --coarse_[v >> 8];
    if ((v >> 8) < cursor_) --below_;
  }

  // Value of 0-based rank k.
  std::uint16_t select(int k) {
    while (below_ + coarse_[cursor_] <= k) {
      below_ += coarse_[cursor_];
      ++cursor_;
    }
    while (below_ > k) {
      --cursor_;
      below_ -= coarse_[cursor_];
    }
    int acc = below_;
    const int base = cursor_ << 8;
    for (int j = 0;; ++j) {
      acc += fine_[base + j];
      if (acc > k) return static_cast<std::uint16_t>(base + j);
    }
  }

 private:
  std::vector<int> fine_;
  std::array<int, 256> coarse_{};
  int cursor_ = 0;
  int below_ = 0;
};

}  // namespace

std::vector<std::uint16_t> median_filter(const Frame &frame, int window) {
  if (window < 3 || window % 2 == 0) throw PreconditionError("median window must be odd and >= 3");
  const int w = frame.width(), h = frame.height();
  const int r = window / 2;
  const int rank = (window * window) / 2;

  std::vector<int> col_map(static_cast<std::size_t>(w) + 2 * r + 1);
  for (int x = -r; x <= w + r; ++x) col_map[x + r] = reflect_index(x, w);
  std::vector<const std::uint16_t *> rows(window);

  std::vector<std::uint16_t> out(static_cast<std::size_t>(w) * h);
  SlidingMedian hist;
  const auto px = frame.pixels();
  for (int y = 0; y < h; ++y) {
    for (int dy = -r; dy <= r; ++dy)
      rows[dy + r] = px.data() + static_cast<std::size_t>(reflect_index(y + dy, h)) * w;
    for (int dx = -r; dx <= r; ++dx) {
      const int cx = col_map[dx + r];
      for (const auto *row : rows) hist.add(row[cx]);
    }
    std::uint16_t *dst = out.data() + static_cast<std::size_t>(y) * w;
    dst[0] = hist.select(rank);
    for (int x = 1; x < w; ++x) {
      const int leave = col_map[x - 1];          // column x - r - 1
      const int enter = col_map[x + 2 * r];      // column x + r
      for (const auto *row : rows) {
        hist.remove(row[leave]);
        hist.add(row[enter]);
      }
      dst[x] = hist.select(rank);
    }
    for (int dx = -r; dx <= r; ++dx) {
      const int cx = col_map[w - 1 + dx + r];
      for (const auto *row : rows) hist.remove(row[cx]);
    }
  }
  return out;
}

}  // namespace irtk
