#include <algorithm>
#include <cmath>
#include <vector>

#include "irtk/errors.hpp"
#include "irtk/registration.hpp"

namespace irtk {

namespace {

constexpr int kTensorRadius = 2;  // 5x5 structure-tensor window
constexpr int kPyramidLevels = 2;  // search starts at 1/4 resolution
constexpr int kRefineRadius = 2;

struct Image {
  int w = 0, h = 0;
  std::vector<float> px;
  float at(int x, int y) const { return px[static_cast<std::size_t>(y) * w + x]; }
};

Image to_image(const Frame &f) {
  Image im;
  im.w = f.width();
  im.h = f.height();
  const auto src = f.pixels();
  im.px.assign(src.begin(), src.end());
  return im;
}

Image half_size(const Image &in) {
  Image out;
  out.w = std::max(1, in.w / 2);
  out.h = std::max(1, in.h / 2);
  out.px.resize(static_cast<std::size_t>(out.w) * out.h);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      const int x0 = std::min(2 * x, in.w - 1), x1 = std::min(2 * x + 1, in.w - 1);
      const int y0 = std::min(2 * y, in.h - 1), y1 = std::min(2 * y + 1, in.h - 1);
      out.px[static_cast<std::size_t>(y) * out.w + x] =
          0.25f * (in.at(x0, y0) + in.at(x1, y0) + in.at(x0, y1) + in.at(x1, y1));
    }
  return out;
}

std::vector<Image> pyramid(const Frame &f) {
  std::vector<Image> levels{to_image(f)};
  for (int l = 0; l < kPyramidLevels; ++l) levels.push_back(half_size(levels.back()));
  return levels;
}

// Normalized cross-correlation of the (2*half+1)^2 patches centered at
// (ax, ay) in a and (bx, by) in b; -1 when a patch leaves its image or is flat.
double ncc(const Image &a, int ax, int ay, const Image &b, int bx, int by, int half) {
  if (ax - half < 0 || ay - half < 0 || ax + half >= a.w || ay + half >= a.h) return -1.0;
  if (bx - half < 0 || by - half < 0 || bx + half >= b.w || by + half >= b.h) return -1.0;
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (int dy = -half; dy <= half; ++dy) {
    const float *ra = &a.px[static_cast<std::size_t>(ay + dy) * a.w + ax - half];
    const float *rb = &b.px[static_cast<std::size_t>(by + dy) * b.w + bx - half];
    for (int dx = 0; dx <= 2 * half; ++dx) {
      const double va = ra[dx], vb = rb[dx];
      sa += va;
      sb += vb;
      saa += va * va;
      sbb += vb * vb;
      sab += va * vb;
    }
  }
  const double n = (2.0 * half + 1) * (2.0 * half + 1);
  const double va = saa - sa * sa / n, vb = sbb - sb * sb / n;
  if (va <= 1e-9 || vb <= 1e-9) return -1.0;
  return (sab - sa * sb / n) / std::sqrt(va * vb);
}

struct Hit {
  int x = 0, y = 0;
  double score = -2.0;
};

Hit search(const Image &a, int ax, int ay, const Image &b, int cx, int cy, int radius, int half) {
  Hit best;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      const double s = ncc(a, ax, ay, b, cx + dx, cy + dy, half);
      // Ties go to the smaller displacement so identical frames match in place.
      const bool better = s > best.score ||
                          (s == best.score && std::abs(dx) + std::abs(dy) < std::abs(best.x - cx) + std::abs(best.y - cy));
      if (better) best = {cx + dx, cy + dy, s};
    }
  return best;
}

// Best match in b for pixel (x, y) of a within `radius` full-resolution
// pixels: exhaustive at the coarsest level, then local refinement per level.
Hit track(const std::vector<Image> &pa, const std::vector<Image> &pb, int x, int y, int radius, int half) {
  const int top = kPyramidLevels;
  const int coarse_radius = (radius + (1 << top) - 1) >> top;
  Hit hit = search(pa[top], x >> top, y >> top, pb[top], x >> top, y >> top, coarse_radius, half);
  for (int l = top - 1; l >= 0; --l) {
    const int ax = x >> l, ay = y >> l;
    // A coarse level that lost the patch falls back to searching around the
    // unmoved position.
    const int cx = hit.score > -1.0 ? 2 * hit.x : ax, cy = hit.score > -1.0 ? 2 * hit.y : ay;
    hit = search(pa[l], ax, ay, pb[l], cx, cy, kRefineRadius, half);
  }
  return hit;
}

// Offset of the vertex of the parabola through (-1,l), (0,c), (1,r).
double parabola_offset(double l, double c, double r) {
  const double denom = l - 2.0 * c + r;
  if (!(denom < -1e-12)) return 0.0;
  return std::clamp(0.5 * (l - r) / denom, -0.5, 0.5);
}

}  // namespace

std::vector<Pixel> detect_corners(const Frame &frame, const MatchParams &params) {
  const int w = frame.width(), h = frame.height();
  const int margin = params.patch_size / 2 + 1;
  if (w <= 2 * margin || h <= 2 * margin) return {};
  const Image img = to_image(frame);
  std::vector<double> ixx(img.px.size(), 0.0), iyy(img.px.size(), 0.0), ixy(img.px.size(), 0.0);
  for (int y = 1; y + 1 < h; ++y)
    for (int x = 1; x + 1 < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      // Sobel derivatives.
      const double gx = (img.px[i - w + 1] + 2.0 * img.px[i + 1] + img.px[i + w + 1]) -
                        (img.px[i - w - 1] + 2.0 * img.px[i - 1] + img.px[i + w - 1]);
      const double gy = (img.px[i + w - 1] + 2.0 * img.px[i + w] + img.px[i + w + 1]) -
                        (img.px[i - w - 1] + 2.0 * img.px[i - w] + img.px[i - w + 1]);
      ixx[i] = gx * gx;
      iyy[i] = gy * gy;
      ixy[i] = gx * gy;
    }

  struct Scored {
    double r;
    int x, y;
  };
  std::vector<Scored> cands;
  const int r = kTensorRadius;
  for (int y = margin; y < h - margin; ++y)
    for (int x = margin; x < w - margin; ++x) {
      double a = 0, b = 0, c = 0;
      for (int dy = -r; dy <= r; ++dy) {
        const std::size_t row = static_cast<std::size_t>(y + dy) * w;
        for (int dx = -r; dx <= r; ++dx) {
          a += ixx[row + x + dx];
          b += ixy[row + x + dx];
          c += iyy[row + x + dx];
        }
      }
      const double response = 0.5 * (a + c) - std::sqrt(0.25 * (a - c) * (a - c) + b * b);
      if (response > 0.0) cands.push_back({response, x, y});
    }
  std::stable_sort(cands.begin(), cands.end(), [](const Scored &p, const Scored &q) { return p.r > q.r; });

  // Greedy suppression, with accepted corners bucketed on a coarse grid.
  const int rad = std::max(1, params.nms_radius);
  const int gw = w / rad + 1, gh = h / rad + 1;
  std::vector<std::vector<Pixel>> grid(static_cast<std::size_t>(gw) * gh);
  std::vector<Pixel> out;
  for (const auto &c : cands) {
    if (static_cast<int>(out.size()) >= params.max_corners) break;
    const int gx = c.x / rad, gy = c.y / rad;
    bool suppressed = false;
    for (int yy = std::max(0, gy - 1); yy <= std::min(gh - 1, gy + 1) && !suppressed; ++yy)
      for (int xx = std::max(0, gx - 1); xx <= std::min(gw - 1, gx + 1) && !suppressed; ++xx)
        for (const auto &p : grid[static_cast<std::size_t>(yy) * gw + xx]) {
          const long dx = p.x - c.x, dy = p.y - c.y;
          if (dx * dx + dy * dy <= static_cast<long>(rad) * rad) {
            suppressed = true;
            break;
          }
        }
    if (suppressed) continue;
    grid[static_cast<std::size_t>(gy) * gw + gx].push_back({c.x, c.y});
    out.push_back({c.x, c.y});
  }
  return out;
}

std::vector<Correspondence> match_frames(const Frame &a, const Frame &b, const MatchParams &params) {
  if (a.width() != b.width() || a.height() != b.height())
    throw PreconditionError("match_frames needs frames of equal size");
  if (params.patch_size < 3 || params.patch_size % 2 == 0) throw PreconditionError("patch size must be odd and >= 3");
  const auto corners = detect_corners(a, params);
  if (corners.empty()) return {};
  const int half = params.patch_size / 2;
  const auto pa = pyramid(a);
  const auto pb = pyramid(b);

  std::vector<Correspondence> out;
  for (const auto &c : corners) {
    const Hit fwd = track(pa, pb, c.x, c.y, params.search_radius, half);
    if (fwd.score < params.min_ncc) continue;
    if (std::hypot(fwd.x - c.x, fwd.y - c.y) > params.search_radius) continue;
    // Mutual check: the match must lead back to the corner.
    const Hit back = track(pb, pa, fwd.x, fwd.y, params.search_radius, half);
    if (std::abs(back.x - c.x) > 1 || std::abs(back.y - c.y) > 1) continue;

    Vec2 q{static_cast<double>(fwd.x), static_cast<double>(fwd.y)};
    if (fwd.score < 1.0 - 1e-9) {
      const Image &ia = pa[0], &ib = pb[0];
      q.x += parabola_offset(ncc(ia, c.x, c.y, ib, fwd.x - 1, fwd.y, half), fwd.score,
                             ncc(ia, c.x, c.y, ib, fwd.x + 1, fwd.y, half));
      q.y += parabola_offset(ncc(ia, c.x, c.y, ib, fwd.x, fwd.y - 1, half), fwd.score,
                             ncc(ia, c.x, c.y, ib, fwd.x, fwd.y + 1, half));
    }
    out.push_back({to_vec(c), q});
  }
  return out;
}

}  // namespace irtk
