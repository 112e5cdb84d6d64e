#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "irtk/geometry.hpp"
#include "irtk/imaging.hpp"

namespace irtk {

/// 3x3 projective transform normalized so that element (2,2) is 1.
class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}
  /// Normalizes by m(2,2); throws DegenerateError when it vanishes or the
  /// matrix is singular.
  explicit Homography(const Eigen::Matrix3d &m);

  static Homography identity() { return {}; }
  static Homography translation(double tx, double ty);

  const Eigen::Matrix3d &matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  Homography inverse() const;
  /// (this * other)(p) == this(other(p))
  Homography operator*(const Homography &other) const;

 private:
  Eigen::Matrix3d m_;
};

struct Correspondence {
  Vec2 p;  // in frame A
  Vec2 q;  // in frame B
};

struct RansacParams {
  int max_iterations = 1000;
  double inlier_threshold = 2.0;
  int min_inliers = 12;
  std::uint64_t seed = 0;
};

struct RansacResult {
  Homography model;  // maps p to q
  std::vector<std::size_t> inliers;
};

/// Projective application with perspective division.
Vec2 remap_point(const Homography &h, const Vec2 &p);

/// Normalized DLT fit mapping each p to q (least squares for n > 4).
Homography solve_homography_dlt(std::span<const Correspondence> correspondences);

RansacResult estimate_homography_ransac(std::span<const Correspondence> correspondences, const RansacParams &params);

/// Entry i maps frame i into frame 0. steps[k] maps frame k+1 into frame k,
/// so n steps give n + 1 entries.
std::vector<Homography> chain_to_reference(std::span<const Homography> steps);

struct MatchParams {
  int max_corners = 500;
  int nms_radius = 8;
  int search_radius = 32;
  int patch_size = 11;
  double min_ncc = 0.8;
};

/// Harris-style (minimum eigenvalue) corners in `a`, matched into `b` by
/// normalized cross-correlation of patches, mutual-best filtered and refined
/// to sub-pixel accuracy. p is in a, q in b.
std::vector<Correspondence> match_frames(const Frame &a, const Frame &b, const MatchParams &params = {});

/// Corner positions (exposed for diagnostics), strongest first.
std::vector<Pixel> detect_corners(const Frame &frame, const MatchParams &params = {});

/// One 3x3 matrix per line, 9 whitespace-separated reals in row-major order;
/// blank lines and '#' comments are skipped.
std::vector<Homography> load_transforms(const std::filesystem::path &path);
void save_transforms(std::span<const Homography> transforms, const std::filesystem::path &path);

}  // namespace irtk
