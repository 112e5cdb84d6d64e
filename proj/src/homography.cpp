#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "irtk/errors.hpp"
#include "irtk/registration.hpp"

namespace irtk {

namespace {
constexpr double kDetEpsilon = 1e-12;
}

Homography::Homography(const Eigen::Matrix3d &m) {
  if (!m.allFinite()) throw DegenerateError("homography has non-finite entries");
  if (std::abs(m(2, 2)) < kDetEpsilon) throw DegenerateError("homography element (3,3) vanishes");
  m_ = m / m(2, 2);
  if (std::abs(m_.determinant()) <= kDetEpsilon) throw DegenerateError("homography is singular");
}

Homography Homography::translation(double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return Homography(m);
}

Homography Homography::inverse() const { return Homography(m_.inverse()); }

Homography Homography::operator*(const Homography &other) const { return Homography(m_ * other.m_); }

Vec2 remap_point(const Homography &h, const Vec2 &p) {
  const auto &m = h.matrix();
  const double w = m(2, 0) * p.x + m(2, 1) * p.y + m(2, 2);
  if (std::abs(w) < kDetEpsilon || !std::isfinite(w)) throw PointAtInfinityError("point maps to infinity");
  return {(m(0, 0) * p.x + m(0, 1) * p.y + m(0, 2)) / w, (m(1, 0) * p.x + m(1, 1) * p.y + m(1, 2)) / w};
}

namespace {

// Similarity taking the points to zero centroid and mean distance sqrt(2).
Eigen::Matrix3d normalizing_transform(const std::vector<Vec2> &pts) {
  Vec2 c{0.0, 0.0};
  for (const auto &p : pts) c += p;
  c = (1.0 / static_cast<double>(pts.size())) * c;
  double mean_dist = 0.0;
  for (const auto &p : pts) mean_dist += distance(p, c);
  mean_dist /= static_cast<double>(pts.size());
  if (mean_dist < kDetEpsilon) throw DegenerateError("all points coincide");
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0, -s * c.x, 0, s, -s * c.y, 0, 0, 1;
  return t;
}

Vec2 apply(const Eigen::Matrix3d &t, const Vec2 &p) { return {t(0, 0) * p.x + t(0, 2), t(1, 1) * p.y + t(1, 2)}; }

bool has_collinear_triple(const std::vector<Vec2> &pts) {
  // Points are normalized to unit-ish scale, so an absolute tolerance works.
  constexpr double kAreaTol = 1e-9;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) {
        const Vec2 a = pts[j] - pts[i], b = pts[k] - pts[i];
        if (std::abs(a.x * b.y - a.y * b.x) < kAreaTol) return true;
      }
  return false;
}

}  // namespace

Homography solve_homography_dlt(std::span<const Correspondence> correspondences) {
  const std::size_t n = correspondences.size();
  if (n < 4) throw PreconditionError("homography needs at least 4 correspondences");
  std::vector<Vec2> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = correspondences[i].p;
    dst[i] = correspondences[i].q;
    if (!std::isfinite(src[i].x) || !std::isfinite(src[i].y) || !std::isfinite(dst[i].x) ||
        !std::isfinite(dst[i].y))
      throw PreconditionError("non-finite correspondence");
  }
  const Eigen::Matrix3d ts = normalizing_transform(src);
  const Eigen::Matrix3d td = normalizing_transform(dst);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = apply(ts, src[i]);
    dst[i] = apply(td, dst[i]);
  }
  // The exhaustive triple test is cubic, so it only runs on small sets; large
  // sets rely on the rank test below.
  if (n <= 8 && has_collinear_triple(src)) throw DegenerateError("three source points are collinear");

  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = src[i].x, y = src[i].y, u = dst[i].x, v = dst[i].y;
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  // Pad to a square system so the full V is available for n == 4.
  Eigen::MatrixXd square = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(9, a.rows()), 9);
  square.topRows(a.rows()) = a;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(square, Eigen::ComputeFullV);
  const auto &sv = svd.singularValues();
  if (sv(7) < 1e-9 * sv(0)) throw DegenerateError("correspondences do not determine a unique homography");
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return Homography(td.inverse() * hn * ts);
}

RansacResult estimate_homography_ransac(std::span<const Correspondence> correspondences, const RansacParams &params) {
  const std::size_t n = correspondences.size();
  if (n < 4) throw PreconditionError("RANSAC needs at least 4 correspondences");
  if (!(params.inlier_threshold > 0.0)) throw PreconditionError("inlier threshold must be positive");
  if (params.max_iterations < 1 || params.min_inliers < 1)
    throw PreconditionError("RANSAC iteration and inlier counts must be positive");

  const double thr2 = params.inlier_threshold * params.inlier_threshold;
  auto consensus = [&](const Homography &h) {
    std::vector<std::size_t> in;
    for (std::size_t i = 0; i < n; ++i) {
      try {
        const Vec2 r = remap_point(h, correspondences[i].p) - correspondences[i].q;
        if (r.x * r.x + r.y * r.y <= thr2) in.push_back(i);
      } catch (const PointAtInfinityError &) {
      }
    }
    return in;
  };

  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> best;
  std::array<Correspondence, 4> sample;
  for (int it = 0; it < params.max_iterations; ++it) {
    std::array<std::size_t, 4> idx{};
    for (int k = 0; k < 4; ++k) {
      bool fresh;
      do {
        idx[k] = pick(rng);
        fresh = std::find(idx.begin(), idx.begin() + k, idx[k]) == idx.begin() + k;
      } while (!fresh);
      sample[k] = correspondences[idx[k]];
    }
    try {
      auto in = consensus(solve_homography_dlt(sample));
      if (in.size() > best.size()) best = std::move(in);
    } catch (const DegenerateError &) {
    }
  }
  if (best.size() < static_cast<std::size_t>(params.min_inliers) || best.size() < 4)
    throw EstimationError("RANSAC consensus of " + std::to_string(best.size()) + " is below the minimum of " +
                          std::to_string(params.min_inliers));

  std::vector<Correspondence> chosen;
  chosen.reserve(best.size());
  for (auto i : best) chosen.push_back(correspondences[i]);
  RansacResult result{solve_homography_dlt(chosen), {}};
  result.inliers = consensus(result.model);
  if (result.inliers.size() < static_cast<std::size_t>(params.min_inliers))
    throw EstimationError("refit model lost its consensus");
  return result;
}

std::vector<Homography> chain_to_reference(std::span<const Homography> steps) {
  std::vector<Homography> out;
  out.reserve(steps.size() + 1);
  out.push_back(Homography::identity());
  for (const auto &s : steps) out.push_back(out.back() * s);
  return out;
}

std::vector<Homography> load_transforms(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Homography> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::vector<double> vals;
    std::string tok;
    while (ss >> tok) {
      char *end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0' || !std::isfinite(v))
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + tok + "'");
      vals.push_back(v);
    }
    if (vals.empty()) continue;
    if (vals.size() != 9)
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 9 values, got " +
                       std::to_string(vals.size()));
    Eigen::Matrix3d m;
    m << vals[0], vals[1], vals[2], vals[3], vals[4], vals[5], vals[6], vals[7], vals[8];
    out.emplace_back(m);
  }
  return out;
}

void save_transforms(std::span<const Homography> transforms, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[64];
  for (const auto &h : transforms) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", h(r, c));
        out << buf << (r == 2 && c == 2 ? '\n' : ' ');
      }
  }
}

}  // namespace irtk
