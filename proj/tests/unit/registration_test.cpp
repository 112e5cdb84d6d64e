#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "irtk/errors.hpp"
#include "irtk/registration.hpp"
#include "oracles.hpp"

using namespace irtk;

namespace {

double max_abs_diff(const Eigen::Matrix3d &a, const Eigen::Matrix3d &b) { return (a - b).cwiseAbs().maxCoeff(); }

std::vector<Correspondence> planted(const Eigen::Matrix3d &m, std::size_t n, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u(0.0, 200.0);
  std::vector<Correspondence> out;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p{u(rng), u(rng)};
    out.push_back({p, oracle::apply(m, p)});
  }
  return out;
}

Frame shifted_copy(const Frame &src, int dx, int dy) {
  Frame out(src.width(), src.height());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      out.at(x, y) = src.at(std::clamp(x - dx, 0, src.width() - 1), std::clamp(y - dy, 0, src.height() - 1));
  return out;
}

}  // namespace

TEST_SUITE("registration") {
  TEST_CASE("DLT recovers exact models") {
    const std::vector<Correspondence> same{{{0, 0}, {0, 0}}, {{10, 0}, {10, 0}}, {{0, 10}, {0, 10}}, {{10, 10}, {10, 10}}};
    CHECK(max_abs_diff(solve_homography_dlt(same).matrix(), Eigen::Matrix3d::Identity()) < 1e-9);

    std::vector<Correspondence> moved;
    for (const auto &c : same) moved.push_back({c.p, c.p + Vec2{5, 3}});
    Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
    t(0, 2) = 5;
    t(1, 2) = 3;
    CHECK(max_abs_diff(solve_homography_dlt(moved).matrix(), t) < 1e-9);

    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 30; ++trial) {
      const Eigen::Matrix3d m = oracle::random_homography(rng);
      const auto corr = planted(m, 4 + trial % 20, rng);
      CHECK(max_abs_diff(solve_homography_dlt(corr).matrix(), m) < 1e-6);
    }
  }

  TEST_CASE("DLT rejects degenerate input") {
    const std::vector<Correspondence> collinear{{{0, 0}, {1, 1}}, {{1, 1}, {2, 2}}, {{2, 2}, {3, 3}}, {{0, 5}, {1, 6}}};
    CHECK_THROWS_AS(solve_homography_dlt(collinear), DegenerateError);
    const std::vector<Correspondence> three{{{0, 0}, {1, 1}}, {{1, 0}, {2, 2}}, {{0, 1}, {3, 3}}};
    CHECK_THROWS_AS(solve_homography_dlt(three), PreconditionError);
    std::vector<Correspondence> line;
    for (int i = 0; i < 12; ++i) line.push_back({{double(i), 2.0 * i}, {double(i), 2.0 * i}});
    CHECK_THROWS_AS(solve_homography_dlt(line), DegenerateError);
  }

  TEST_CASE("RANSAC on exact and contaminated data") {
    std::mt19937_64 rng(2);
    std::vector<Correspondence> exact;
    for (int i = 0; i < 100; ++i) {
      const Vec2 p{double(i % 10) * 13.0, double(i / 10) * 11.0};
      exact.push_back({p, p + Vec2{7, -4}});
    }
    const auto r = estimate_homography_ransac(exact, {});
    CHECK(r.inliers.size() == 100);
    CHECK(std::abs(r.model(0, 2) - 7) < 1e-9);
    CHECK(std::abs(r.model(1, 2) + 4) < 1e-9);

    const Eigen::Matrix3d m = oracle::random_homography(rng);
    auto corr = planted(m, 140, rng);
    std::normal_distribution<double> noise(0.0, 0.5);
    for (auto &c : corr) c.q += Vec2{noise(rng), noise(rng)};
    std::uniform_real_distribution<double> u(-50.0, 250.0);
    for (int i = 0; i < 60; ++i) corr.push_back({{u(rng), u(rng)}, {u(rng), u(rng)}});
    RansacParams params;
    params.seed = 3;
    const auto fit = estimate_homography_ransac(corr, params);
    double worst = 0.0;
    for (std::size_t i = 0; i < 140; ++i) worst = std::max(worst, distance(remap_point(fit.model, corr[i].p), oracle::apply(m, corr[i].p)));
    CHECK(worst < 1.0);

    const auto again = estimate_homography_ransac(corr, params);
    CHECK(again.model.matrix() == fit.model.matrix());
    CHECK(again.inliers == fit.inliers);

    CHECK_THROWS_AS(estimate_homography_ransac(std::span(corr).first(3), params), PreconditionError);
    params.min_inliers = 500;
    CHECK_THROWS_AS(estimate_homography_ransac(corr, params), EstimationError);
  }

  TEST_CASE("remap_point cases and inverse round trip") {
    CHECK(remap_point(Homography::identity(), {3, 7}) == Vec2{3, 7});
    CHECK(remap_point(Homography::translation(5, 3), {0, 0}) == Vec2{5, 3});
    Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
    s(0, 0) = s(1, 1) = 2;
    CHECK(remap_point(Homography(s), {1, 1}) == Vec2{2, 2});

    Eigen::Matrix3d vanishing = Eigen::Matrix3d::Identity();
    vanishing(2, 0) = -1.0;
    CHECK_THROWS_AS(remap_point(Homography(vanishing), {1.0, 0.0}), PointAtInfinityError);

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 300.0);
    for (int trial = 0; trial < 100; ++trial) {
      const Homography h(oracle::random_homography(rng));
      const Vec2 p{u(rng), u(rng)};
      const Vec2 q = remap_point(h.inverse(), remap_point(h, p));
      CHECK(distance(p, q) < 1e-9);
      CHECK(distance(remap_point(h, p), oracle::apply(h.matrix(), p)) < 1e-9);
    }
  }

  TEST_CASE("homography construction is validated and normalized") {
    Eigen::Matrix3d m = 2.0 * Eigen::Matrix3d::Identity();
    CHECK(Homography(m).matrix() == Eigen::Matrix3d::Identity());
    CHECK_THROWS_AS(Homography(Eigen::Matrix3d::Zero()), DegenerateError);
    Eigen::Matrix3d singular = Eigen::Matrix3d::Identity();
    singular(1, 1) = 0;
    CHECK_THROWS_AS(Homography{singular}, DegenerateError);
  }

  TEST_CASE("chaining composes to the reference frame") {
    const std::vector<Homography> ids(3);
    for (const auto &h : chain_to_reference(ids)) CHECK(h.matrix() == Eigen::Matrix3d::Identity());

    const std::vector<Homography> two{Homography::translation(1, 0), Homography::translation(1, 0)};
    const auto c = chain_to_reference(two);
    REQUIRE(c.size() == 3);
    CHECK(max_abs_diff(c[2].matrix(), Homography::translation(2, 0).matrix()) < 1e-12);

    const std::vector<Homography> turn{Homography::translation(1, 0), Homography::translation(0, 1)};
    CHECK(distance(remap_point(chain_to_reference(turn)[2], {0, 0}), {1, 1}) < 1e-12);

    std::mt19937_64 rng(5);
    std::vector<Homography> steps;
    for (int i = 0; i < 8; ++i) steps.emplace_back(oracle::random_homography(rng, 3.0, 1e-5));
    const auto chain = chain_to_reference(steps);
    for (std::size_t i = 1; i < chain.size(); ++i) {
      const Eigen::Matrix3d step = (chain[i - 1].inverse() * chain[i]).matrix();
      CHECK(max_abs_diff(step, steps[i - 1].matrix()) < 1e-9);
    }
  }

  TEST_CASE("matching: identical frames match in place") {
    const Frame a = fixture::textured_frame(128, 96, 1);
    const auto m = match_frames(a, a);
    CHECK(m.size() > 20);
    for (const auto &c : m) CHECK(c.p == c.q);
  }

  TEST_CASE("matching: planted translation is recovered") {
    const Frame a = fixture::textured_frame(160, 128, 2);
    const Frame b = shifted_copy(a, 4, 0);
    const auto m = match_frames(a, b);
    REQUIRE(m.size() > 20);
    std::vector<double> dx, dy;
    for (const auto &c : m) {
      dx.push_back(c.q.x - c.p.x);
      dy.push_back(c.q.y - c.p.y);
    }
    std::nth_element(dx.begin(), dx.begin() + dx.size() / 2, dx.end());
    std::nth_element(dy.begin(), dy.begin() + dy.size() / 2, dy.end());
    CHECK(std::abs(dx[dx.size() / 2] - 4.0) <= 0.5);
    CHECK(std::abs(dy[dy.size() / 2]) <= 0.5);
  }

  TEST_CASE("matching: flat frames give nothing") {
    Frame a(64, 64);
    for (auto &v : a.pixels()) v = 500;
    CHECK(match_frames(a, a).empty());
    CHECK(detect_corners(a).empty());
    CHECK_THROWS_AS(match_frames(a, Frame(32, 32)), PreconditionError);
  }

  TEST_CASE("corners are capped and separated") {
    const Frame a = fixture::textured_frame(200, 160, 3);
    MatchParams p;
    p.max_corners = 60;
    const auto c = detect_corners(a, p);
    CHECK(c.size() <= 60);
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t j = i + 1; j < c.size(); ++j) CHECK(distance(to_vec(c[i]), to_vec(c[j])) > p.nms_radius);
  }

  TEST_CASE("transforms file round trip") {
    const auto dir = fixture::scratch_dir("transforms");
    std::mt19937_64 rng(6);
    std::vector<Homography> hs;
    for (int i = 0; i < 5; ++i) hs.emplace_back(oracle::random_homography(rng));
    save_transforms(hs, dir / "t.txt");
    const auto back = load_transforms(dir / "t.txt");
    REQUIRE(back.size() == hs.size());
    for (std::size_t i = 0; i < hs.size(); ++i) CHECK(back[i].matrix() == hs[i].matrix());

    std::ofstream(dir / "bad.txt") << "1 0 0 0 1 0 0 0\n";
    CHECK_THROWS(load_transforms(dir / "bad.txt"));
    std::ofstream(dir / "comments.txt") << "# header\n\n1 0 2 0 1 3 0 0 1\n";
    const auto one = load_transforms(dir / "comments.txt");
    REQUIRE(one.size() == 1);
    CHECK(one[0](0, 2) == 2.0);
  }
}
