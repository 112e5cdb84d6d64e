#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <numbers>
#include <random>
#include <set>

#include "doctest.h"
#include "irtk/errors.hpp"
#include "irtk/trajectory.hpp"
#include "oracles.hpp"
#include "traces.hpp"

using namespace irtk;

namespace {

TrajectoryNode node(std::size_t frame, double x, double y) {
  TrajectoryNode n;
  n.frame = frame;
  n.position = n.original = {x, y};
  return n;
}

TrajectorySegment segment(std::uint64_t id, std::vector<TrajectoryNode> nodes) {
  TrajectorySegment s;
  s.id = id;
  s.last_activity = nodes.back().frame;
  s.nodes = std::move(nodes);
  return s;
}

TrajectorySegment run(std::uint64_t id, std::size_t first, std::size_t count, Vec2 start, Vec2 v) {
  std::vector<TrajectoryNode> nodes;
  for (std::size_t k = 0; k < count; ++k) {
    const Vec2 p = start + static_cast<double>(k) * v;
    nodes.push_back(node(first + k, p.x, p.y));
  }
  return segment(id, std::move(nodes));
}

std::vector<oracle::TimedPoint> timed(const TrajectorySegment &s) {
  std::vector<oracle::TimedPoint> out;
  for (const auto &n : s.nodes) out.push_back({static_cast<long>(n.frame), n.position});
  return out;
}

Candidate at(double x, double y) {
  Candidate c;
  c.position = {x, y};
  return c;
}

Vec2 rotate(const Vec2 &p, double a) { return {std::cos(a) * p.x - std::sin(a) * p.y, std::sin(a) * p.x + std::cos(a) * p.y}; }

}  // namespace

TEST_SUITE("trajectory") {
  TEST_CASE("link cost: hand values") {
    CHECK(link_cost({0, 0}, {1, 0}, {2, 0}) == 0.0);
    CHECK(link_cost({0, 0}, {1, 0}, {2, 1}) == doctest::Approx(0.5));
    const double c = link_cost({0, 0}, {2, 0}, {4.2, 0});
    CHECK(c == doctest::Approx(0.05));
    CHECK(c <= TrajectoryParams{}.cost_threshold);
    CHECK_THROWS_AS(link_cost({1, 1}, {1, 1}, {2, 2}), PreconditionError);
  }

  TEST_CASE("link cost: oracle and invariances") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int trial = 0; trial < 200; ++trial) {
      const Vec2 a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)};
      const double base = link_cost(a, b, c);
      CHECK(std::abs(base - oracle::link_cost(a, b, c)) <= 1e-9 * std::max(1.0, base));
      const Vec2 t{u(rng), u(rng)};
      const double ang = u(rng), s = 0.1 + std::abs(u(rng));
      CHECK(link_cost(a + t, b + t, c + t) == doctest::Approx(base).epsilon(1e-9));
      CHECK(link_cost(rotate(a, ang), rotate(b, ang), rotate(c, ang)) == doctest::Approx(base).epsilon(1e-9));
      CHECK(link_cost(s * a, s * b, s * c) == doctest::Approx(base).epsilon(1e-9));
      CHECK(link_cost(a, b, 2.0 * b - a) == doctest::Approx(0.0).epsilon(1e-12));
      if (distance(c, 2.0 * b - a) > 1e-6) CHECK(base > 0.0);
    }
  }

  TEST_CASE("velocity gate is inclusive") {
    CHECK(velocity_gate({3, 3}, {3, 3}, 10));
    CHECK(velocity_gate({0, 0}, {10, 0}, 10));
    CHECK_FALSE(velocity_gate({0, 0}, {10.001, 0}, 10));
  }

  TEST_CASE("similarity: hand values") {
    const auto a = run(1, 0, 3, {0, 0}, {1, 1});
    const auto b = run(2, 5, 3, {5, 5}, {1, 1});
    CHECK(std::isinf(segment_similarity(a, b)));

    const auto ta = segment(1, {node(0, 0, 0), node(1, 1, 0)});
    const auto tb = segment(2, {node(4, 4, 1), node(5, 5, 1)});
    CHECK(segment_similarity(ta, tb) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(segment_similarity(ta, tb) >= TrajectoryParams{}.similarity_threshold);

    const auto overlap = run(3, 1, 4, {0, 0}, {1, 0});
    CHECK(segment_similarity(ta, overlap) == 0.0);

    // Adjacent runs: one extrapolated step each side of the junction.
    const auto left = segment(4, {node(0, 0, 0), node(1, 1, 0)});
    const auto right = segment(5, {node(2, 2, 1), node(3, 3, 1)});
    CHECK(segment_similarity(left, right) == doctest::Approx(0.5));
  }

  TEST_CASE("similarity: oracle and symmetry") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t la = 2 + rng() % 4, lb = 2 + rng() % 4, gap = rng() % 6;
      const auto a = run(1, 3, la, {u(rng), u(rng)}, {u(rng) / 4, u(rng) / 4});
      const auto b = run(2, 3 + la + gap, lb, {u(rng), u(rng)}, {u(rng) / 4, u(rng) / 4});
      const double s = segment_similarity(a, b);
      const double want = oracle::similarity(timed(a), timed(b));
      CHECK(std::abs(s - want) <= 1e-9 * std::max(1.0, want));
      CHECK(segment_similarity(b, a) == s);

      // Time reversal swaps the roles of the two runs.
      auto reverse = [](const TrajectorySegment &seg, std::uint64_t id) {
        std::vector<TrajectoryNode> nodes;
        for (auto it = seg.nodes.rbegin(); it != seg.nodes.rend(); ++it)
          nodes.push_back(node(100 - it->frame, it->position.x, it->position.y));
        return segment(id, nodes);
      };
      CHECK(segment_similarity(reverse(b, 3), reverse(a, 4)) == doctest::Approx(s).epsilon(1e-9));
    }
  }

  TEST_CASE("hand-traced growth") {
    for (const auto &r : trace::growth_traces()) {
      INFO(r.name << ": " << r.detail);
      CHECK(r.ok);
    }
  }

  TEST_CASE("hand-traced merging") {
    for (const auto &r : trace::merge_traces()) {
      INFO(r.name << ": " << r.detail);
      CHECK(r.ok);
    }
  }

  TEST_CASE("merge plan follows the zeroing rule") {
    // Triangle: 0 absorbs 1, and the 0-2 link dies because 2 was linked to 1.
    const std::vector<double> tri{0, 1, 1, 1, 0, 1, 1, 1, 0};
    CHECK(merge_plan(tri, 3, 0.5) == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}});

    // Chain 0-1, 0-3, 2-3: 0 absorbs 1 then 3; 2 lost its link to 0 when 3 merged.
    std::vector<double> m(16, 0.0);
    auto link = [&](std::size_t i, std::size_t j) { m[i * 4 + j] = m[j * 4 + i] = 1.0; };
    link(0, 1);
    link(0, 3);
    link(2, 3);
    CHECK(merge_plan(m, 4, 0.5) == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {0, 3}});

    const std::vector<double> none(9, 0.05);
    CHECK(merge_plan(none, 3, 0.1).empty());
    CHECK_THROWS_AS(merge_plan(none, 4, 0.1), DimensionError);
  }

  TEST_CASE("growth never removes segments and caps branching") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 40.0);
    TrajectoryParams p;
    p.max_branches = 2;
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<TrajectorySegment> segs;
      for (std::uint64_t i = 0; i < 5; ++i) segs.push_back(run(i + 1, 0, 2, {u(rng), u(rng)}, {1, 0.5}));
      std::vector<TrajectoryNode> cur, prev;
      for (int j = 0; j < 12; ++j) cur.push_back(node(2, u(rng), u(rng)));
      for (const auto &s : segs) prev.push_back(s.nodes.back());
      std::uint64_t next = 100;
      const auto before = segs.size();
      grow_segments(segs, cur, prev, 2, p, next);
      CHECK(segs.size() >= before);
      std::map<std::uint64_t, int> from_prefix;
      for (const auto &s : segs)
        if (s.size() == 3) ++from_prefix[static_cast<std::uint64_t>(s.nodes[0].position.x * 1000)];
      for (const auto &[k, n] : from_prefix) CHECK(n <= 2);
    }
  }

  TEST_CASE("stationary history skips the cost and keeps the velocity gate") {
    TrajectoryParams p;
    std::vector<TrajectorySegment> segs{segment(1, {node(0, 5, 5), node(1, 5, 5)})};
    const std::vector<TrajectoryNode> cur{node(2, 8, 5), node(2, 30, 5)}, prev;
    std::uint64_t next = 2;
    grow_segments(segs, cur, prev, 2, p, next);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].size() == 3);
    CHECK(segs[0].nodes.back().position == Vec2{8, 5});
  }

  TEST_CASE("pruning boundary") {
    TrajectoryParams p;  // inactivity limit 5
    std::vector<TrajectorySegment> segs{run(1, 0, 3, {0, 0}, {1, 0}), run(2, 0, 3, {0, 9}, {1, 0}),
                                        run(3, 0, 3, {0, 20}, {1, 0})};
    segs[0].last_activity = 4;
    segs[1].last_activity = 5;
    segs[2].last_activity = 0;
    segs[2].state = SegmentState::confirmed;
    prune_segments(segs, 10, p);
    CHECK(segs[0].state == SegmentState::deleted);  // idle 6
    CHECK(segs[1].state == SegmentState::active);   // idle exactly 5
    CHECK(segs[2].state == SegmentState::confirmed);
    CHECK(segs[2].retired);

    // Retired segments do not grow.
    std::uint64_t next = 10;
    const std::vector<TrajectoryNode> cur{node(3, 3, 20)}, prev;
    auto confirmed_only = std::vector<TrajectorySegment>{segs[2]};
    grow_segments(confirmed_only, cur, prev, 3, p, next);
    CHECK(confirmed_only.size() == 1);
    CHECK(confirmed_only[0].size() == 3);
  }

  TEST_CASE("confirmation length and crossing rule") {
    TrajectoryParams p;
    CHECK(p.confirmation_length() == 6);
    std::vector<TrajectorySegment> segs{run(1, 0, 7, {0, 0}, {1, 0}), run(2, 0, 6, {0, 30}, {1, 0})};
    confirm_tracks(segs, p);
    CHECK(segs[0].state == SegmentState::confirmed);
    CHECK(segs[1].state == SegmentState::active);

    // Crossing at frame 4 near (4,4): the 9-node segment survives.
    std::vector<TrajectorySegment> cross{run(1, 0, 7, {0, 8}, {1, -1}), run(2, 0, 9, {0, 0}, {1, 1})};
    confirm_tracks(cross, p);
    CHECK(cross[0].state == SegmentState::deleted);
    CHECK(cross[1].state == SegmentState::confirmed);

    // Equal lengths: the earlier start wins.
    std::vector<TrajectorySegment> tie{run(1, 1, 8, {1, 7}, {1, -1}), run(2, 0, 8, {0, 0}, {1, 1})};
    confirm_tracks(tie, p);
    CHECK(tie[0].state == SegmentState::deleted);
    CHECK(tie[1].state == SegmentState::confirmed);

    std::vector<TrajectorySegment> short_only{run(1, 0, 6, {0, 0}, {1, 0})};
    confirm_tracks(short_only, p);
    CHECK(short_only[0].state == SegmentState::active);

    p.length_fraction = 0.35;
    CHECK(p.confirmation_length() == 7);
    p.confirm_length = 13;
    CHECK(p.confirmation_length() == 13);
  }

  TEST_CASE("parameters are validated") {
    TrajectoryParams p;
    p.length_fraction = 1.0;
    CHECK_THROWS_AS(p.validate(), PreconditionError);
    p = {};
    p.cost_threshold = 0;
    CHECK_THROWS_AS(TrajectoryEngine{p}, PreconditionError);
  }

  TEST_CASE("engine: uniform target on a static camera") {
    TrajectoryEngine engine{TrajectoryParams{}};
    for (std::size_t t = 0; t < 50; ++t) {
      const std::vector<Candidate> c{at(10 + 2.0 * t, 40 + 0.5 * t)};
      engine.step(t, c, Homography::identity());
    }
    const auto d = engine.detections();
    std::set<std::uint64_t> ids;
    for (const auto &x : d) ids.insert(x.track_id);
    CHECK(ids.size() == 1);
    CHECK(d.size() >= 44);
    CHECK(engine.surviving_track_count() == 1);
    CHECK(d.front().x == 10.0);
  }

  TEST_CASE("engine: nothing in, nothing out") {
    TrajectoryEngine engine{TrajectoryParams{}};
    for (std::size_t t = 0; t < 30; ++t) engine.step(t, {}, Homography::identity());
    CHECK(engine.detections().empty());
    CHECK_THROWS_AS(engine.step(40, {}, Homography::identity()), PreconditionError);
  }

  TEST_CASE("engine: a two-frame dropout is bridged") {
    TrajectoryEngine engine{TrajectoryParams{}};
    std::size_t fed = 0;
    for (std::size_t t = 0; t < 50; ++t) {
      std::vector<Candidate> c;
      if (t != 20 && t != 21) {
        c.push_back(at(10 + 2.0 * t, 40 + 0.5 * t));
        ++fed;
      }
      engine.step(t, c, Homography::identity());
    }
    const auto d = engine.detections();
    std::set<std::uint64_t> ids;
    for (const auto &x : d) ids.insert(x.track_id);
    CHECK(ids.size() == 1);
    CHECK(d.size() == fed);
    CHECK(engine.surviving_track_count() == 1);
  }

  TEST_CASE("engine: moving camera, positions reported in frame pixels") {
    // The camera pans 3 px/frame; the target is fixed in the world, so it
    // drifts across the image but is stationary in reference coordinates.
    TrajectoryEngine engine{TrajectoryParams{}};
    for (std::size_t t = 0; t < 45; ++t) {
      const std::vector<Candidate> c{at(200 - 3.0 * t, 50)};
      engine.step(t, c, Homography::translation(3, 0));
    }
    const auto d = engine.detections();
    REQUIRE(d.size() == 45);
    for (const auto &x : d) CHECK(x.x == doctest::Approx(200 - 3.0 * x.frame));
  }

  TEST_CASE("longer confirmation lengths keep a subset of detections") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 120.0);
    std::vector<std::vector<Candidate>> frames(80);
    for (std::size_t t = 0; t < frames.size(); ++t) {
      frames[t].push_back(at(5 + 1.5 * t, 20 + 0.4 * t));
      if (t > 10 && t < 25) frames[t].push_back(at(100 - 1.0 * t, 90));
      for (int k = 0; k < 6; ++k) frames[t].push_back(at(u(rng), u(rng)));
    }
    std::set<std::tuple<std::size_t, double, double>> previous;
    bool first = true;
    for (int len = 3; len <= 15; len += 2) {
      TrajectoryParams p;
      p.confirm_length = len;
      TrajectoryEngine engine(p);
      for (std::size_t t = 0; t < frames.size(); ++t) engine.step(t, frames[t], Homography::identity());
      std::set<std::tuple<std::size_t, double, double>> now;
      for (const auto &x : engine.detections()) now.insert({x.frame, x.x, x.y});
      if (!first) CHECK(std::includes(previous.begin(), previous.end(), now.begin(), now.end()));
      previous = now;
      first = false;
    }
  }
}
