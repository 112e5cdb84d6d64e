#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "irtk/candidates.hpp"
#include "irtk/errors.hpp"
#include "irtk/synth.hpp"
#include "irtk/trajectory.hpp"

using namespace irtk;

namespace {

SequenceSpec still(std::size_t frames) {
  SequenceSpec s;
  s.width = 96;
  s.height = 80;
  s.n_frames = frames;
  s.camera_translation = s.camera_rotation = s.camera_perspective = 0.0;
  return s;
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("no variation sources give identical frames") {
    auto s = still(5);
    s.n_targets = 0;
    s.noise_sigma = 0.0;
    const auto seq = generate_sequence(s);
    REQUIRE(seq.frames.size() == 5);
    for (std::size_t i = 1; i < 5; ++i) CHECK(seq.frames[i].pixels().size() == seq.frames[0].pixels().size());
    for (std::size_t i = 1; i < 5; ++i)
      CHECK(std::equal(seq.frames[i].pixels().begin(), seq.frames[i].pixels().end(), seq.frames[0].pixels().begin()));
  }

  TEST_CASE("static camera, fixed velocity: centers advance exactly") {
    auto s = still(20);
    s.width = 200;
    s.height = 120;
    s.speed_min = s.speed_max = 1.0;
    s.heading = 0.0;
    s.velocity_hold_min = s.velocity_hold_max = 1000;
    s.margin = 2.0;
    const auto seq = generate_sequence(s);
    for (std::size_t f = 1; f < 20; ++f) {
      const Vec2 d = seq.truth.targets[f][0].position - seq.truth.targets[f - 1][0].position;
      CHECK(d.x == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::abs(d.y) < 1e-12);
    }
  }

  TEST_CASE("camera pan moves a still world target the other way") {
    auto s = still(10);
    s.camera_drift_x = 2.0;
    s.speed_min = s.speed_max = 0.0;
    s.margin = 0.0;
    const auto seq = generate_sequence(s);
    for (std::size_t f = 1; f < 10; ++f) {
      const Vec2 d = seq.truth.targets[f][0].position - seq.truth.targets[f - 1][0].position;
      CHECK(d.x == doctest::Approx(-2.0).epsilon(1e-9));
      CHECK(std::abs(d.y) < 1e-9);
    }
  }

  TEST_CASE("targets are visible against the local median") {
    SequenceSpec s;
    s.width = 160;
    s.height = 128;
    s.n_frames = 12;
    s.n_targets = 3;
    s.noise_sigma = 0.0;
    s.seed = 4;
    const auto seq = generate_sequence(s);
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
      const auto med = median_filter(seq.frames[f], 11);
      for (const auto &a : seq.truth.annotations()) {
        if (a.frame != f) continue;
        const int x = a.x, y = a.y;
        const double diff = std::abs(double(seq.frames[f].at(x, y)) - med[static_cast<std::size_t>(y) * s.width + x]);
        CHECK(diff > 0.5 * s.contrast_min * std::exp(-1.0));  // half a sub-pixel-offset peak
      }
    }
  }

  TEST_CASE("targets leaving the frame stay annotated while imaged") {
    auto s = still(40);
    s.width = 60;
    s.height = 40;
    s.size_min = s.size_max = 4.0;  // blob sigma 1
    s.speed_min = s.speed_max = 1.0;
    s.heading = 0.0;
    s.velocity_hold_min = s.velocity_hold_max = 1000;
    s.margin = 0.0;
    const auto seq = generate_sequence(s);
    const auto ann = seq.truth.annotations();
    for (const auto &a : ann) {
      CHECK(a.x >= 0);
      CHECK(a.x < s.width);
    }
    for (std::size_t f = 0; f < seq.truth.targets.size(); ++f) {
      const auto &t = seq.truth.targets[f][0];
      CHECK(t.in_view == (t.position.x <= s.width - 1 + 1.0));
    }
  }

  TEST_CASE("true paths follow near-uniform motion in reference coordinates") {
    SequenceSpec s;
    s.width = 256;
    s.height = 256;
    s.n_frames = 80;
    s.n_targets = 3;
    s.seed = 5;
    const auto seq = generate_sequence(s);
    const auto to_ref = chain_to_reference(seq.truth.steps);
    std::size_t good = 0, total = 0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t f = 2; f < s.n_frames; ++f) {
        const auto &a = seq.truth.targets[f - 2][i], &b = seq.truth.targets[f - 1][i], &c = seq.truth.targets[f][i];
        if (!a.in_view || !b.in_view || !c.in_view) continue;
        auto ref = [&](std::size_t k, const TargetState &t) {
          return remap_point(to_ref[k], {std::round(t.position.x), std::round(t.position.y)});
        };
        ++total;
        if (link_cost(ref(f - 2, a), ref(f - 1, b), ref(f, c)) <= 0.2) ++good;
      }
    REQUIRE(total > 100);
    CHECK(static_cast<double>(good) >= 0.9 * static_cast<double>(total));
  }

  TEST_CASE("dataset layout and determinism") {
    const auto a = fixture::scratch_dir("synth_a"), b = fixture::scratch_dir("synth_b");
    SequenceSpec s;
    s.width = 64;
    s.height = 48;
    s.n_frames = 6;
    s.clutter_rate = 2;
    s.margin = 8;
    s.seed = 9;
    write_dataset(generate_sequence(s), s, a);
    write_dataset(generate_sequence(s), s, b);
    for (const char *name : {"frame_00000.pgm", "frame_00005.pgm", "annotations.csv", "transforms.txt", "sequence.cfg"}) {
      REQUIRE(std::filesystem::exists(a / name));
      CHECK(fixture::read_file(a / name) == fixture::read_file(b / name));
    }
    CHECK_FALSE(std::filesystem::exists(a / "frame_00006.pgm"));
    CHECK(load_sequence_spec(a / "sequence.cfg").to_key_values() == s.to_key_values());

    auto empty = s;
    empty.n_frames = 0;
    const auto c = fixture::scratch_dir("synth_empty");
    write_dataset(generate_sequence(empty), empty, c);
    CHECK(fixture::read_file(c / "annotations.csv") == "frame,target_id,x,y,scene\n");
    CHECK_FALSE(std::filesystem::exists(c / "frame_00000.pgm"));
  }

  TEST_CASE("spec validation") {
    SequenceSpec s;
    s.n_targets = 9;
    CHECK_THROWS_AS(s.validate(), PreconditionError);
    s = {};
    CHECK_THROWS_AS(s.set("no_such_key", "1"), ParseError);
    CHECK_THROWS_AS(s.set("width", "wide"), ParseError);
  }

  TEST_CASE("true trajectory count") {
    GroundTruth t;
    t.targets.resize(30);
    for (std::size_t f = 0; f < 30; ++f) {
      t.targets[f].push_back({1, {0, 0}, f < 14});
      t.targets[f].push_back({2, {0, 0}, f != 10});
    }
    // Target 1: one run of 14. Target 2: runs of 10 and 19.
    CHECK(count_true_trajectories(t, 13) == 2);
    CHECK(count_true_trajectories(t, 9) == 3);
    CHECK(count_true_trajectories(t, 19) == 0);
  }
}
