#include <algorithm>
#include <cstdlib>

#include "doctest.h"
#include "fixtures.hpp"
#include "irtk/evaluation.hpp"
#include "irtk/pipeline.hpp"
#include "irtk/synth.hpp"

using namespace irtk;

TEST_SUITE("pipeline") {
  TEST_CASE("perfect detector with known motion recovers the targets") {
    auto spec = fixture::small_sequence(21);
    spec.n_frames = 40;
    const auto seq = generate_sequence(spec);
    const auto truth = seq.truth.annotations();
    const AnnotationDetector detector(truth);
    const KnownMotion motion(seq.truth.steps);
    const auto r = process_sequence(seq.frames, detector, motion, TrajectoryParams{}, 1);
    CHECK(r.fallback_frames.empty());
    CHECK(r.confirmation_length == 6);
    const auto e = evaluate(r.detections, truth);
    CHECK(e.metrics.precision == 1.0);
    CHECK(e.metrics.recall >= 0.85);
  }

  TEST_CASE("thread count does not change the result") {
    auto spec = fixture::small_sequence(22);
    spec.n_frames = 24;
    const auto seq = generate_sequence(spec);
    const AnnotationDetector detector(seq.truth.annotations());
    const ImageMotion motion;
    const auto one = process_sequence(seq.frames, detector, motion, TrajectoryParams{}, 1);
    const auto three = process_sequence(seq.frames, detector, motion, TrajectoryParams{}, 3);
    CHECK(one.detections == three.detections);
    CHECK(one.fallback_frames == three.fallback_frames);
  }

  TEST_CASE("image registration tracks the true camera steps") {
    auto spec = fixture::small_sequence(23);
    spec.n_frames = 6;
    spec.n_targets = 0;
    const auto seq = generate_sequence(spec);
    const ImageMotion motion;
    std::vector<double> errors;
    for (std::size_t i = 1; i < seq.frames.size(); ++i) {
      const auto est = motion.estimate(seq.frames[i - 1], seq.frames[i]);
      REQUIRE_FALSE(est.fallback);
      for (const Vec2 p : {Vec2{30, 30}, Vec2{128, 128}, Vec2{220, 40}})
        errors.push_back(distance(remap_point(est.to_previous, p), remap_point(seq.truth.steps[i - 1], p)));
    }
    std::sort(errors.begin(), errors.end());
    CHECK(errors[errors.size() / 2] < 1.0);
    CHECK(errors.back() < 2.0);
  }

  TEST_CASE("motion fallbacks are reported") {
    const std::vector<Frame> frames{Frame(32, 32, 0), Frame(32, 32, 1), Frame(32, 32, 2)};
    const AnnotationDetector detector({});
    const ImageMotion image;
    auto r = process_sequence(frames, detector, image, TrajectoryParams{}, 1);
    CHECK(r.fallback_frames == std::vector<std::size_t>{1, 2});
    CHECK_FALSE(r.warnings.empty());
    const KnownMotion short_list({Homography::identity()});
    r = process_sequence(frames, detector, short_list, TrajectoryParams{}, 1);
    CHECK(r.fallback_frames == std::vector<std::size_t>{2});
    const StaticMotion still;
    CHECK(process_sequence(frames, detector, still, TrajectoryParams{}, 1).fallback_frames.empty());
  }

  TEST_CASE("worker count resolution") {
    CHECK(resolve_threads(3) == 3);
    setenv("IRTK_THREADS", "2", 1);
    CHECK(resolve_threads(0) == 2);
    setenv("IRTK_THREADS", "0", 1);
    CHECK(resolve_threads(0) >= 1);
    unsetenv("IRTK_THREADS");
  }
}
