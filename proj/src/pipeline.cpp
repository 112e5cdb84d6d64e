#include "irtk/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>

#include "irtk/errors.hpp"

namespace irtk {

ClassifierDetector::ClassifierDetector(InterestFilterParams filter, std::vector<RegionSize> scales, GbdtModel model,
                                       double threshold)
    : filter_(filter), scales_(std::move(scales)), model_(std::move(model)), threshold_(threshold) {
  filter_.validate();
  if (model_.feature_dim() != kFeaturesPerScale * scales_.size())
    throw DimensionError("model feature count does not match the configured scales");
}

std::vector<Candidate> ClassifierDetector::detect(const Frame &frame) const {
  return detect_candidates(frame, filter_, scales_, model_, threshold_);
}

AnnotationDetector::AnnotationDetector(std::vector<Annotation> annotations) : annotations_(std::move(annotations)) {}

std::vector<Candidate> AnnotationDetector::detect(const Frame &frame) const {
  std::vector<Candidate> out;
  for (const auto &a : annotations_) {
    if (a.frame != frame.index()) continue;
    Candidate c;
    c.frame = a.frame;
    c.pixel = {a.x, a.y};
    c.position = to_vec(c.pixel);
    out.push_back(c);
  }
  return out;
}

MotionEstimate StaticMotion::estimate(const Frame &, const Frame &) const { return {}; }

KnownMotion::KnownMotion(std::vector<Homography> steps) : steps_(std::move(steps)) {}

MotionEstimate KnownMotion::estimate(const Frame &, const Frame &current) const {
  MotionEstimate e;
  const std::size_t i = current.index();
  if (i == 0 || i - 1 >= steps_.size()) {
    e.fallback = true;
    e.note = "no transform for frame " + std::to_string(i) + "; using identity";
    return e;
  }
  e.to_previous = steps_[i - 1];
  return e;
}

ImageMotion::ImageMotion(MatchParams match, RansacParams ransac) : match_(match), ransac_(ransac) {}

MotionEstimate ImageMotion::estimate(const Frame &previous, const Frame &current) const {
  MotionEstimate e;
  try {
    // p in the current frame, q in the previous one.
    const auto matches = match_frames(current, previous, match_);
    e.to_previous = estimate_homography_ransac(matches, ransac_).model;
  } catch (const Error &err) {
    e.to_previous = Homography::identity();
    e.fallback = true;
    e.note = "registration failed for frame " + std::to_string(current.index()) + ": " + err.what();
  }
  return e;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Runs job(i) for i in [0, n) on up to `threads` workers; the first exception
// is rethrown on the caller's thread.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)> &job) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      (void)t;
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          job(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  for (auto &th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

SequenceResult process_sequence(std::span<const Frame> frames, const FrameDetector &detector,
                                const MotionProvider &motion, const TrajectoryParams &params, unsigned threads) {
  params.validate();
  for (std::size_t i = 1; i < frames.size(); ++i)
    if (frames[i].index() != frames[i - 1].index() + 1) throw PreconditionError("frame indices must be consecutive");
  SequenceResult result;
  result.timing.frames = frames.size();
  result.confirmation_length = params.confirmation_length();
  const std::size_t n = frames.size();

  auto t0 = Clock::now();
  std::vector<std::vector<Candidate>> candidates(n);
  parallel_for(n, threads, [&](std::size_t i) { candidates[i] = detector.detect(frames[i]); });
  result.timing.detection_ms = elapsed_ms(t0);

  t0 = Clock::now();
  std::vector<MotionEstimate> steps(n);
  parallel_for(n, threads, [&](std::size_t i) {
    if (i > 0) steps[i] = motion.estimate(frames[i - 1], frames[i]);
  });
  result.timing.registration_ms = elapsed_ms(t0);

  t0 = Clock::now();
  TrajectoryEngine engine(params);
  for (std::size_t i = 0; i < n; ++i) {
    if (steps[i].fallback) {
      result.fallback_frames.push_back(frames[i].index());
      result.warnings.push_back(steps[i].note);
    }
    result.candidate_count += candidates[i].size();
    engine.step(frames[i].index(), candidates[i], steps[i].to_previous);
  }
  result.detections = engine.detections();
  result.surviving_tracks = engine.surviving_track_count();
  result.timing.trajectory_ms = elapsed_ms(t0);
  return result;
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char *env = std::getenv("IRTK_THREADS")) {
    char *end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace irtk
