#pragma once

#include <span>
#include <string>
#include <vector>

#include "irtk/candidates.hpp"
#include "irtk/features.hpp"
#include "irtk/gbdt.hpp"
#include "irtk/registration.hpp"
#include "irtk/trajectory.hpp"

namespace irtk {

/// Produces the candidates of one frame. Implementations must be safe to call
/// concurrently on different frames.
class FrameDetector {
 public:
  virtual ~FrameDetector() = default;
  virtual std::vector<Candidate> detect(const Frame &frame) const = 0;
};

/// Interest-pixel selection followed by the boosted classifier.
class ClassifierDetector final : public FrameDetector {
 public:
  ClassifierDetector(InterestFilterParams filter, std::vector<RegionSize> scales, GbdtModel model, double threshold);
  std::vector<Candidate> detect(const Frame &frame) const override;

 private:
  InterestFilterParams filter_;
  std::vector<RegionSize> scales_;
  GbdtModel model_;
  double threshold_;
};

/// Reports the annotated positions of each frame; a stand-in for a perfect
/// detector.
class AnnotationDetector final : public FrameDetector {
 public:
  explicit AnnotationDetector(std::vector<Annotation> annotations);
  std::vector<Candidate> detect(const Frame &frame) const override;

 private:
  std::vector<Annotation> annotations_;
};

struct MotionEstimate {
  Homography to_previous;  // maps current-frame pixels into the previous frame
  bool fallback = false;   // estimation failed and identity was used
  std::string note;
};

/// Implementations must be safe to call concurrently on different pairs.
class MotionProvider {
 public:
  virtual ~MotionProvider() = default;
  virtual MotionEstimate estimate(const Frame &previous, const Frame &current) const = 0;
};

class StaticMotion final : public MotionProvider {
 public:
  MotionEstimate estimate(const Frame &previous, const Frame &current) const override;
};

/// Uses known steps; steps[k] maps frame k+1 into frame k (by frame index).
class KnownMotion final : public MotionProvider {
 public:
  explicit KnownMotion(std::vector<Homography> steps);
  MotionEstimate estimate(const Frame &previous, const Frame &current) const override;

 private:
  std::vector<Homography> steps_;
};

/// Corner matching plus RANSAC.
class ImageMotion final : public MotionProvider {
 public:
  ImageMotion(MatchParams match = {}, RansacParams ransac = {});
  MotionEstimate estimate(const Frame &previous, const Frame &current) const override;

 private:
  MatchParams match_;
  RansacParams ransac_;
};

struct StageTiming {
  std::size_t frames = 0;
  double detection_ms = 0.0;     // wall time of the whole stage
  double registration_ms = 0.0;
  double trajectory_ms = 0.0;

  double per_frame(double total_ms) const { return frames ? total_ms / static_cast<double>(frames) : 0.0; }
};

struct SequenceResult {
  std::vector<Detection> detections;
  std::vector<std::size_t> fallback_frames;  // frames whose motion fell back to identity
  std::vector<std::string> warnings;
  std::size_t candidate_count = 0;
  std::size_t surviving_tracks = 0;
  int confirmation_length = 0;
  StageTiming timing;
};

/// Frames must have consecutive indices. Detection and registration run on
/// `threads` workers; the trajectory stage is sequential, so the result does
/// not depend on the thread count.
SequenceResult process_sequence(std::span<const Frame> frames, const FrameDetector &detector,
                                const MotionProvider &motion, const TrajectoryParams &params, unsigned threads = 1);

/// Worker count from a request, where 0 means "decide": the IRTK_THREADS
/// environment variable when set and positive, else the hardware concurrency.
unsigned resolve_threads(unsigned requested = 0);

}  // namespace irtk
