#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include "irtk/candidates.hpp"
#include "irtk/geometry.hpp"
#include "irtk/registration.hpp"

namespace irtk {

struct TrajectoryParams {
  double cost_threshold = 0.2;        // link cost gate
  double velocity_threshold = 10.0;   // pixels per frame
  double similarity_threshold = 0.1;  // merge gate
  int inactivity_limit = 5;           // frames without growth or merge
  double length_fraction = 0.3;
  int window = 20;                    // frames; also the re-anchoring period
  int max_branches = 5;
  double crossing_radius = 1.0;
  /// Replaces floor(length_fraction * window) when set.
  std::optional<int> confirm_length;

  /// Segments with more nodes than this are confirmed.
  int confirmation_length() const;
  void validate() const;
};

/// Deviation of c from the uniform-motion completion of (prev2, prev1),
/// relative to the last step length. Throws PreconditionError when prev2 and
/// prev1 coincide.
double link_cost(const Vec2 &prev2, const Vec2 &prev1, const Vec2 &c);

bool velocity_gate(const Vec2 &p, const Vec2 &q, double limit);

struct TrajectoryNode {
  std::size_t frame = 0;
  Vec2 position;        // in the current reference coordinates
  Vec2 original;        // pixel position in its own frame
  std::size_t source = 0;  // candidate index within its frame
  double score = 1.0;
};

enum class SegmentState { active, confirmed, deleted };

struct TrajectorySegment {
  std::uint64_t id = 0;
  std::vector<TrajectoryNode> nodes;  // strictly increasing frames
  std::size_t last_activity = 0;
  SegmentState state = SegmentState::active;
  /// Confirmed but idle past the inactivity limit: kept as a result, no longer
  /// grown or merged.
  bool retired = false;

  std::size_t size() const { return nodes.size(); }
  std::size_t start_frame() const { return nodes.front().frame; }
  std::size_t end_frame() const { return nodes.back().frame; }
  bool live() const { return state != SegmentState::deleted && !retired; }
};

/// Similarity of two time-disjoint segments, taken in time order: both are
/// extrapolated across the gap at their terminal velocity and compared to the
/// straight interpolation between them. Returns 0 for overlapping segments and
/// +infinity for perfect alignment.
double segment_similarity(const TrajectorySegment &a, const TrajectorySegment &b);

/// One growth step at `frame`. `current` and `previous` hold the candidates of
/// `frame` and `frame - 1`. Segments ending at frame - 1 are extended by every
/// candidate passing both gates (lowest cost first, at most max_branches); the
/// first extension keeps the segment id and further ones are new segments
/// sharing the prefix. Every gated pair of previous/current candidates seeds a
/// new two-node segment. Ids are drawn from next_id.
void grow_segments(std::vector<TrajectorySegment> &segments, std::span<const TrajectoryNode> current,
                   std::span<const TrajectoryNode> previous, std::size_t frame, const TrajectoryParams &params,
                   std::uint64_t &next_id);

/// Greedy merge order over a symmetric similarity matrix (row-major n x n) whose
/// rows are already sorted by priority. Returns (absorber, absorbed) pairs.
std::vector<std::pair<std::size_t, std::size_t>> merge_plan(std::span<const double> similarity, std::size_t n,
                                                            double threshold);

/// Merges live segments at `frame`; absorbed segments are marked deleted.
/// Returns the number of merges performed.
std::size_t merge_segments(std::vector<TrajectorySegment> &segments, std::size_t frame, const TrajectoryParams &params);

/// Deletes unconfirmed segments idle for more than the inactivity limit and
/// retires confirmed ones.
void prune_segments(std::vector<TrajectorySegment> &segments, std::size_t frame, const TrajectoryParams &params);

/// Confirms live segments longer than the confirmation length, then resolves
/// crossings among live confirmed segments by keeping the longest (earlier
/// start, then lower id on ties).
void confirm_tracks(std::vector<TrajectorySegment> &segments, const TrajectoryParams &params);

struct Detection {
  std::size_t frame = 0;
  std::uint64_t track_id = 0;
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;
  friend bool operator==(const Detection &, const Detection &) = default;
};

/// Online driver: feed frames in order; detections of a confirmed track are
/// emitted retroactively for its earlier nodes and immediately afterwards.
class TrajectoryEngine {
 public:
  explicit TrajectoryEngine(TrajectoryParams params);

  /// `to_previous` maps this frame's pixel coordinates into the previous
  /// frame's; it is ignored for the first frame. Candidate positions are in
  /// the frame's own pixel coordinates.
  void step(std::size_t frame, std::span<const Candidate> candidates, const Homography &to_previous);

  /// Sorted by frame, then track id.
  std::vector<Detection> detections() const;
  const std::vector<TrajectorySegment> &segments() const { return segments_; }
  /// Confirmed segments that have not been deleted, retired ones included.
  std::size_t surviving_track_count() const;
  const TrajectoryParams &params() const { return params_; }

 private:
  void reanchor();
  void emit();

  TrajectoryParams params_;
  std::vector<TrajectorySegment> segments_;
  std::vector<TrajectoryNode> previous_;
  Homography to_reference_;
  std::optional<std::size_t> last_frame_;
  std::size_t since_anchor_ = 0;
  std::uint64_t next_id_ = 1;
  std::vector<Detection> detections_;
  std::unordered_set<std::uint64_t> emitted_;  // (frame, source) keys
};

}  // namespace irtk
