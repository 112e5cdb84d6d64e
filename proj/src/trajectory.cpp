#include "irtk/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "irtk/errors.hpp"

namespace irtk {

int TrajectoryParams::confirmation_length() const {
  if (confirm_length) return *confirm_length;
  // The epsilon keeps products like 0.3 * 20 from landing just below 6.
  return static_cast<int>(std::floor(length_fraction * window + 1e-9));
}

void TrajectoryParams::validate() const {
  if (!(cost_threshold > 0.0)) throw PreconditionError("cost threshold must be positive");
  if (!(velocity_threshold > 0.0)) throw PreconditionError("velocity threshold must be positive");
  if (!(similarity_threshold > 0.0)) throw PreconditionError("similarity threshold must be positive");
  if (inactivity_limit < 1) throw PreconditionError("inactivity limit must be positive");
  if (!(length_fraction > 0.0 && length_fraction < 1.0)) throw PreconditionError("length fraction must lie in (0,1)");
  if (window < 1) throw PreconditionError("window must be positive");
  if (max_branches < 1) throw PreconditionError("max branches must be positive");
  if (!(crossing_radius >= 0.0)) throw PreconditionError("crossing radius must be non-negative");
  if (confirm_length && *confirm_length < 0) throw PreconditionError("confirmation length must be non-negative");
}

double link_cost(const Vec2 &prev2, const Vec2 &prev1, const Vec2 &c) {
  const double step = distance(prev2, prev1);
  if (step == 0.0) throw PreconditionError("link cost undefined for coincident history points");
  return norm(prev2 + c - 2.0 * prev1) / (2.0 * step);
}

bool velocity_gate(const Vec2 &p, const Vec2 &q, double limit) { return distance(p, q) <= limit; }

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

Vec2 velocity_between(const TrajectoryNode &from, const TrajectoryNode &to) {
  const double dt = static_cast<double>(to.frame) - static_cast<double>(from.frame);
  return (1.0 / dt) * (to.position - from.position);
}

Vec2 terminal_velocity(const TrajectorySegment &s) {
  if (s.nodes.size() < 2) return {};
  return velocity_between(s.nodes[s.nodes.size() - 2], s.nodes.back());
}

Vec2 initial_velocity(const TrajectorySegment &s) {
  if (s.nodes.size() < 2) return {};
  return velocity_between(s.nodes[0], s.nodes[1]);
}

// `a` ends strictly before `b` starts.
double ordered_similarity(const TrajectorySegment &a, const TrajectorySegment &b) {
  const Vec2 last = a.nodes.back().position;
  const Vec2 first = b.nodes.front().position;
  const Vec2 va = terminal_velocity(a);
  const Vec2 vb = initial_velocity(b);
  const std::size_t gap = b.start_frame() - a.end_frame() - 1;
  double numerator, denominator = 0.0;
  if (gap == 0) {
    numerator = 1.0;
    denominator = distance(last + va, first) + distance(first - vb, last);
  } else {
    numerator = static_cast<double>(gap);
    const double span = static_cast<double>(gap + 1);
    for (std::size_t k = 1; k <= gap; ++k) {
      const double kd = static_cast<double>(k);
      const Vec2 forward = last + kd * va;
      const Vec2 backward = first - (span - kd) * vb;
      const Vec2 between = last + (kd / span) * (first - last);
      denominator += distance(forward, between) + distance(backward, between);
    }
  }
  if (denominator == 0.0) return kInfinity;
  return numerator / denominator;
}

struct CellKey {
  long long x, y;
  bool operator==(const CellKey &) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey &k) const {
    return std::hash<long long>()(k.x * 73856093LL ^ k.y * 19349663LL);
  }
};

// Buckets node indices by position so gate queries only touch nearby nodes.
class SpatialGrid {
 public:
  SpatialGrid(std::span<const TrajectoryNode> nodes, double cell) : cell_(std::max(cell, 1.0)) {
    for (std::size_t i = 0; i < nodes.size(); ++i) cells_[key(nodes[i].position)].push_back(i);
  }

  // Indices of nodes in the 3x3 cells around p, ascending.
  std::vector<std::size_t> near(const Vec2 &p) const {
    std::vector<std::size_t> out;
    const CellKey c = key(p);
    for (long long dy = -1; dy <= 1; ++dy)
      for (long long dx = -1; dx <= 1; ++dx) {
        auto it = cells_.find({c.x + dx, c.y + dy});
        if (it != cells_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
      }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  CellKey key(const Vec2 &p) const {
    return {static_cast<long long>(std::floor(p.x / cell_)), static_cast<long long>(std::floor(p.y / cell_))};
  }

  double cell_;
  std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> cells_;
};

// Sparse form of the greedy merge: adjacency sets stand in for the binary
// link matrix, which is mostly zero.
std::vector<std::pair<std::size_t, std::size_t>> merge_plan_sparse(std::vector<std::set<std::size_t>> &adj) {
  const std::size_t n = adj.size();
  std::vector<bool> consumed(n, false);
  std::vector<std::pair<std::size_t, std::size_t>> plan;
  auto unlink = [&](std::size_t a, std::size_t b) {
    adj[a].erase(b);
    adj[b].erase(a);
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (consumed[i]) continue;
    std::size_t cursor = i;
    while (true) {
      auto it = adj[i].upper_bound(cursor);
      if (it == adj[i].end()) break;
      const std::size_t j = *it;
      cursor = j;
      if (consumed[j]) continue;
      plan.emplace_back(i, j);
      consumed[j] = true;
      // Both conditions of the inner loop read the links as they stood when
      // the merge happened.
      const std::vector<std::size_t> linked_to_j(adj[j].begin(), adj[j].end());
      const std::vector<std::size_t> linked_to_i(adj[i].begin(), adj[i].end());
      for (std::size_t k : linked_to_j)
        if (k != i) unlink(i, k);
      for (std::size_t k : linked_to_i)
        if (k != j) unlink(j, k);
    }
  }
  return plan;
}

bool frames_disjoint(const std::vector<TrajectoryNode> &a, const std::vector<TrajectoryNode> &b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].frame == b[j].frame) return false;
    if (a[i].frame < b[j].frame)
      ++i;
    else
      ++j;
  }
  return true;
}

}  // namespace

double segment_similarity(const TrajectorySegment &a, const TrajectorySegment &b) {
  if (a.nodes.empty() || b.nodes.empty()) return 0.0;
  if (a.end_frame() < b.start_frame()) return ordered_similarity(a, b);
  if (b.end_frame() < a.start_frame()) return ordered_similarity(b, a);
  return 0.0;
}

void grow_segments(std::vector<TrajectorySegment> &segments, std::span<const TrajectoryNode> current,
                   std::span<const TrajectoryNode> previous, std::size_t frame, const TrajectoryParams &params,
                   std::uint64_t &next_id) {
  if (frame == 0) return;
  const SpatialGrid grid(current, params.velocity_threshold);
  std::vector<TrajectorySegment> out;
  out.reserve(segments.size() + previous.size());

  struct Link {
    double cost;
    double dist;
    std::size_t index;
  };
  for (auto &seg : segments) {
    const bool can_grow = seg.live() && seg.nodes.size() >= 2 && seg.end_frame() + 1 == frame;
    if (!can_grow) {
      out.push_back(std::move(seg));
      continue;
    }
    const TrajectoryNode &n1 = seg.nodes.back();
    const TrajectoryNode &n2 = seg.nodes[seg.nodes.size() - 2];
    // History of a merged segment may skip frames; compare against the
    // position one frame back on its terminal velocity.
    const Vec2 back = n1.position - velocity_between(n2, n1);
    const bool stationary = distance(back, n1.position) == 0.0;
    std::vector<Link> links;
    for (std::size_t j : grid.near(n1.position)) {
      const Vec2 &c = current[j].position;
      if (!velocity_gate(n1.position, c, params.velocity_threshold)) continue;
      const double d = distance(n1.position, c);
      if (stationary) {
        links.push_back({0.0, d, j});
        continue;
      }
      const double cost = link_cost(back, n1.position, c);
      if (cost <= params.cost_threshold) links.push_back({cost, d, j});
    }
    if (links.empty()) {
      out.push_back(std::move(seg));
      continue;
    }
    std::sort(links.begin(), links.end(), [](const Link &a, const Link &b) {
      if (a.cost != b.cost) return a.cost < b.cost;
      if (a.dist != b.dist) return a.dist < b.dist;
      return a.index < b.index;
    });
    if (links.size() > static_cast<std::size_t>(params.max_branches)) links.resize(params.max_branches);
    for (std::size_t b = 0; b < links.size(); ++b) {
      TrajectorySegment ext = seg;
      if (b > 0) ext.id = next_id++;
      ext.nodes.push_back(current[links[b].index]);
      ext.last_activity = frame;
      out.push_back(std::move(ext));
    }
  }

  for (std::size_t i = 0; i < previous.size(); ++i) {
    for (std::size_t j : grid.near(previous[i].position)) {
      if (!velocity_gate(previous[i].position, current[j].position, params.velocity_threshold)) continue;
      TrajectorySegment seed;
      seed.id = next_id++;
      seed.nodes = {previous[i], current[j]};
      seed.last_activity = frame;
      out.push_back(std::move(seed));
    }
  }
  segments = std::move(out);
}

std::vector<std::pair<std::size_t, std::size_t>> merge_plan(std::span<const double> similarity, std::size_t n,
                                                            double threshold) {
  if (similarity.size() != n * n) throw DimensionError("similarity matrix must be n x n");
  std::vector<std::set<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && similarity[i * n + j] >= threshold) adj[i].insert(j);
  return merge_plan_sparse(adj);
}

std::size_t merge_segments(std::vector<TrajectorySegment> &segments, std::size_t frame,
                           const TrajectoryParams &params) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < segments.size(); ++i)
    if (segments[i].live() && !segments[i].nodes.empty()) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (segments[a].size() != segments[b].size()) return segments[a].size() > segments[b].size();
    return segments[a].id < segments[b].id;
  });
  const std::size_t n = order.size();
  std::vector<std::set<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto &a = segments[order[i]];
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto &b = segments[order[j]];
      if (a.end_frame() >= b.start_frame() && b.end_frame() >= a.start_frame()) continue;
      if (segment_similarity(a, b) >= params.similarity_threshold) {
        adj[i].insert(j);
        adj[j].insert(i);
      }
    }
  }
  std::size_t merges = 0;
  for (const auto &[i, j] : merge_plan_sparse(adj)) {
    auto &keep = segments[order[i]];
    auto &gone = segments[order[j]];
    if (!frames_disjoint(keep.nodes, gone.nodes)) continue;
    std::vector<TrajectoryNode> nodes;
    nodes.reserve(keep.nodes.size() + gone.nodes.size());
    std::merge(keep.nodes.begin(), keep.nodes.end(), gone.nodes.begin(), gone.nodes.end(), std::back_inserter(nodes),
               [](const TrajectoryNode &x, const TrajectoryNode &y) { return x.frame < y.frame; });
    keep.nodes = std::move(nodes);
    keep.last_activity = frame;
    if (gone.state == SegmentState::confirmed) keep.state = SegmentState::confirmed;
    gone.state = SegmentState::deleted;
    ++merges;
  }
  return merges;
}

void prune_segments(std::vector<TrajectorySegment> &segments, std::size_t frame, const TrajectoryParams &params) {
  for (auto &s : segments) {
    if (!s.live()) continue;
    if (frame < s.last_activity || frame - s.last_activity <= static_cast<std::size_t>(params.inactivity_limit))
      continue;
    if (s.state == SegmentState::confirmed)
      s.retired = true;
    else
      s.state = SegmentState::deleted;
  }
}

void confirm_tracks(std::vector<TrajectorySegment> &segments, const TrajectoryParams &params) {
  const auto threshold = static_cast<std::size_t>(std::max(0, params.confirmation_length()));
  std::vector<std::size_t> confirmed;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    auto &s = segments[i];
    if (!s.live()) continue;
    if (s.state == SegmentState::active && s.size() > threshold) s.state = SegmentState::confirmed;
    if (s.state == SegmentState::confirmed) confirmed.push_back(i);
  }
  std::sort(confirmed.begin(), confirmed.end(), [&](std::size_t a, std::size_t b) {
    const auto &x = segments[a], &y = segments[b];
    if (x.size() != y.size()) return x.size() > y.size();
    if (x.start_frame() != y.start_frame()) return x.start_frame() < y.start_frame();
    return x.id < y.id;
  });
  const double r2 = params.crossing_radius * params.crossing_radius;
  std::unordered_map<std::size_t, std::vector<Vec2>> kept;  // frame -> kept node positions
  for (std::size_t idx : confirmed) {
    auto &s = segments[idx];
    bool crosses = false;
    for (const auto &node : s.nodes) {
      auto it = kept.find(node.frame);
      if (it == kept.end()) continue;
      for (const auto &p : it->second) {
        const Vec2 d = p - node.original;
        if (d.x * d.x + d.y * d.y <= r2) {
          crosses = true;
          break;
        }
      }
      if (crosses) break;
    }
    if (crosses) {
      s.state = SegmentState::deleted;
      continue;
    }
    for (const auto &node : s.nodes) kept[node.frame].push_back(node.original);
  }
}

TrajectoryEngine::TrajectoryEngine(TrajectoryParams params) : params_(std::move(params)) { params_.validate(); }

void TrajectoryEngine::reanchor() {
  const Homography back = to_reference_.inverse();
  for (auto &s : segments_) {
    if (!s.live()) continue;
    for (auto &n : s.nodes) n.position = remap_point(back, n.position);
  }
  for (auto &n : previous_) n.position = remap_point(back, n.position);
  to_reference_ = Homography::identity();
}

void TrajectoryEngine::step(std::size_t frame, std::span<const Candidate> candidates, const Homography &to_previous) {
  if (last_frame_) {
    if (frame != *last_frame_ + 1) throw PreconditionError("frames must be fed consecutively");
    to_reference_ = to_reference_ * to_previous;
    if (++since_anchor_ >= static_cast<std::size_t>(params_.window)) {
      reanchor();
      since_anchor_ = 0;
    }
  }
  if (candidates.size() >= (std::size_t{1} << 24)) throw PreconditionError("too many candidates in one frame");

  std::vector<TrajectoryNode> current;
  current.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    TrajectoryNode n;
    n.frame = frame;
    n.original = candidates[i].position;
    n.source = i;
    n.score = candidates[i].score;
    try {
      n.position = remap_point(to_reference_, n.original);
    } catch (const PointAtInfinityError &) {
      continue;
    }
    current.push_back(n);
  }

  if (last_frame_) grow_segments(segments_, current, previous_, frame, params_, next_id_);
  merge_segments(segments_, frame, params_);
  prune_segments(segments_, frame, params_);
  confirm_tracks(segments_, params_);
  emit();
  std::erase_if(segments_, [](const TrajectorySegment &s) { return s.state == SegmentState::deleted; });

  previous_ = std::move(current);
  last_frame_ = frame;
}

void TrajectoryEngine::emit() {
  for (const auto &s : segments_) {
    if (s.state != SegmentState::confirmed || s.retired) continue;
    for (const auto &n : s.nodes) {
      const std::uint64_t key = (static_cast<std::uint64_t>(n.frame) << 24) | n.source;
      if (!emitted_.insert(key).second) continue;
      detections_.push_back({n.frame, s.id, n.original.x, n.original.y, n.score});
    }
  }
}

std::vector<Detection> TrajectoryEngine::detections() const {
  auto out = detections_;
  std::sort(out.begin(), out.end(), [](const Detection &a, const Detection &b) {
    if (a.frame != b.frame) return a.frame < b.frame;
    if (a.track_id != b.track_id) return a.track_id < b.track_id;
    if (a.x != b.x) return a.x < b.x;
    return a.y < b.y;
  });
  return out;
}

std::size_t TrajectoryEngine::surviving_track_count() const {
  return static_cast<std::size_t>(std::count_if(segments_.begin(), segments_.end(), [](const TrajectorySegment &s) {
    return s.state == SegmentState::confirmed;
  }));
}

}  // namespace irtk
