#include "irtk/candidates.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "irtk/errors.hpp"
#include "irtk/gbdt.hpp"

namespace irtk {

void InterestFilterParams::validate() const {
  if (median_window < 3 || median_window % 2 == 0)
    throw PreconditionError("median_window must be odd and >= 3");
  if (!(k1 > 0.0)) throw PreconditionError("k1 must be positive");
  if (!(k2 < 0.0)) throw PreconditionError("k2 must be negative");
  if (budget < 1) throw PreconditionError("candidate budget must be >= 1");
}

namespace {

LabelMask threshold_difference(const std::vector<std::int32_t> &diff, int w, int h, double k1, double k2) {
  LabelMask mask(w, h);
  for (std::size_t i = 0; i < diff.size(); ++i) {
    const double d = diff[i];
    mask.labels[i] = d > k1 ? 1 : (d < k2 ? -1 : 0);
  }
  return mask;
}

struct DifferenceImage {
  std::vector<std::uint16_t> median;
  std::vector<std::int32_t> diff;
  int range = 0;
};

DifferenceImage difference_image(const Frame &frame, int window) {
  DifferenceImage out;
  out.median = median_filter(frame, window);
  const auto px = frame.pixels();
  out.diff.resize(px.size());
  for (std::size_t i = 0; i < px.size(); ++i)
    out.diff[i] = static_cast<std::int32_t>(px[i]) - static_cast<std::int32_t>(out.median[i]);
  const auto [mn, mx] = std::minmax_element(px.begin(), px.end());
  out.range = static_cast<int>(*mx) - static_cast<int>(*mn);
  return out;
}

// Returns 0 when the frame is flat (no magnitude yields any interest pixel).
int bisect_magnitude(const DifferenceImage &d, int w, int h, std::size_t budget) {
  if (d.range == 0) return 0;
  // Invariant: count(hi) < budget; count(lo) >= budget unless lo is the
  // untested sentinel 0.
  int lo = 0, hi = d.range;
  for (int iter = 0; iter < 20 && hi - lo > 1; ++iter) {
    const int mid = lo + (hi - lo) / 2;
    const double m = mid;
    if (count_components(threshold_difference(d.diff, w, h, m, -m)) >= budget)
      lo = mid;
    else
      hi = mid;
  }
  return lo > 0 ? lo : hi;
}

}  // namespace

LabelMask interest_mask(const Frame &frame, int median_window, double k1, double k2) {
  const auto med = median_filter(frame, median_window);
  const auto px = frame.pixels();
  LabelMask mask(frame.width(), frame.height());
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double v = px[i];
    const double m = med[i];
    mask.labels[i] = v > m + k1 ? 1 : (v < m + k2 ? -1 : 0);
  }
  return mask;
}

double search_threshold(const Frame &frame, const InterestFilterParams &params) {
  const auto d = difference_image(frame, params.median_window);
  return bisect_magnitude(d, frame.width(), frame.height(), params.budget);
}

std::vector<Candidate> select_candidates(const Frame &frame, const InterestFilterParams &params) {
  if (params.budget < 1) throw PreconditionError("candidate budget must be >= 1");
  const int w = frame.width(), h = frame.height();
  const auto d = difference_image(frame, params.median_window);
  const int magnitude = bisect_magnitude(d, w, h, params.budget);
  if (magnitude == 0) return {};

  const double m = magnitude;
  auto comps = connected_components(threshold_difference(d.diff, w, h, m, -m));

  std::vector<Candidate> out;
  out.reserve(comps.size());
  for (const auto &c : comps) {
    Pixel rep = c.pixels.front();
    std::uint16_t best = frame.at(rep.x, rep.y);
    for (const auto &p : c.pixels) {
      const std::uint16_t v = frame.at(p.x, p.y);
      if (c.polarity == Polarity::bright ? v > best : v < best) {
        best = v;
        rep = p;
      }
    }
    Candidate cand;
    cand.frame = frame.index();
    cand.pixel = rep;
    cand.position = to_vec(rep);
    cand.polarity = c.polarity;
    cand.score = 1.0;
    cand.contrast = std::abs(d.diff[static_cast<std::size_t>(rep.y) * w + rep.x]);
    out.push_back(cand);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Candidate &a, const Candidate &b) { return a.contrast > b.contrast; });
  if (out.size() > params.budget) out.resize(params.budget);
  return out;
}

std::vector<Candidate> detect_candidates(const Frame &frame, const InterestFilterParams &params,
                                         std::span<const RegionSize> scales, const GbdtModel &model,
                                         double threshold) {
  if (model.feature_dim() != kFeaturesPerScale * scales.size())
    throw DimensionError("model expects " + std::to_string(model.feature_dim()) + " features, scales give " +
                         std::to_string(kFeaturesPerScale * scales.size()));
  auto cands = select_candidates(frame, params);
  const IntensityHistogram hist(frame);
  std::vector<Candidate> kept;
  kept.reserve(cands.size());
  for (auto &c : cands) {
    c.score = model.predict_proba(extract_features(frame, c.pixel, scales, hist));
    if (c.score >= threshold) kept.push_back(c);
  }
  return kept;
}

void save_candidates_csv(std::span<const Candidate> candidates, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "frame,x,y,polarity,score\n";
  char buf[128];
  for (const auto &c : candidates) {
    std::snprintf(buf, sizeof buf, "%zu,%.3f,%.3f,%s,%.6f\n", c.frame, c.position.x, c.position.y,
                  c.polarity == Polarity::bright ? "bright" : "dark", c.score);
    out << buf;
  }
}

}  // namespace irtk
