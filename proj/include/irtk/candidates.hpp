#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "irtk/features.hpp"
#include "irtk/geometry.hpp"
#include "irtk/imaging.hpp"

namespace irtk {

class GbdtModel;

struct InterestFilterParams {
  int median_window = 11;
  double k1 = 500.0;
  double k2 = -500.0;
  std::size_t budget = 3500;

  void validate() const;
};

/// A detected spot in one frame.
struct Candidate {
  std::size_t frame = 0;
  Vec2 position;  // representative pixel, or its remapped location
  Pixel pixel;    // representative pixel in the source frame
  Polarity polarity = Polarity::bright;
  double score = 1.0;
  double contrast = 0.0;  // |I - median| at the representative pixel
};

/// Median over a window x window neighborhood with mirror borders.
std::vector<std::uint16_t> median_filter(const Frame &frame, int window);

LabelMask interest_mask(const Frame &frame, int median_window, double k1, double k2);

/// Searches a shared magnitude m (k1 = +m, k2 = -m) downward from the frame's
/// dynamic range for the largest m whose component count reaches the budget,
/// then keeps at most `budget` components ranked by contrast. params.k1/k2 are
/// ignored.
std::vector<Candidate> select_candidates(const Frame &frame, const InterestFilterParams &params);

/// Magnitude chosen by the search in select_candidates (exposed for logging).
double search_threshold(const Frame &frame, const InterestFilterParams &params);

/// select_candidates followed by classification; keeps score >= threshold.
std::vector<Candidate> detect_candidates(const Frame &frame, const InterestFilterParams &params,
                                         std::span<const RegionSize> scales, const GbdtModel &model,
                                         double threshold);

/// CSV `frame,x,y,polarity,score`.
void save_candidates_csv(std::span<const Candidate> candidates, const std::filesystem::path &path);

}  // namespace irtk
