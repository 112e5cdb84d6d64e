#include "irtk/features.hpp"

#include <algorithm>
#include <cmath>

namespace irtk {

std::vector<RegionSize> default_scales() { return {{3, 3}, {7, 7}, {11, 11}, {15, 15}}; }

IntensityHistogram::IntensityHistogram(const Frame &frame) {
  std::array<std::size_t, kBins> counts{};
  for (std::uint16_t v : frame.pixels()) ++counts[bin_of(v)];
  const double total = static_cast<double>(frame.pixels().size());
  for (int b = 0; b < kBins; ++b) {
    const double p = counts[b] / total;
    probability_[b] = p;
    entropy_term_[b] = p > 0.0 ? -p * std::log2(p) : 0.0;
  }
}

namespace {

void region_statistics(const Frame &frame, Pixel center, RegionSize size, const IntensityHistogram &hist,
                       std::vector<double> &scratch, double *out) {
  const int w = frame.width(), h = frame.height();
  const int rx = size.width / 2, ry = size.height / 2;
  const int x0 = center.x - rx, y0 = center.y - ry;
  scratch.clear();
  const bool interior = x0 >= 0 && y0 >= 0 && x0 + size.width <= w && y0 + size.height <= h;
  double entropy = 0.0;
  double vmax = -1.0, vmin = 65536.0, sum = 0.0;
  for (int dy = 0; dy < size.height; ++dy) {
    const int y = interior ? y0 + dy : reflect_index(y0 + dy, h);
    for (int dx = 0; dx < size.width; ++dx) {
      const int x = interior ? x0 + dx : reflect_index(x0 + dx, w);
      const std::uint16_t v = frame.at(x, y);
      entropy += hist.entropy_term(v);
      const double dv = v;
      scratch.push_back(dv);
      sum += dv;
      vmax = std::max(vmax, dv);
      vmin = std::min(vmin, dv);
    }
  }
  const double n = static_cast<double>(scratch.size());
  const double mean = sum / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : scratch) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  double kurtosis = 0.0, skew = 0.0;
  if (m2 > 0.0) {
    const double sigma = std::sqrt(m2);
    kurtosis = m4 / (m2 * m2) - 3.0;
    skew = m3 / (m2 * sigma);
  }
  out[static_cast<std::size_t>(Statistic::kurtosis)] = kurtosis;
  out[static_cast<std::size_t>(Statistic::skew)] = skew;
  out[static_cast<std::size_t>(Statistic::entropy)] = entropy;
  out[static_cast<std::size_t>(Statistic::mean)] = mean;
  out[static_cast<std::size_t>(Statistic::variance)] = m2;
  out[static_cast<std::size_t>(Statistic::maximum)] = vmax;
  out[static_cast<std::size_t>(Statistic::minimum)] = vmin;
}

}  // namespace

FeatureVector extract_features(const Frame &frame, Pixel position, std::span<const RegionSize> scales,
                               const IntensityHistogram &histogram) {
  FeatureVector out(kFeaturesPerScale * scales.size());
  std::vector<double> scratch;
  scratch.reserve(256);
  for (std::size_t s = 0; s < scales.size(); ++s)
    region_statistics(frame, position, scales[s], histogram, scratch, out.data() + s * kFeaturesPerScale);
  return out;
}

}  // namespace irtk
