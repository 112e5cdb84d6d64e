#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "irtk/imaging.hpp"

namespace irtk {

/// Side lengths of a rectangular local region (width = columns, height = rows).
struct RegionSize {
  int width = 3;
  int height = 3;
  friend constexpr bool operator==(const RegionSize &, const RegionSize &) = default;
};

/// The four local region sizes used by the detector.
std::vector<RegionSize> default_scales();

inline constexpr std::size_t kFeaturesPerScale = 7;

/// Order of the statistics within each scale block of a FeatureVector.
enum class Statistic : std::size_t { kurtosis = 0, skew, entropy, mean, variance, maximum, minimum };

using FeatureVector = std::vector<double>;

/// 256 equal-width bins over [0, 65535], normalized over the whole frame.
class IntensityHistogram {
 public:
  static constexpr int kBins = 256;

  explicit IntensityHistogram(const Frame &frame);

  static int bin_of(std::uint16_t v) { return v >> 8; }
  double probability(std::uint16_t v) const { return probability_[bin_of(v)]; }
  /// -p log2 p for the bin holding v (0 for empty bins).
  double entropy_term(std::uint16_t v) const { return entropy_term_[bin_of(v)]; }

 private:
  std::array<double, kBins> probability_{};
  std::array<double, kBins> entropy_term_{};
};

/// Seven statistics per scale over the mirror-padded region centered on
/// `position`, concatenated in scale order. Skew and kurtosis are 0 for a
/// constant region.
FeatureVector extract_features(const Frame &frame, Pixel position, std::span<const RegionSize> scales,
                               const IntensityHistogram &histogram);

/// Ground-truth target center in one frame.
struct Annotation {
  std::size_t frame = 0;
  int target_id = 0;
  int x = 0;
  int y = 0;
  std::string scene;
};

struct TrainingSet {
  std::vector<FeatureVector> features;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t positives() const;
  void add(FeatureVector f, std::uint8_t label) {
    features.push_back(std::move(f));
    labels.push_back(label);
  }
  void append(const TrainingSet &other);
};

struct TrainingSetOptions {
  double negative_ratio = 10.0;
  std::vector<RegionSize> scales = default_scales();
  std::uint64_t seed = 0;
};

/// Positives: every pixel of the 3x3 block around each annotated center,
/// clipped to the frame. Negatives: uniformly drawn non-positive pixels,
/// negative_ratio times as many as positives. Annotations are matched to
/// frames by Frame::index().
TrainingSet build_training_set(std::span<const Frame> frames, std::span<const Annotation> annotations,
                               const TrainingSetOptions &options);

/// CSV with header `label,f0,...,f{n-1}`.
void save_training_csv(const TrainingSet &set, const std::filesystem::path &path);
TrainingSet load_training_csv(const std::filesystem::path &path);

}  // namespace irtk
