#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "irtk/features.hpp"

namespace irtk {

struct GbdtTrainParams {
  int n_trees = 200;
  double learning_rate = 0.1;
  int max_leaves = 31;
  int min_samples_leaf = 20;
  int n_bins = 64;
  double lambda = 1.0;
  // Gradient-based one-side sampling: keep the top `goss_top_rate` fraction by
  // |gradient| plus a `goss_other_rate` fraction drawn from the rest.
  bool goss_enabled = true;
  double goss_top_rate = 0.2;
  double goss_other_rate = 0.3;

  void validate() const;
};

/// Flat tree node. Internal nodes send x to `left` iff x[feature] <= threshold.
struct TreeNode {
  bool leaf = true;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double evaluate(std::span<const double> x) const;
  std::size_t leaf_count() const;
};

/// Additive tree ensemble with a logistic link.
class GbdtModel {
 public:
  GbdtModel() = default;
  GbdtModel(std::size_t feature_dim, double base_score, double learning_rate, std::vector<Tree> trees = {});

  std::size_t feature_dim() const { return feature_dim_; }
  double base_score() const { return base_score_; }
  double learning_rate() const { return learning_rate_; }
  const std::vector<Tree> &trees() const { return trees_; }

  /// Log-odds before the sigmoid.
  double raw_score(std::span<const double> x) const;
  double predict_proba(std::span<const double> x) const;

  friend bool operator==(const GbdtModel &, const GbdtModel &);

 private:
  std::size_t feature_dim_ = 0;
  double base_score_ = 0.0;
  double learning_rate_ = 0.1;
  std::vector<Tree> trees_;
};

struct TrainingLog {
  // losses[0] is the base-score loss; losses[k] is the mean logistic loss
  // after k trees.
  std::vector<double> losses;
  // Trees whose leaf values had to be shrunk to keep the loss from rising.
  std::size_t shrunk_trees = 0;
};

GbdtModel train(const TrainingSet &data, const GbdtTrainParams &params, std::uint64_t seed,
                TrainingLog *log = nullptr);

double mean_logistic_loss(const GbdtModel &model, const TrainingSet &data);

/// Best root split found by the histogram search (exposed for verification).
struct SplitInfo {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  bool valid() const { return feature >= 0; }
};

SplitInfo find_root_split(std::span<const FeatureVector> features, std::span<const double> gradients,
                          std::span<const double> hessians, const GbdtTrainParams &params);

/// Split gain for left/right gradient and hessian sums.
inline double split_gain(double gl, double hl, double gr, double hr, double lambda) {
  const double g = gl + gr, h = hl + hr;
  return gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda);
}

void save_model(const GbdtModel &model, const std::filesystem::path &path);
GbdtModel load_model(const std::filesystem::path &path);

}  // namespace irtk
