#include "irtk/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "irtk/errors.hpp"

namespace irtk {

void GbdtTrainParams::validate() const {
  if (n_trees < 0) throw PreconditionError("n_trees must be >= 0");
  if (!(learning_rate > 0.0)) throw PreconditionError("learning_rate must be positive");
  if (max_leaves < 2) throw PreconditionError("max_leaves must be >= 2");
  if (min_samples_leaf < 1) throw PreconditionError("min_samples_leaf must be >= 1");
  if (n_bins < 2 || n_bins > 256) throw PreconditionError("n_bins must be in [2, 256]");
  if (!(lambda >= 0.0)) throw PreconditionError("lambda must be >= 0");
  if (goss_enabled) {
    if (!(goss_top_rate > 0.0 && goss_top_rate < 1.0)) throw PreconditionError("goss_top_rate must be in (0,1)");
    if (!(goss_other_rate > 0.0 && goss_other_rate < 1.0))
      throw PreconditionError("goss_other_rate must be in (0,1)");
    if (goss_top_rate + goss_other_rate > 1.0 + 1e-12)
      throw PreconditionError("goss_top_rate + goss_other_rate must be <= 1");
  }
}

double Tree::evaluate(std::span<const double> x) const {
  int i = 0;
  while (!nodes[i].leaf) i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  return nodes[i].value;
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode &n) { return n.leaf; }));
}

GbdtModel::GbdtModel(std::size_t feature_dim, double base_score, double learning_rate, std::vector<Tree> trees)
    : feature_dim_(feature_dim), base_score_(base_score), learning_rate_(learning_rate), trees_(std::move(trees)) {}

double GbdtModel::raw_score(std::span<const double> x) const {
  if (x.size() != feature_dim_)
    throw DimensionError("expected " + std::to_string(feature_dim_) + " features, got " + std::to_string(x.size()));
  double sum = 0.0;
  for (const auto &t : trees_) sum += t.evaluate(x);
  return base_score_ + learning_rate_ * sum;
}

double GbdtModel::predict_proba(std::span<const double> x) const {
  const double z = raw_score(x);
  return 1.0 / (1.0 + std::exp(-z));
}

bool operator==(const GbdtModel &a, const GbdtModel &b) {
  if (a.feature_dim_ != b.feature_dim_ || a.base_score_ != b.base_score_ || a.learning_rate_ != b.learning_rate_ ||
      a.trees_.size() != b.trees_.size())
    return false;
  for (std::size_t t = 0; t < a.trees_.size(); ++t) {
    const auto &na = a.trees_[t].nodes, &nb = b.trees_[t].nodes;
    if (na.size() != nb.size()) return false;
    for (std::size_t i = 0; i < na.size(); ++i) {
      if (na[i].leaf != nb[i].leaf || na[i].feature != nb[i].feature || na[i].threshold != nb[i].threshold ||
          na[i].left != nb[i].left || na[i].right != nb[i].right || na[i].value != nb[i].value)
        return false;
    }
  }
  return true;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + e^z) - y z, evaluated without overflow.
double logistic_loss(double z, double y) {
  const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return softplus - y * z;
}

// Equal-frequency bins per feature. Thresholds sit halfway between the largest
// value of a bin and the smallest value of the next, so `x <= threshold`
// agrees with the bin assignment of every training value.
class Binner {
 public:
  Binner(std::span<const FeatureVector> features, int n_bins) {
    const std::size_t n = features.size();
    const std::size_t dim = features.front().size();
    uppers_.resize(dim);
    std::vector<double> col(n);
    for (std::size_t f = 0; f < dim; ++f) {
      for (std::size_t i = 0; i < n; ++i) col[i] = features[i][f];
      std::sort(col.begin(), col.end());
      std::vector<double> distinct;
      std::vector<std::size_t> counts;
      for (double v : col) {
        if (distinct.empty() || v != distinct.back()) {
          distinct.push_back(v);
          counts.push_back(1);
        } else {
          ++counts.back();
        }
      }
      auto &up = uppers_[f];
      if (distinct.size() <= static_cast<std::size_t>(n_bins)) {
        for (std::size_t i = 0; i + 1 < distinct.size(); ++i) up.push_back(midpoint(distinct[i], distinct[i + 1]));
      } else {
        std::size_t cum = 0;
        for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
          cum += counts[i];
          if (up.size() + 1 < static_cast<std::size_t>(n_bins) &&
              static_cast<double>(cum) >= static_cast<double>(up.size() + 1) * n / n_bins)
            up.push_back(midpoint(distinct[i], distinct[i + 1]));
        }
      }
    }
  }

  std::size_t dim() const { return uppers_.size(); }
  // Number of bins of feature f; the last bin is unbounded above.
  int bins(std::size_t f) const { return static_cast<int>(uppers_[f].size()) + 1; }
  double threshold(std::size_t f, int bin) const { return uppers_[f][bin]; }
  std::uint8_t bin_of(std::size_t f, double v) const {
    const auto &up = uppers_[f];
    return static_cast<std::uint8_t>(std::lower_bound(up.begin(), up.end(), v) - up.begin());
  }

 private:
  static double midpoint(double a, double b) {
    const double m = a + (b - a) / 2.0;
    return m < b ? m : a;
  }
  std::vector<std::vector<double>> uppers_;
};

struct BinnedMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<std::uint8_t> data;  // column-major
  const std::uint8_t *column(std::size_t f) const { return data.data() + f * rows; }
};

BinnedMatrix bin_features(std::span<const FeatureVector> features, const Binner &binner) {
  BinnedMatrix m;
  m.rows = features.size();
  m.dim = binner.dim();
  m.data.resize(m.rows * m.dim);
  for (std::size_t f = 0; f < m.dim; ++f)
    for (std::size_t i = 0; i < m.rows; ++i) m.data[f * m.rows + i] = binner.bin_of(f, features[i][f]);
  return m;
}

struct Histogram {
  std::vector<double> grad;
  std::vector<double> hess;
  std::vector<std::uint32_t> count;
  std::vector<std::size_t> offset;  // start of each feature's bins

  explicit Histogram(const Binner &binner) {
    offset.resize(binner.dim() + 1, 0);
    for (std::size_t f = 0; f < binner.dim(); ++f) offset[f + 1] = offset[f] + binner.bins(f);
    grad.assign(offset.back(), 0.0);
    hess.assign(offset.back(), 0.0);
    count.assign(offset.back(), 0);
  }

  void build(const BinnedMatrix &m, std::span<const std::uint32_t> rows, std::span<const double> g,
             std::span<const double> h) {
    std::fill(grad.begin(), grad.end(), 0.0);
    std::fill(hess.begin(), hess.end(), 0.0);
    std::fill(count.begin(), count.end(), 0u);
    for (std::size_t f = 0; f < m.dim; ++f) {
      const std::uint8_t *col = m.column(f);
      double *gf = grad.data() + offset[f];
      double *hf = hess.data() + offset[f];
      std::uint32_t *cf = count.data() + offset[f];
      for (std::uint32_t r : rows) {
        const std::uint8_t b = col[r];
        gf[b] += g[r];
        hf[b] += h[r];
        ++cf[b];
      }
    }
  }

  // this = parent - sibling
  void subtract(const Histogram &parent, const Histogram &sibling) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
      grad[i] = parent.grad[i] - sibling.grad[i];
      hess[i] = parent.hess[i] - sibling.hess[i];
      count[i] = parent.count[i] - sibling.count[i];
    }
  }
};

struct BinSplit {
  int feature = -1;
  int bin = -1;
  double gain = 0.0;
};

BinSplit best_bin_split(const Histogram &hist, const Binner &binner, double G, double H, std::size_t n,
                        const GbdtTrainParams &params) {
  BinSplit best;
  const auto min_leaf = static_cast<std::size_t>(params.min_samples_leaf);
  for (std::size_t f = 0; f < binner.dim(); ++f) {
    const int nb = binner.bins(f);
    double gl = 0.0, hl = 0.0;
    std::size_t cl = 0;
    for (int b = 0; b + 1 < nb; ++b) {
      const std::size_t i = hist.offset[f] + b;
      gl += hist.grad[i];
      hl += hist.hess[i];
      cl += hist.count[i];
      if (cl < min_leaf) continue;
      if (n - cl < min_leaf) break;
      if (hist.count[i] == 0) continue;  // same partition as the previous bin
      const double gain = split_gain(gl, hl, G - gl, H - hl, params.lambda);
      if (gain > best.gain) best = {static_cast<int>(f), b, gain};
    }
  }
  return best;
}

struct Leaf {
  std::vector<std::uint32_t> rows;
  double G = 0.0;
  double H = 0.0;
  Histogram hist;
  BinSplit split;
  int node = 0;
};

class TreeGrower {
 public:
  TreeGrower(const BinnedMatrix &m, const Binner &binner, const GbdtTrainParams &params)
      : m_(m), binner_(binner), params_(params) {}

  Tree grow(std::vector<std::uint32_t> rows, std::span<const double> g, std::span<const double> h) {
    Tree tree;
    tree.nodes.push_back(TreeNode{});
    std::vector<Leaf> leaves;
    leaves.push_back(make_leaf(std::move(rows), g, h, 0));
    while (static_cast<int>(leaves.size()) < params_.max_leaves) {
      int pick = -1;
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        if (leaves[i].split.feature < 0) continue;
        if (pick < 0 || leaves[i].split.gain > leaves[pick].split.gain) pick = static_cast<int>(i);
      }
      if (pick < 0) break;

      Leaf parent = std::move(leaves[pick]);
      const int f = parent.split.feature;
      const int bin = parent.split.bin;
      const std::uint8_t *col = m_.column(f);
      std::vector<std::uint32_t> left_rows, right_rows;
      for (std::uint32_t r : parent.rows) (col[r] <= bin ? left_rows : right_rows).push_back(r);

      TreeNode &node = tree.nodes[parent.node];
      node.leaf = false;
      node.feature = f;
      node.threshold = binner_.threshold(f, bin);
      node.left = static_cast<int>(tree.nodes.size());
      node.right = node.left + 1;
      const int left_node = node.left, right_node = node.right;
      tree.nodes.push_back(TreeNode{});
      tree.nodes.push_back(TreeNode{});

      // Build the smaller child directly and derive the other by subtraction.
      const bool left_small = left_rows.size() <= right_rows.size();
      Leaf small = make_leaf(left_small ? std::move(left_rows) : std::move(right_rows), g, h,
                             left_small ? left_node : right_node);
      Leaf large = make_leaf_from_parent(parent, small, left_small ? std::move(right_rows) : std::move(left_rows),
                                         left_small ? right_node : left_node);
      Leaf &left = left_small ? small : large;
      Leaf &right = left_small ? large : small;
      leaves[pick] = std::move(left);
      leaves.push_back(std::move(right));
    }
    for (const auto &leaf : leaves) {
      TreeNode &node = tree.nodes[leaf.node];
      node.leaf = true;
      node.value = -leaf.G / (leaf.H + params_.lambda);
    }
    return tree;
  }

  BinSplit root_split(std::vector<std::uint32_t> rows, std::span<const double> g, std::span<const double> h) {
    return make_leaf(std::move(rows), g, h, 0).split;
  }

 private:
  Leaf make_leaf(std::vector<std::uint32_t> rows, std::span<const double> g, std::span<const double> h, int node) {
    Leaf leaf{std::move(rows), 0.0, 0.0, Histogram(binner_), {}, node};
    for (std::uint32_t r : leaf.rows) {
      leaf.G += g[r];
      leaf.H += h[r];
    }
    leaf.hist.build(m_, leaf.rows, g, h);
    leaf.split = best_bin_split(leaf.hist, binner_, leaf.G, leaf.H, leaf.rows.size(), params_);
    return leaf;
  }

  Leaf make_leaf_from_parent(const Leaf &parent, const Leaf &sibling, std::vector<std::uint32_t> rows, int node) {
    Leaf leaf{std::move(rows), parent.G - sibling.G, parent.H - sibling.H, Histogram(binner_), {}, node};
    leaf.hist.subtract(parent.hist, sibling.hist);
    leaf.split = best_bin_split(leaf.hist, binner_, leaf.G, leaf.H, leaf.rows.size(), params_);
    return leaf;
  }

  const BinnedMatrix &m_;
  const Binner &binner_;
  const GbdtTrainParams &params_;
};

void check_training_data(const TrainingSet &data) {
  if (data.size() == 0 || data.features.size() != data.labels.size())
    throw PreconditionError("training set is empty or malformed");
  const std::size_t dim = data.features.front().size();
  if (dim == 0) throw DimensionError("training features are empty");
  bool has0 = false, has1 = false;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.features[i].size() != dim) throw DimensionError("inconsistent feature dimension in training set");
    for (double v : data.features[i])
      if (!std::isfinite(v)) throw PreconditionError("non-finite feature value");
    (data.labels[i] ? has1 : has0) = true;
  }
  if (!has0 || !has1) throw PreconditionError("training set has a single class");
}

// Row subset and gradient weights for one boosting iteration.
std::vector<std::uint32_t> goss_rows(std::span<const double> grad, const GbdtTrainParams &params,
                                     std::mt19937_64 &rng, std::vector<double> &weight) {
  const std::size_t n = grad.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return std::abs(grad[a]) > std::abs(grad[b]); });
  const auto top_n = std::min(n, static_cast<std::size_t>(std::floor(params.goss_top_rate * n + 1e-9)));
  const auto other_n = static_cast<std::size_t>(std::floor(params.goss_other_rate * n + 1e-9));
  std::fill(weight.begin(), weight.end(), 1.0);

  std::vector<std::uint32_t> rows(order.begin(), order.begin() + top_n);
  std::vector<std::uint32_t> rest(order.begin() + top_n, order.end());
  std::sort(rest.begin(), rest.end());
  if (other_n >= rest.size()) {
    rows.insert(rows.end(), rest.begin(), rest.end());
  } else if (other_n > 0) {
    std::vector<std::uint32_t> sampled;
    sampled.reserve(other_n);
    std::sample(rest.begin(), rest.end(), std::back_inserter(sampled), other_n, rng);
    const double amplify = static_cast<double>(rest.size()) / static_cast<double>(other_n);
    for (std::uint32_t r : sampled) weight[r] = amplify;
    rows.insert(rows.end(), sampled.begin(), sampled.end());
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

double mean_logistic_loss(const GbdtModel &model, const TrainingSet &data) {
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) sum += logistic_loss(model.raw_score(data.features[i]), data.labels[i]);
  return sum / static_cast<double>(data.size());
}

GbdtModel train(const TrainingSet &data, const GbdtTrainParams &params, std::uint64_t seed, TrainingLog *log) {
  params.validate();
  check_training_data(data);
  const std::size_t n = data.size();
  const std::size_t dim = data.features.front().size();
  if (n > std::numeric_limits<std::uint32_t>::max()) throw PreconditionError("training set too large");

  const double p = std::clamp(static_cast<double>(data.positives()) / n, 1e-6, 1.0 - 1e-6);
  const double base = std::log(p / (1.0 - p));

  const Binner binner(data.features, params.n_bins);
  const BinnedMatrix binned = bin_features(data.features, binner);
  TreeGrower grower(binned, binner, params);
  std::mt19937_64 rng(seed);

  std::vector<double> score(n, base), grad(n), hess(n), weight(n, 1.0), wg(n), wh(n);
  auto total_loss = [&](std::span<const double> z) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += logistic_loss(z[i], data.labels[i]);
    return s / static_cast<double>(n);
  };
  double loss = total_loss(score);
  if (log) {
    log->losses.assign(1, loss);
    log->shrunk_trees = 0;
  }

  std::vector<std::uint32_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0u);
  std::vector<Tree> trees;
  trees.reserve(params.n_trees);
  std::vector<double> trial(n);
  for (int iter = 0; iter < params.n_trees; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      const double pr = sigmoid(score[i]);
      grad[i] = pr - data.labels[i];
      hess[i] = pr * (1.0 - pr);
    }
    std::vector<std::uint32_t> rows = params.goss_enabled ? goss_rows(grad, params, rng, weight) : all_rows;
    for (std::size_t i = 0; i < n; ++i) {
      wg[i] = grad[i] * weight[i];
      wh[i] = hess[i] * weight[i];
    }
    Tree tree = grower.grow(std::move(rows), wg, wh);

    // Halve the leaf values until the full-data loss does not rise; fall back
    // to a zero tree after a bounded number of attempts.
    double new_loss = loss;
    for (int attempt = 0;; ++attempt) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = score[i] + params.learning_rate * tree.evaluate(data.features[i]);
      new_loss = total_loss(trial);
      if (new_loss <= loss) break;
      if (attempt == 0 && log) ++log->shrunk_trees;
      const bool give_up = attempt == 30;
      for (auto &node : tree.nodes)
        if (node.leaf) node.value = give_up ? 0.0 : node.value * 0.5;
      if (give_up) {
        trial = score;
        new_loss = loss;
        break;
      }
    }
    score.swap(trial);
    loss = new_loss;
    if (log) log->losses.push_back(loss);
    trees.push_back(std::move(tree));
  }
  return GbdtModel(dim, base, params.learning_rate, std::move(trees));
}

SplitInfo find_root_split(std::span<const FeatureVector> features, std::span<const double> gradients,
                          std::span<const double> hessians, const GbdtTrainParams &params) {
  if (features.empty()) return {};
  const Binner binner(features, params.n_bins);
  const BinnedMatrix binned = bin_features(features, binner);
  TreeGrower grower(binned, binner, params);
  std::vector<std::uint32_t> rows(features.size());
  std::iota(rows.begin(), rows.end(), 0u);
  const BinSplit s = grower.root_split(std::move(rows), gradients, hessians);
  if (s.feature < 0) return {};
  return {s.feature, binner.threshold(s.feature, s.bin), s.gain};
}

}  // namespace irtk
