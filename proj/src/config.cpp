#include "irtk/config.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <sstream>

#include "irtk/errors.hpp"

namespace irtk {

namespace {

std::string trim(const std::string &s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string format_scales(const std::vector<RegionSize> &scales) {
  std::string out;
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(scales[i].width);
    if (scales[i].height != scales[i].width) out += 'x' + std::to_string(scales[i].height);
  }
  return out;
}

std::vector<RegionSize> parse_scales(const std::string &key, const std::string &value) {
  std::vector<RegionSize> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    const auto x = item.find('x');
    const long long w = parse_integer(key, item.substr(0, x));
    const long long h = x == std::string::npos ? w : parse_integer(key, item.substr(x + 1));
    if (w < 1 || h < 1) throw ParseError(key + ": region sizes must be positive");
    out.push_back({static_cast<int>(w), static_cast<int>(h)});
  }
  if (out.empty()) throw ParseError(key + ": at least one scale is required");
  return out;
}

}  // namespace

KeyValues parse_key_values(std::istream &in, const std::string &source) {
  KeyValues out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(source + ":" + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

KeyValues load_key_values(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_key_values(in, path.string());
}

std::string format_key_values(const KeyValues &values) {
  std::string out;
  for (const auto &[k, v] : values) out += k + " = " + v + "\n";
  return out;
}

double parse_real(const std::string &key, const std::string &value) {
  const std::string s = trim(value);
  char *end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
    throw ParseError(key + ": bad number '" + value + "'");
  return v;
}

long long parse_integer(const std::string &key, const std::string &value) {
  const std::string s = trim(value);
  char *end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno == ERANGE) throw ParseError(key + ": bad integer '" + value + "'");
  return v;
}

bool parse_bool(const std::string &key, const std::string &value) {
  const std::string s = trim(value);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ParseError(key + ": bad boolean '" + value + "'");
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::uint64_t parse_seed(const std::string &key, const std::string &value) {
  const std::string s = trim(value);
  char *end = nullptr;
  errno = 0;
  if (s.empty() || s[0] == '-') throw ParseError(key + ": seeds must be non-negative integers");
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (*end != '\0' || errno == ERANGE) throw ParseError(key + ": bad seed '" + value + "'");
  return v;
}

int parse_int(const std::string &key, const std::string &value) {
  const long long v = parse_integer(key, value);
  if (v < -2147483647LL || v > 2147483647LL) throw ParseError(key + ": value out of range");
  return static_cast<int>(v);
}

}  // namespace

void PipelineConfig::set(const std::string &key, const std::string &value) {
  auto &t = trajectory;
  if (key == "median_window") filter.median_window = parse_int(key, value);
  else if (key == "candidate_budget") {
    const long long v = parse_integer(key, value);
    if (v < 1) throw ParseError(key + ": must be positive");
    filter.budget = static_cast<std::size_t>(v);
  } else if (key == "scales") scales = parse_scales(key, value);
  else if (key == "score_threshold") score_threshold = parse_real(key, value);
  else if (key == "negative_ratio") negative_ratio = parse_real(key, value);
  else if (key == "sample_seed") sample_seed = parse_seed(key, value);
  else if (key == "n_trees") gbdt.n_trees = parse_int(key, value);
  else if (key == "learning_rate") gbdt.learning_rate = parse_real(key, value);
  else if (key == "max_leaves") gbdt.max_leaves = parse_int(key, value);
  else if (key == "min_samples_leaf") gbdt.min_samples_leaf = parse_int(key, value);
  else if (key == "n_bins") gbdt.n_bins = parse_int(key, value);
  else if (key == "lambda") gbdt.lambda = parse_real(key, value);
  else if (key == "goss") gbdt.goss_enabled = parse_bool(key, value);
  else if (key == "goss_top_rate") gbdt.goss_top_rate = parse_real(key, value);
  else if (key == "goss_other_rate") gbdt.goss_other_rate = parse_real(key, value);
  else if (key == "train_seed") train_seed = parse_seed(key, value);
  else if (key == "cost_threshold") t.cost_threshold = parse_real(key, value);
  else if (key == "velocity_threshold") t.velocity_threshold = parse_real(key, value);
  else if (key == "similarity_threshold") t.similarity_threshold = parse_real(key, value);
  else if (key == "inactivity_limit") t.inactivity_limit = parse_int(key, value);
  else if (key == "length_fraction") t.length_fraction = parse_real(key, value);
  else if (key == "window") t.window = parse_int(key, value);
  else if (key == "max_branches") t.max_branches = parse_int(key, value);
  else if (key == "crossing_radius") t.crossing_radius = parse_real(key, value);
  else if (key == "confirm_length") {
    if (trim(value) == "auto") t.confirm_length.reset();
    else t.confirm_length = parse_int(key, value);
  } else if (key == "max_corners") matching.max_corners = parse_int(key, value);
  else if (key == "nms_radius") matching.nms_radius = parse_int(key, value);
  else if (key == "search_radius") matching.search_radius = parse_int(key, value);
  else if (key == "patch_size") matching.patch_size = parse_int(key, value);
  else if (key == "min_ncc") matching.min_ncc = parse_real(key, value);
  else if (key == "ransac_iterations") ransac.max_iterations = parse_int(key, value);
  else if (key == "ransac_threshold") ransac.inlier_threshold = parse_real(key, value);
  else if (key == "ransac_min_inliers") ransac.min_inliers = parse_int(key, value);
  else if (key == "ransac_seed") ransac.seed = parse_seed(key, value);
  else if (key == "match_radius") evaluation.radius = parse_real(key, value);
  else if (key == "match_metric") {
    const std::string v = trim(value);
    if (v == "chebyshev") evaluation.metric = Neighborhood::chebyshev;
    else if (v == "euclidean") evaluation.metric = Neighborhood::euclidean;
    else throw ParseError(key + ": expected 'chebyshev' or 'euclidean'");
  } else if (key == "beta2") evaluation.beta2 = parse_real(key, value);
  else if (key == "threads") {
    const long long v = parse_integer(key, value);
    if (v < 0) throw ParseError(key + ": must be non-negative");
    threads = static_cast<unsigned>(v);
  } else throw ParseError("unknown configuration key '" + key + "'");
}

KeyValues PipelineConfig::to_key_values() const {
  const auto &t = trajectory;
  auto i = [](long long v) { return std::to_string(v); };
  auto u = [](std::uint64_t v) { return std::to_string(v); };
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"median_window", i(filter.median_window)},
      {"candidate_budget", u(filter.budget)},
      {"scales", format_scales(scales)},
      {"score_threshold", format_real(score_threshold)},
      {"negative_ratio", format_real(negative_ratio)},
      {"sample_seed", u(sample_seed)},
      {"n_trees", i(gbdt.n_trees)},
      {"learning_rate", format_real(gbdt.learning_rate)},
      {"max_leaves", i(gbdt.max_leaves)},
      {"min_samples_leaf", i(gbdt.min_samples_leaf)},
      {"n_bins", i(gbdt.n_bins)},
      {"lambda", format_real(gbdt.lambda)},
      {"goss", b(gbdt.goss_enabled)},
      {"goss_top_rate", format_real(gbdt.goss_top_rate)},
      {"goss_other_rate", format_real(gbdt.goss_other_rate)},
      {"train_seed", u(train_seed)},
      {"cost_threshold", format_real(t.cost_threshold)},
      {"velocity_threshold", format_real(t.velocity_threshold)},
      {"similarity_threshold", format_real(t.similarity_threshold)},
      {"inactivity_limit", i(t.inactivity_limit)},
      {"length_fraction", format_real(t.length_fraction)},
      {"window", i(t.window)},
      {"max_branches", i(t.max_branches)},
      {"crossing_radius", format_real(t.crossing_radius)},
      {"confirm_length", t.confirm_length ? i(*t.confirm_length) : std::string("auto")},
      {"max_corners", i(matching.max_corners)},
      {"nms_radius", i(matching.nms_radius)},
      {"search_radius", i(matching.search_radius)},
      {"patch_size", i(matching.patch_size)},
      {"min_ncc", format_real(matching.min_ncc)},
      {"ransac_iterations", i(ransac.max_iterations)},
      {"ransac_threshold", format_real(ransac.inlier_threshold)},
      {"ransac_min_inliers", i(ransac.min_inliers)},
      {"ransac_seed", u(ransac.seed)},
      {"match_radius", format_real(evaluation.radius)},
      {"match_metric", evaluation.metric == Neighborhood::chebyshev ? "chebyshev" : "euclidean"},
      {"beta2", format_real(evaluation.beta2)},
      {"threads", i(threads)},
  };
}

void PipelineConfig::validate() const {
  filter.validate();
  gbdt.validate();
  trajectory.validate();
  if (scales.empty()) throw PreconditionError("at least one feature scale is required");
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) throw PreconditionError("score_threshold must lie in [0,1]");
  if (!(negative_ratio >= 0.0)) throw PreconditionError("negative_ratio must be non-negative");
  if (matching.max_corners < 1 || matching.nms_radius < 0 || matching.search_radius < 1)
    throw PreconditionError("corner matching settings must be positive");
  if (matching.patch_size < 3 || matching.patch_size % 2 == 0) throw PreconditionError("patch_size must be odd and >= 3");
  if (!(matching.min_ncc >= -1.0 && matching.min_ncc <= 1.0)) throw PreconditionError("min_ncc must lie in [-1,1]");
  if (ransac.max_iterations < 1 || ransac.min_inliers < 1 || !(ransac.inlier_threshold > 0.0))
    throw PreconditionError("RANSAC settings must be positive");
  if (!(evaluation.radius >= 0.0)) throw PreconditionError("match_radius must be non-negative");
  if (!(evaluation.beta2 > 0.0)) throw PreconditionError("beta2 must be positive");
}

TrainingSetOptions PipelineConfig::training_options() const {
  TrainingSetOptions o;
  o.negative_ratio = negative_ratio;
  o.scales = scales;
  o.seed = sample_seed;
  return o;
}

PipelineConfig load_config(const std::filesystem::path &path) {
  PipelineConfig cfg;
  for (const auto &[k, v] : load_key_values(path)) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

void save_config(const PipelineConfig &config, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_key_values(config.to_key_values());
}

}  // namespace irtk
