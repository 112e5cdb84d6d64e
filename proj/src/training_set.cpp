#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "irtk/errors.hpp"
#include "irtk/features.hpp"

namespace irtk {

std::size_t TrainingSet::positives() const {
  std::size_t n = 0;
  for (auto l : labels) n += l;
  return n;
}

void TrainingSet::append(const TrainingSet &other) {
  features.insert(features.end(), other.features.begin(), other.features.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
}

TrainingSet build_training_set(std::span<const Frame> frames, std::span<const Annotation> annotations,
                               const TrainingSetOptions &options) {
  if (annotations.empty()) throw PreconditionError("no annotations: cannot build a training set");
  if (frames.empty()) throw PreconditionError("no frames: cannot build a training set");
  if (!(options.negative_ratio >= 0.0)) throw PreconditionError("negative_ratio must be >= 0");

  std::unordered_map<std::size_t, std::size_t> slot_of_index;
  for (std::size_t i = 0; i < frames.size(); ++i) slot_of_index.emplace(frames[i].index(), i);

  // Positive pixels keyed by (slot, linear pixel index), in annotation order.
  auto key = [](std::size_t slot, std::size_t pixel) { return (static_cast<std::uint64_t>(slot) << 32) | pixel; };
  std::unordered_set<std::uint64_t> positive_keys;
  std::vector<std::pair<std::size_t, Pixel>> positives;
  for (const auto &a : annotations) {
    const auto it = slot_of_index.find(a.frame);
    if (it == slot_of_index.end())
      throw PreconditionError("annotation references missing frame " + std::to_string(a.frame));
    const Frame &f = frames[it->second];
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = a.x + dx, y = a.y + dy;
        if (!f.contains(x, y)) continue;
        const std::size_t lin = static_cast<std::size_t>(y) * f.width() + x;
        if (positive_keys.insert(key(it->second, lin)).second) positives.push_back({it->second, {x, y}});
      }
    }
  }

  std::size_t available = 0;
  for (const auto &f : frames) available += f.pixels().size();
  available -= positive_keys.size();
  const auto wanted = static_cast<std::size_t>(std::llround(options.negative_ratio * positives.size()));
  const std::size_t n_negative = std::min(wanted, available);

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick_frame(0, frames.size() - 1);
  std::unordered_set<std::uint64_t> taken;
  std::vector<std::pair<std::size_t, Pixel>> negatives;
  negatives.reserve(n_negative);
  while (negatives.size() < n_negative) {
    const std::size_t slot = pick_frame(rng);
    const Frame &f = frames[slot];
    std::uniform_int_distribution<std::size_t> pick_pixel(0, f.pixels().size() - 1);
    const std::size_t lin = pick_pixel(rng);
    const auto k = key(slot, lin);
    if (positive_keys.count(k) || !taken.insert(k).second) continue;
    negatives.push_back({slot, {static_cast<int>(lin % f.width()), static_cast<int>(lin / f.width())}});
  }

  std::vector<IntensityHistogram> hists;
  hists.reserve(frames.size());
  for (const auto &f : frames) hists.emplace_back(f);

  TrainingSet out;
  out.features.reserve(positives.size() + negatives.size());
  for (const auto &[slot, p] : positives)
    out.add(extract_features(frames[slot], p, options.scales, hists[slot]), 1);
  for (const auto &[slot, p] : negatives)
    out.add(extract_features(frames[slot], p, options.scales, hists[slot]), 0);
  return out;
}

void save_training_csv(const TrainingSet &set, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const std::size_t dim = set.features.empty() ? 0 : set.features.front().size();
  out << "label";
  for (std::size_t i = 0; i < dim; ++i) out << ",f" << i;
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << static_cast<int>(set.labels[i]);
    for (double v : set.features[i]) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    out << '\n';
  }
}

TrainingSet load_training_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("label", 0) != 0) throw ParseError(path.string() + ": missing header");
  TrainingSet set;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    if (cell != "0" && cell != "1") throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad label");
    const std::uint8_t label = cell == "1" ? 1 : 0;
    FeatureVector f;
    while (std::getline(ss, cell, ',')) {
      char *end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad value '" + cell + "'");
      f.push_back(v);
    }
    if (!set.features.empty() && f.size() != set.features.front().size())
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": inconsistent column count");
    set.add(std::move(f), label);
  }
  return set;
}

}  // namespace irtk
