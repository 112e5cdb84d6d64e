#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "irtk/candidates.hpp"
#include "irtk/evaluation.hpp"
#include "irtk/features.hpp"
#include "irtk/gbdt.hpp"
#include "irtk/registration.hpp"
#include "irtk/trajectory.hpp"

namespace irtk {

/// Ordered `key = value` pairs. Blank lines and '#' comments are ignored.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

KeyValues parse_key_values(std::istream &in, const std::string &source = "<input>");
KeyValues load_key_values(const std::filesystem::path &path);
std::string format_key_values(const KeyValues &values);

// Strict value parsers shared by config readers; they throw ParseError.
double parse_real(const std::string &key, const std::string &value);
long long parse_integer(const std::string &key, const std::string &value);
bool parse_bool(const std::string &key, const std::string &value);
std::string format_real(double v);

struct PipelineConfig {
  InterestFilterParams filter;
  std::vector<RegionSize> scales = default_scales();
  double score_threshold = 0.5;
  double negative_ratio = 10.0;
  std::uint64_t sample_seed = 0;
  GbdtTrainParams gbdt;
  std::uint64_t train_seed = 0;
  TrajectoryParams trajectory;
  MatchParams matching;
  RansacParams ransac;
  EvaluationOptions evaluation;
  unsigned threads = 0;  // 0: IRTK_THREADS or hardware concurrency

  /// Throws ParseError for unknown keys or malformed values.
  void set(const std::string &key, const std::string &value);
  KeyValues to_key_values() const;
  void validate() const;

  TrainingSetOptions training_options() const;
};

/// Defaults overridden by the file's entries, then validated.
PipelineConfig load_config(const std::filesystem::path &path);
void save_config(const PipelineConfig &config, const std::filesystem::path &path);

}  // namespace irtk
