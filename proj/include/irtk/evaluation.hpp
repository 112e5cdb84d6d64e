#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "irtk/features.hpp"
#include "irtk/geometry.hpp"
#include "irtk/trajectory.hpp"

namespace irtk {

enum class Neighborhood { chebyshev, euclidean };

struct FrameCounts {
  std::size_t frame = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct MatchResult {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<FrameCounts> frames;

  void add(const FrameCounts &c);
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
};

/// Greedy one-to-one matching, closest pairs first; a pair matches when its
/// distance under `metric` is within `radius`.
FrameCounts match_frame(std::span<const Vec2> detections, std::span<const Vec2> truths, double radius = 3.0,
                        Neighborhood metric = Neighborhood::chebyshev);

/// Precision, recall and F from counts; undefined ratios are 0.
Metrics f_beta(std::size_t tp, std::size_t fp, std::size_t fn, double beta2 = 1.0);

/// F from precision and recall directly.
double f_beta_from_rates(double precision, double recall, double beta2 = 1.0);

struct EvaluationOptions {
  double radius = 3.0;
  Neighborhood metric = Neighborhood::chebyshev;
  double beta2 = 1.0;
};

struct SceneResult {
  MatchResult counts;
  Metrics metrics;
};

struct EvaluationReport {
  MatchResult counts;
  Metrics metrics;
  std::map<std::string, SceneResult> scenes;  // empty unless annotations name scenes
  std::vector<std::string> warnings;
};

EvaluationReport evaluate(std::span<const Detection> detections, std::span<const Annotation> truths,
                          const EvaluationOptions &options = {});

EvaluationReport evaluate_sequence(const std::filesystem::path &detections_csv,
                                   const std::filesystem::path &annotations_csv,
                                   const EvaluationOptions &options = {});

/// `precision,recall,f_measure,tp,fp,fn`
void write_summary_csv(const EvaluationReport &report, const std::filesystem::path &path);
/// `scene,precision,recall,f_measure,tp,fp,fn`
void write_scene_csv(const EvaluationReport &report, const std::filesystem::path &path);
std::string format_report(const EvaluationReport &report);

}  // namespace irtk
