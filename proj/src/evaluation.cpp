#include "irtk/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <tuple>

#include "irtk/dataset.hpp"
#include "irtk/errors.hpp"

namespace irtk {

void MatchResult::add(const FrameCounts &c) {
  tp += c.tp;
  fp += c.fp;
  fn += c.fn;
  frames.push_back(c);
}

FrameCounts match_frame(std::span<const Vec2> detections, std::span<const Vec2> truths, double radius,
                        Neighborhood metric) {
  struct Pair {
    double d;
    double euclid;
    std::size_t det, truth;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < detections.size(); ++i)
    for (std::size_t j = 0; j < truths.size(); ++j) {
      const Vec2 diff = detections[i] - truths[j];
      const double euclid = norm(diff);
      const double d = metric == Neighborhood::chebyshev ? std::max(std::abs(diff.x), std::abs(diff.y)) : euclid;
      if (d <= radius) pairs.push_back({d, euclid, i, j});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair &a, const Pair &b) {
    return std::tie(a.d, a.euclid, a.det, a.truth) < std::tie(b.d, b.euclid, b.det, b.truth);
  });
  std::vector<bool> det_used(detections.size(), false), truth_used(truths.size(), false);
  FrameCounts out;
  for (const auto &p : pairs) {
    if (det_used[p.det] || truth_used[p.truth]) continue;
    det_used[p.det] = truth_used[p.truth] = true;
    ++out.tp;
  }
  out.fp = detections.size() - out.tp;
  out.fn = truths.size() - out.tp;
  return out;
}

Metrics f_beta(std::size_t tp, std::size_t fp, std::size_t fn, double beta2) {
  Metrics m;
  const double t = static_cast<double>(tp);
  if (tp + fp > 0) m.precision = t / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = t / static_cast<double>(tp + fn);
  // Written on counts so that rational inputs give the exactly rounded result.
  if (tp > 0) m.f_measure = (1.0 + beta2) * t / ((1.0 + beta2) * t + beta2 * static_cast<double>(fn) + static_cast<double>(fp));
  return m;
}

double f_beta_from_rates(double precision, double recall, double beta2) {
  const double denom = beta2 * precision + recall;
  if (denom <= 0.0) return 0.0;
  return (1.0 + beta2) * precision * recall / denom;
}

EvaluationReport evaluate(std::span<const Detection> detections, std::span<const Annotation> truths,
                          const EvaluationOptions &options) {
  EvaluationReport report;
  std::map<std::size_t, std::vector<Vec2>> det_by_frame, truth_by_frame;
  std::map<std::size_t, std::string> scene_of_frame;
  bool has_scenes = false;
  for (const auto &d : detections) det_by_frame[d.frame].push_back({d.x, d.y});
  for (const auto &a : truths) {
    truth_by_frame[a.frame].push_back({static_cast<double>(a.x), static_cast<double>(a.y)});
    if (!a.scene.empty()) {
      has_scenes = true;
      scene_of_frame[a.frame] = a.scene;
    }
  }
  std::set<std::size_t> frames;
  for (const auto &[f, v] : det_by_frame) frames.insert(f);
  for (const auto &[f, v] : truth_by_frame) frames.insert(f);
  if (!truth_by_frame.empty() && !det_by_frame.empty() && det_by_frame.rbegin()->first > truth_by_frame.rbegin()->first)
    report.warnings.push_back("detections reference frame " + std::to_string(det_by_frame.rbegin()->first) +
                              " beyond the last annotated frame " + std::to_string(truth_by_frame.rbegin()->first));

  static const std::vector<Vec2> none;
  for (std::size_t f : frames) {
    auto di = det_by_frame.find(f);
    auto ti = truth_by_frame.find(f);
    FrameCounts c = match_frame(di == det_by_frame.end() ? none : di->second,
                                ti == truth_by_frame.end() ? none : ti->second, options.radius, options.metric);
    c.frame = f;
    report.counts.add(c);
    if (has_scenes) {
      auto si = scene_of_frame.find(f);
      report.scenes[si == scene_of_frame.end() ? std::string("unlabeled") : si->second].counts.add(c);
    }
  }
  report.metrics = f_beta(report.counts.tp, report.counts.fp, report.counts.fn, options.beta2);
  for (auto &[name, s] : report.scenes) s.metrics = f_beta(s.counts.tp, s.counts.fp, s.counts.fn, options.beta2);
  return report;
}

EvaluationReport evaluate_sequence(const std::filesystem::path &detections_csv,
                                   const std::filesystem::path &annotations_csv, const EvaluationOptions &options) {
  const auto dets = load_detections_csv(detections_csv);
  const auto truths = load_annotations_csv(annotations_csv);
  return evaluate(dets, truths, options);
}

namespace {

std::string metrics_row(const Metrics &m, const MatchResult &c) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%zu,%zu,%zu", m.precision, m.recall, m.f_measure, c.tp, c.fp, c.fn);
  return buf;
}

}  // namespace

void write_summary_csv(const EvaluationReport &report, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "precision,recall,f_measure,tp,fp,fn\n" << metrics_row(report.metrics, report.counts) << '\n';
}

void write_scene_csv(const EvaluationReport &report, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "scene,precision,recall,f_measure,tp,fp,fn\n";
  for (const auto &[name, s] : report.scenes) out << name << ',' << metrics_row(s.metrics, s.counts) << '\n';
}

std::string format_report(const EvaluationReport &report) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "precision,%.3f\nrecall,%.3f\nf_measure,%.3f\ntp,%zu\nfp,%zu\nfn,%zu\n",
                report.metrics.precision, report.metrics.recall, report.metrics.f_measure, report.counts.tp,
                report.counts.fp, report.counts.fn);
  out += buf;
  for (const auto &[name, s] : report.scenes) {
    std::snprintf(buf, sizeof buf, "scene %s: precision %.3f recall %.3f f_measure %.3f\n", name.c_str(),
                  s.metrics.precision, s.metrics.recall, s.metrics.f_measure);
    out += buf;
  }
  return out;
}

}  // namespace irtk
