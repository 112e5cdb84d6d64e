// Command-line front end: synth, train, detect, eval, dump-config.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "irtk/candidates.hpp"
#include "irtk/config.hpp"
#include "irtk/dataset.hpp"
#include "irtk/errors.hpp"
#include "irtk/evaluation.hpp"
#include "irtk/gbdt.hpp"
#include "irtk/pipeline.hpp"
#include "irtk/synth.hpp"

namespace fs = std::filesystem;
using namespace irtk;

namespace {

struct ConfigOptions {
  std::string path;
  std::vector<std::string> overrides;  // key=value

  PipelineConfig resolve() const {
    PipelineConfig cfg;
    if (!path.empty()) cfg = load_config(path);
    for (const auto &kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ParseError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
};

void add_config_options(CLI::App *cmd, ConfigOptions &opts) {
  cmd->add_option("--config", opts.path, "Configuration file (key = value)")->check(CLI::ExistingFile);
  cmd->add_option("--set", opts.overrides, "Override one configuration entry, key=value")->take_all();
}

// ---- synth ----

struct SynthArgs {
  std::string spec_file;
  std::string out;
  std::vector<std::string> overrides;
  long long frames = -1, targets = -1, width = -1, height = -1, seed = -1;
  double clutter = -1, noise = -1;
  std::string background;
};

int run_synth(const SynthArgs &a) {
  SequenceSpec spec;
  if (!a.spec_file.empty()) spec = load_sequence_spec(a.spec_file);
  if (a.frames >= 0) spec.n_frames = static_cast<std::size_t>(a.frames);
  if (a.targets != -1) spec.n_targets = static_cast<int>(a.targets);
  if (a.width >= 0) spec.width = static_cast<int>(a.width);
  if (a.height >= 0) spec.height = static_cast<int>(a.height);
  if (a.seed >= 0) spec.seed = static_cast<std::uint64_t>(a.seed);
  if (a.clutter >= 0) spec.clutter_rate = a.clutter;
  if (a.noise >= 0) spec.noise_sigma = a.noise;
  if (!a.background.empty()) spec.set("background", a.background);
  for (const auto &kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ParseError("--set expects key=value, got '" + kv + "'");
    spec.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  spec.validate();
  const auto seq = generate_sequence(spec);
  write_dataset(seq, spec, a.out);
  std::printf("wrote %zu frames, %zu annotations to %s\n", seq.frames.size(), seq.truth.annotations().size(),
              a.out.c_str());
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::vector<std::string> data;
  std::string model_out;
  long long seed = -1;
  ConfigOptions config;
};

int run_train(const TrainArgs &a) {
  PipelineConfig cfg = a.config.resolve();
  if (a.seed >= 0) cfg.train_seed = static_cast<std::uint64_t>(a.seed);
  TrainingSet all;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const fs::path dir = a.data[i];
    const fs::path ann = dir / "annotations.csv";
    if (!fs::exists(ann)) throw IoError(dir.string() + " has no annotations.csv");
    const auto annotations = load_annotations_csv(ann);
    const auto frames = load_sequence(dir);
    auto opts = cfg.training_options();
    opts.seed = cfg.sample_seed + i;
    all.append(build_training_set(frames, annotations, opts));
  }
  const std::size_t pos = all.positives();
  if (pos == 0) throw PreconditionError("training data has no positive samples");
  std::printf("samples %zu positives %zu negatives %zu\n", all.size(), pos, all.size() - pos);
  TrainingLog log;
  const GbdtModel model = train(all, cfg.gbdt, cfg.train_seed, &log);
  save_model(model, a.model_out);
  std::printf("trees %zu final training loss %.6f\n", model.trees().size(), log.losses.empty() ? 0.0 : log.losses.back());
  if (log.shrunk_trees) std::printf("trees shrunk to keep the loss non-increasing: %zu\n", log.shrunk_trees);
  return 0;
}

// ---- detect ----

struct DetectArgs {
  std::string seq;
  std::string model;
  std::string out;
  std::string transforms;
  bool gt_transforms = false;
  bool static_camera = false;
  std::string overlay;
  std::string candidates_out;
  int window = -1;
  double mu = -1;
  int confirm_length = -1;
  int threads = -1;
  ConfigOptions config;
};

void draw_box(Frame &f, int cx, int cy, int half, std::uint16_t value) {
  for (int d = -half; d <= half; ++d) {
    const int pts[4][2] = {{cx + d, cy - half}, {cx + d, cy + half}, {cx - half, cy + d}, {cx + half, cy + d}};
    for (const auto &p : pts)
      if (f.contains(p[0], p[1])) f.at(p[0], p[1]) = value;
  }
}

void write_overlays(const std::vector<Frame> &frames, const std::vector<Detection> &dets,
                    const std::vector<Annotation> &truths, const fs::path &dir) {
  fs::create_directories(dir);
  char name[40];
  for (const auto &src : frames) {
    Frame f = src;
    for (const auto &a : truths)
      if (a.frame == f.index()) draw_box(f, a.x, a.y, 6, 0);
    for (const auto &d : dets)
      if (d.frame == f.index())
        draw_box(f, static_cast<int>(std::lround(d.x)), static_cast<int>(std::lround(d.y)), 4, 65535);
    std::snprintf(name, sizeof name, "overlay_%05zu.pgm", f.index());
    save_frame(f, dir / name);
  }
}

int run_detect(const DetectArgs &a) {
  PipelineConfig cfg = a.config.resolve();
  if (a.window > 0) cfg.trajectory.window = a.window;
  if (a.mu > 0) cfg.trajectory.length_fraction = a.mu;
  if (a.confirm_length >= 0) cfg.trajectory.confirm_length = a.confirm_length;
  if (a.threads >= 0) cfg.threads = static_cast<unsigned>(a.threads);
  cfg.validate();

  const auto frames = load_sequence(a.seq);
  if (frames.empty()) throw IoError("no frames found in " + a.seq);
  const GbdtModel model = load_model(a.model);
  const ClassifierDetector detector(cfg.filter, cfg.scales, model, cfg.score_threshold);

  std::unique_ptr<MotionProvider> motion;
  if (a.static_camera) {
    motion = std::make_unique<StaticMotion>();
  } else if (a.gt_transforms || !a.transforms.empty()) {
    const fs::path p = a.transforms.empty() ? fs::path(a.seq) / "transforms.txt" : fs::path(a.transforms);
    motion = std::make_unique<KnownMotion>(load_transforms(p));
  } else {
    auto ransac = cfg.ransac;
    motion = std::make_unique<ImageMotion>(cfg.matching, ransac);
  }

  const unsigned threads = resolve_threads(cfg.threads);
  std::printf("frames %zu threads %u\n", frames.size(), threads);
  std::printf("confirmation length %d\n", cfg.trajectory.confirmation_length());
  const SequenceResult result = process_sequence(frames, detector, *motion, cfg.trajectory, threads);
  for (const auto &w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  save_detections_csv(result.detections, a.out);

  const auto &t = result.timing;
  std::printf("candidates %zu detections %zu tracks %zu\n", result.candidate_count, result.detections.size(),
              result.surviving_tracks);
  std::printf("candidate detection %.1f ms/frame\n", t.per_frame(t.detection_ms));
  std::printf("registration %.1f ms/frame\n", t.per_frame(t.registration_ms));
  std::printf("trajectory %.1f ms/frame\n", t.per_frame(t.trajectory_ms));
  std::printf("total %.1f ms/frame\n", t.per_frame(t.detection_ms + t.registration_ms + t.trajectory_ms));

  if (!a.overlay.empty()) {
    std::vector<Annotation> truths;
    const fs::path ann = fs::path(a.seq) / "annotations.csv";
    if (fs::exists(ann)) truths = load_annotations_csv(ann);
    write_overlays(frames, result.detections, truths, a.overlay);
  }
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string detections;
  std::string annotations;
  std::string out;
  std::string scenes_out;
  bool euclidean = false;
  double radius = -1;
  ConfigOptions config;
};

int run_eval(const EvalArgs &a) {
  PipelineConfig cfg = a.config.resolve();
  EvaluationOptions opts = cfg.evaluation;
  if (a.euclidean) opts.metric = Neighborhood::euclidean;
  if (a.radius >= 0) opts.radius = a.radius;
  const auto report = evaluate_sequence(a.detections, a.annotations, opts);
  for (const auto &w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::fputs(format_report(report).c_str(), stdout);
  if (!a.out.empty()) write_summary_csv(report, a.out);
  if (!a.scenes_out.empty() && !report.scenes.empty()) write_scene_csv(report, a.scenes_out);
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Small infrared target detection with trajectory constraints"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto *s = app.add_subcommand("synth", "Generate a synthetic annotated sequence");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--spec", synth.spec_file, "Sequence spec file (key = value)")->check(CLI::ExistingFile);
  s->add_option("--frames", synth.frames, "Number of frames");
  s->add_option("--targets", synth.targets, "Number of targets (0-3)");
  s->add_option("--width", synth.width, "Frame width");
  s->add_option("--height", synth.height, "Frame height");
  s->add_option("--seed", synth.seed, "Random seed");
  s->add_option("--clutter", synth.clutter, "Expected clutter speckles per frame");
  s->add_option("--noise", synth.noise, "Sensor noise standard deviation");
  s->add_option("--background", synth.background, "smooth-noise, cloud-like or block-texture");
  s->add_option("--set", synth.overrides, "Override one spec entry, key=value")->take_all();

  TrainArgs tr;
  auto *t = app.add_subcommand("train", "Train the candidate classifier on annotated sequences");
  t->add_option("--data", tr.data, "Sequence directories")->required()->take_all();
  t->add_option("--model", tr.model_out, "Model output file")->required();
  t->add_option("--seed", tr.seed, "Training seed (overrides train_seed)");
  add_config_options(t, tr.config);

  DetectArgs det;
  auto *d = app.add_subcommand("detect", "Detect targets in a sequence");
  d->add_option("--seq", det.seq, "Sequence directory")->required();
  d->add_option("--model", det.model, "Trained model file")->required();
  d->add_option("--out", det.out, "Detections CSV")->required();
  d->add_flag("--gt-transforms", det.gt_transforms, "Use the sequence's transforms.txt instead of image registration");
  d->add_option("--transforms", det.transforms, "Use this transforms file");
  d->add_flag("--static", det.static_camera, "Assume a static camera");
  d->add_option("--window", det.window, "Time window length");
  d->add_option("--mu", det.mu, "Length fraction of the window");
  d->add_option("--confirm-length", det.confirm_length, "Explicit confirmation length");
  d->add_option("--threads", det.threads, "Worker threads (0: IRTK_THREADS or hardware)");
  d->add_option("--overlay", det.overlay, "Write frames with detection and truth boxes here");
  add_config_options(d, det.config);

  EvalArgs ev;
  auto *e = app.add_subcommand("eval", "Score detections against annotations");
  e->add_option("--detections", ev.detections, "Detections CSV")->required();
  e->add_option("--annotations", ev.annotations, "Annotations CSV")->required();
  e->add_option("--out", ev.out, "Summary CSV");
  e->add_option("--scenes-out", ev.scenes_out, "Per-scene CSV");
  e->add_flag("--euclidean", ev.euclidean, "Match within a Euclidean rather than Chebyshev radius");
  e->add_option("--radius", ev.radius, "Match radius in pixels");
  add_config_options(e, ev.config);

  ConfigOptions dump_cfg;
  std::string dump_out;
  auto *dc = app.add_subcommand("dump-config", "Print the effective configuration");
  dc->add_option("--out", dump_out, "Write to this file instead of stdout");
  add_config_options(dc, dump_cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &err) {
    return app.exit(err) == 0 ? 0 : 1;
  }

  try {
    if (*s) return run_synth(synth);
    if (*t) return run_train(tr);
    if (*d) return run_detect(det);
    if (*e) return run_eval(ev);
    if (*dc) {
      const PipelineConfig cfg = dump_cfg.resolve();
      if (dump_out.empty())
        std::fputs(format_key_values(cfg.to_key_values()).c_str(), stdout);
      else
        save_config(cfg, dump_out);
      return 0;
    }
  } catch (const std::exception &err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 1;
}
