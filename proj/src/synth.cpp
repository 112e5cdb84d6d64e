#include "irtk/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "irtk/dataset.hpp"
#include "irtk/errors.hpp"

namespace irtk {

namespace {

const char *background_name(BackgroundKind k) {
  switch (k) {
    case BackgroundKind::smooth_noise: return "smooth-noise";
    case BackgroundKind::cloud_like: return "cloud-like";
    case BackgroundKind::block_texture: return "block-texture";
  }
  return "smooth-noise";
}

BackgroundKind parse_background(const std::string &key, const std::string &v) {
  if (v == "smooth-noise") return BackgroundKind::smooth_noise;
  if (v == "cloud-like") return BackgroundKind::cloud_like;
  if (v == "block-texture") return BackgroundKind::block_texture;
  throw ParseError(key + ": expected smooth-noise, cloud-like or block-texture");
}

// Independent generator per concern, so that changing one does not shift
// the draws of another.
enum Stream : std::uint64_t { kBackground = 1, kCamera = 2, kTargets = 3, kClutter = 4, kNoise = 5 };

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t sub = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(sub),
                    static_cast<std::uint32_t>(sub >> 32)};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64 &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Periodic texture of size w x h, sampled with wrap-around.
class Texture {
 public:
  Texture(int w, int h) : w_(w), h_(h), data_(static_cast<std::size_t>(w) * h, 0.0) {}

  double &at(int x, int y) { return data_[static_cast<std::size_t>(y) * w_ + x]; }
  double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * w_ + x]; }

  double sample(double u, double v) const {
    const double fx = std::floor(u), fy = std::floor(v);
    const double ax = u - fx, ay = v - fy;
    const int x0 = wrap(static_cast<long long>(fx), w_), y0 = wrap(static_cast<long long>(fy), h_);
    const int x1 = x0 + 1 == w_ ? 0 : x0 + 1, y1 = y0 + 1 == h_ ? 0 : y0 + 1;
    const double top = at(x0, y0) * (1 - ax) + at(x1, y0) * ax;
    const double bottom = at(x0, y1) * (1 - ax) + at(x1, y1) * ax;
    return top * (1 - ay) + bottom * ay;
  }

  int width() const { return w_; }
  int height() const { return h_; }

 private:
  static int wrap(long long i, int n) {
    long long r = i % n;
    return static_cast<int>(r < 0 ? r + n : r);
  }
  int w_, h_;
  std::vector<double> data_;
};

// Adds weight * (value noise with the given lattice period) to the texture.
// `smooth` selects smoothstep interpolation; otherwise lattice cells are flat.
void add_value_noise(Texture &tex, double period, double weight, bool smooth, std::mt19937_64 &rng) {
  const int nx = std::max(1, static_cast<int>(std::lround(tex.width() / period)));
  const int ny = std::max(1, static_cast<int>(std::lround(tex.height() / period)));
  std::vector<double> lattice(static_cast<std::size_t>(nx) * ny);
  for (auto &v : lattice) v = uniform(rng, -1.0, 1.0);
  const double cx = static_cast<double>(nx) / tex.width(), cy = static_cast<double>(ny) / tex.height();
  auto L = [&](int i, int j) { return lattice[static_cast<std::size_t>(j % ny) * nx + (i % nx)]; };
  for (int y = 0; y < tex.height(); ++y) {
    const double gy = y * cy;
    const int j = static_cast<int>(gy);
    double ty = gy - j;
    for (int x = 0; x < tex.width(); ++x) {
      const double gx = x * cx;
      const int i = static_cast<int>(gx);
      double tx = gx - i;
      double v;
      if (smooth) {
        tx = tx * tx * (3 - 2 * tx);
        const double sy = ty * ty * (3 - 2 * ty);
        const double top = L(i, j) * (1 - tx) + L(i + 1, j) * tx;
        const double bottom = L(i, j + 1) * (1 - tx) + L(i + 1, j + 1) * tx;
        v = top * (1 - sy) + bottom * sy;
      } else {
        v = L(i, j);
      }
      tex.at(x, y) += weight * v;
    }
  }
}

Texture render_background(const SequenceSpec &spec) {
  auto rng = make_stream(spec.seed, kBackground);
  Texture tex(2 * spec.width, 2 * spec.height);
  double total = 0.0;
  auto octave = [&](double period, double weight, bool smooth) {
    add_value_noise(tex, period, weight, smooth, rng);
    total += weight;
  };
  switch (spec.background) {
    case BackgroundKind::smooth_noise:
      octave(128, 1.0, true);
      octave(64, 0.5, true);
      octave(32, 0.25, true);
      octave(16, 0.125, true);
      break;
    case BackgroundKind::cloud_like:
      octave(256, 1.0, true);
      octave(128, 0.6, true);
      octave(64, 0.36, true);
      octave(32, 0.2, true);
      octave(16, 0.1, true);
      break;
    case BackgroundKind::block_texture:
      octave(24, 1.0, false);
      octave(64, 0.4, true);
      octave(16, 0.1, true);
      break;
  }
  for (int y = 0; y < tex.height(); ++y)
    for (int x = 0; x < tex.width(); ++x) {
      double v = tex.at(x, y) / total;
      // Soft saturation gives cloud banks with flatter tops.
      if (spec.background == BackgroundKind::cloud_like) v = std::tanh(1.8 * v);
      tex.at(x, y) = spec.background_level + spec.background_amplitude * v;
    }
  return tex;
}

std::vector<Homography> camera_steps(const SequenceSpec &spec) {
  auto rng = make_stream(spec.seed, kCamera);
  std::vector<Homography> steps;
  if (spec.n_frames < 2) return steps;
  const double cx = 0.5 * (spec.width - 1), cy = 0.5 * (spec.height - 1);
  double tx = 0, ty = 0, rot = 0, px = 0, py = 0;
  // Each parameter eases toward a goal that is occasionally redrawn, so the
  // camera pans steadily instead of jittering around zero.
  double goals[5];
  const double limits[5] = {spec.camera_translation, spec.camera_translation, spec.camera_rotation,
                            spec.camera_perspective, spec.camera_perspective};
  for (int i = 0; i < 5; ++i) goals[i] = uniform(rng, -limits[i], limits[i]);
  auto walk = [&](double &state, int i) {
    if (limits[i] <= 0.0) {
      state = 0.0;
      return;
    }
    if (uniform(rng, 0.0, 1.0) < 0.1) goals[i] = uniform(rng, -limits[i], limits[i]);
    state += 0.3 * (goals[i] - state);
  };
  for (std::size_t k = 0; k + 1 < spec.n_frames; ++k) {
    walk(tx, 0);
    walk(ty, 1);
    walk(rot, 2);
    walk(px, 3);
    walk(py, 4);
    const double c = std::cos(rot), s = std::sin(rot);
    // Rotation about the frame center plus translation, then a mild
    // perspective row.
    Eigen::Matrix3d m;
    m << c, -s, cx - c * cx + s * cy + tx + spec.camera_drift_x,  //
        s, c, cy - s * cx - c * cy + ty + spec.camera_drift_y,    //
        px, py, 1.0 - px * cx - py * cy;
    steps.emplace_back(m);
  }
  return steps;
}

struct Mover {
  int id = 0;
  Vec2 world;
  double heading = 0.0;
  double goal_heading = 0.0;
  double speed = 0.0;
  double goal_speed = 0.0;
  int hold = 0;
  double size = 3.0;
  double contrast = 0.0;
  double sign = 1.0;
};

double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= 2 * std::numbers::pi;
  while (a < -std::numbers::pi) a += 2 * std::numbers::pi;
  return a;
}

bool inside(const SequenceSpec &spec, const Vec2 &p, double margin) {
  return p.x >= margin && p.y >= margin && p.x <= spec.width - 1 - margin && p.y <= spec.height - 1 - margin;
}

struct Speckle {
  Vec2 position;
  double sigma;
  double amplitude;  // signed
};

void add_blob(std::vector<double> &img, int w, int h, const Vec2 &c, double sigma, double amplitude) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma)) + 1;
  const int x0 = std::max(0, static_cast<int>(std::floor(c.x)) - r), x1 = std::min(w - 1, static_cast<int>(std::ceil(c.x)) + r);
  const int y0 = std::max(0, static_cast<int>(std::floor(c.y)) - r), y1 = std::min(h - 1, static_cast<int>(std::ceil(c.y)) + r);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - c.x, dy = y - c.y;
      img[static_cast<std::size_t>(y) * w + x] += amplitude * std::exp(-(dx * dx + dy * dy) * inv);
    }
}

}  // namespace

void SequenceSpec::validate() const {
  if (width < 16 || height < 16) throw PreconditionError("frames must be at least 16x16");
  if (n_targets < 0 || n_targets > 3) throw PreconditionError("n_targets must lie in [0,3]");
  if (!(size_min >= 1.0 && size_min <= size_max)) throw PreconditionError("target sizes must satisfy 1 <= min <= max");
  if (!(bright_fraction >= 0.0 && bright_fraction <= 1.0)) throw PreconditionError("bright_fraction must lie in [0,1]");
  if (!(contrast_min >= 0.0 && contrast_min <= contrast_max)) throw PreconditionError("contrast range is invalid");
  if (!(speed_min >= 0.0 && speed_min <= speed_max)) throw PreconditionError("speed range is invalid");
  if (velocity_hold_min < 1 || velocity_hold_min > velocity_hold_max)
    throw PreconditionError("velocity hold range is invalid");
  if (!(turn_rate > 0.0)) throw PreconditionError("turn_rate must be positive");
  if (!(margin >= 0.0) || 2.0 * margin >= std::min(width, height)) throw PreconditionError("margin too large for frame");
  if (!(background_amplitude >= 0.0) || !(background_level >= 0.0)) throw PreconditionError("background levels invalid");
  if (!(camera_translation >= 0.0 && camera_rotation >= 0.0 && camera_perspective >= 0.0))
    throw PreconditionError("camera magnitudes must be non-negative");
  if (!(clutter_rate >= 0.0) || !(noise_sigma >= 0.0)) throw PreconditionError("clutter and noise must be non-negative");
  const double all[] = {size_max, contrast_max, speed_max, background_level, background_amplitude, camera_translation,
                        camera_rotation, camera_perspective, camera_drift_x, camera_drift_y, clutter_rate, noise_sigma};
  for (double v : all)
    if (!std::isfinite(v)) throw PreconditionError("sequence magnitudes must be finite");
  if (heading && !std::isfinite(*heading)) throw PreconditionError("heading must be finite");
}

KeyValues SequenceSpec::to_key_values() const {
  auto i = [](long long v) { return std::to_string(v); };
  return {
      {"width", i(width)},
      {"height", i(height)},
      {"n_frames", std::to_string(n_frames)},
      {"n_targets", i(n_targets)},
      {"size_min", format_real(size_min)},
      {"size_max", format_real(size_max)},
      {"bright_fraction", format_real(bright_fraction)},
      {"contrast_min", format_real(contrast_min)},
      {"contrast_max", format_real(contrast_max)},
      {"speed_min", format_real(speed_min)},
      {"speed_max", format_real(speed_max)},
      {"heading", heading ? format_real(*heading) : std::string("random")},
      {"velocity_hold_min", i(velocity_hold_min)},
      {"velocity_hold_max", i(velocity_hold_max)},
      {"turn_rate", format_real(turn_rate)},
      {"margin", format_real(margin)},
      {"background", background_name(background)},
      {"background_level", format_real(background_level)},
      {"background_amplitude", format_real(background_amplitude)},
      {"camera_translation", format_real(camera_translation)},
      {"camera_rotation", format_real(camera_rotation)},
      {"camera_perspective", format_real(camera_perspective)},
      {"camera_drift_x", format_real(camera_drift_x)},
      {"camera_drift_y", format_real(camera_drift_y)},
      {"clutter_rate", format_real(clutter_rate)},
      {"noise_sigma", format_real(noise_sigma)},
      {"seed", std::to_string(seed)},
  };
}

void SequenceSpec::set(const std::string &key, const std::string &value) {
  auto integer = [&](int lo) {
    const long long v = parse_integer(key, value);
    if (v < lo || v > 1000000000LL) throw ParseError(key + ": value out of range");
    return static_cast<int>(v);
  };
  if (key == "width") width = integer(1);
  else if (key == "height") height = integer(1);
  else if (key == "n_frames") n_frames = static_cast<std::size_t>(integer(0));
  else if (key == "n_targets") n_targets = integer(-1000);
  else if (key == "size_min") size_min = parse_real(key, value);
  else if (key == "size_max") size_max = parse_real(key, value);
  else if (key == "bright_fraction") bright_fraction = parse_real(key, value);
  else if (key == "contrast_min") contrast_min = parse_real(key, value);
  else if (key == "contrast_max") contrast_max = parse_real(key, value);
  else if (key == "speed_min") speed_min = parse_real(key, value);
  else if (key == "speed_max") speed_max = parse_real(key, value);
  else if (key == "heading") {
    if (value == "random") heading.reset();
    else heading = parse_real(key, value);
  } else if (key == "velocity_hold_min") velocity_hold_min = integer(0);
  else if (key == "velocity_hold_max") velocity_hold_max = integer(0);
  else if (key == "turn_rate") turn_rate = parse_real(key, value);
  else if (key == "margin") margin = parse_real(key, value);
  else if (key == "background") background = parse_background(key, value);
  else if (key == "background_level") background_level = parse_real(key, value);
  else if (key == "background_amplitude") background_amplitude = parse_real(key, value);
  else if (key == "camera_translation") camera_translation = parse_real(key, value);
  else if (key == "camera_rotation") camera_rotation = parse_real(key, value);
  else if (key == "camera_perspective") camera_perspective = parse_real(key, value);
  else if (key == "camera_drift_x") camera_drift_x = parse_real(key, value);
  else if (key == "camera_drift_y") camera_drift_y = parse_real(key, value);
  else if (key == "clutter_rate") clutter_rate = parse_real(key, value);
  else if (key == "noise_sigma") noise_sigma = parse_real(key, value);
  else if (key == "seed") {
    const long long v = parse_integer(key, value);
    if (v < 0) throw ParseError(key + ": must be non-negative");
    seed = static_cast<std::uint64_t>(v);
  } else throw ParseError("unknown sequence key '" + key + "'");
}

SequenceSpec load_sequence_spec(const std::filesystem::path &path) {
  SequenceSpec spec;
  for (const auto &[k, v] : load_key_values(path)) spec.set(k, v);
  spec.validate();
  return spec;
}

std::vector<Annotation> GroundTruth::annotations() const {
  std::vector<Annotation> out;
  for (std::size_t f = 0; f < targets.size(); ++f)
    for (const auto &t : targets[f]) {
      if (!t.in_view) continue;
      Annotation a;
      a.frame = f;
      a.target_id = t.target_id;
      a.x = static_cast<int>(std::lround(t.position.x));
      a.y = static_cast<int>(std::lround(t.position.y));
      if (width > 0 && height > 0) {
        a.x = std::clamp(a.x, 0, width - 1);
        a.y = std::clamp(a.y, 0, height - 1);
      }
      out.push_back(a);
    }
  return out;
}

SyntheticSequence generate_sequence(const SequenceSpec &spec) {
  spec.validate();
  SyntheticSequence seq;
  const int w = spec.width, h = spec.height;
  const std::size_t n = spec.n_frames;
  seq.truth.steps = camera_steps(spec);
  const std::vector<Homography> to_world = chain_to_reference(seq.truth.steps);

  // Target paths in world (first-frame) coordinates.
  auto trng = make_stream(spec.seed, kTargets);
  std::vector<Mover> movers(static_cast<std::size_t>(spec.n_targets));
  for (int i = 0; i < spec.n_targets; ++i) {
    Mover &m = movers[static_cast<std::size_t>(i)];
    m.id = i + 1;
    m.world = {uniform(trng, 0.3 * w, 0.7 * w), uniform(trng, 0.3 * h, 0.7 * h)};
    m.heading = spec.heading ? *spec.heading : uniform(trng, -std::numbers::pi, std::numbers::pi);
    m.goal_heading = m.heading;
    m.speed = m.goal_speed = uniform(trng, spec.speed_min, spec.speed_max);
    m.hold = std::uniform_int_distribution<int>(spec.velocity_hold_min, spec.velocity_hold_max)(trng);
    m.size = uniform(trng, spec.size_min, spec.size_max);
    m.contrast = uniform(trng, spec.contrast_min, spec.contrast_max);
    m.sign = uniform(trng, 0.0, 1.0) < spec.bright_fraction ? 1.0 : -1.0;
  }
  const Vec2 view_center{0.5 * (w - 1), 0.5 * (h - 1)};
  seq.truth.width = w;
  seq.truth.height = h;
  seq.truth.targets.resize(n);
  for (std::size_t f = 0; f < n; ++f) {
    const Homography from_world = to_world[f].inverse();
    for (auto &m : movers) {
      TargetState s;
      s.target_id = m.id;
      s.position = remap_point(from_world, m.world);
      // In view while the nearest frame pixel still gets exp(-1/2) of the
      // peak, i.e. the center is within one blob sigma of the pixel grid.
      const double ox = std::max({0.0, -s.position.x, s.position.x - (w - 1)});
      const double oy = std::max({0.0, -s.position.y, s.position.y - (h - 1)});
      s.in_view = std::hypot(ox, oy) <= m.size / 4.0;
      seq.truth.targets[f].push_back(s);

      // Advance to the next frame. Turning happens at a bounded rate, so the
      // path stays locally close to uniform motion.
      const double radius = m.speed / spec.turn_rate;
      const Vec2 dir{std::cos(m.heading), std::sin(m.heading)};
      const Vec2 ahead = remap_point(from_world, m.world + (2.0 * radius + spec.margin) * dir);
      const bool turning = std::abs(wrap_angle(m.goal_heading - m.heading)) > 1e-12;
      if (!inside(spec, ahead, spec.margin) && !turning) {
        const Vec2 to_center = remap_point(to_world[f], view_center) - m.world;
        m.goal_heading = std::atan2(to_center.y, to_center.x) + uniform(trng, -0.4, 0.4);
        m.goal_speed = uniform(trng, spec.speed_min, spec.speed_max);
        m.hold = std::uniform_int_distribution<int>(spec.velocity_hold_min, spec.velocity_hold_max)(trng);
      } else if (--m.hold <= 0) {
        const double turn = uniform(trng, 0.35, 1.4) * (uniform(trng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0);
        m.goal_heading = m.heading + turn;
        m.goal_speed = uniform(trng, spec.speed_min, spec.speed_max);
        m.hold = std::uniform_int_distribution<int>(spec.velocity_hold_min, spec.velocity_hold_max)(trng);
      }
      const double dh = wrap_angle(m.goal_heading - m.heading);
      m.heading += std::clamp(dh, -spec.turn_rate, spec.turn_rate);
      if (std::abs(wrap_angle(m.goal_heading - m.heading)) <= 1e-12) m.heading = m.goal_heading;
      m.speed += std::clamp(m.goal_speed - m.speed, -0.1, 0.1);
      m.world += m.speed * Vec2{std::cos(m.heading), std::sin(m.heading)};
    }
  }

  // Clutter speckles live one or two frames at a fixed image position.
  auto crng = make_stream(spec.seed, kClutter);
  std::vector<std::vector<Speckle>> clutter(n);
  if (spec.clutter_rate > 0.0) {
    std::poisson_distribution<int> count(spec.clutter_rate);
    for (std::size_t f = 0; f < n; ++f) {
      const int k = count(crng);
      for (int i = 0; i < k; ++i) {
        Speckle s;
        s.position = {uniform(crng, 0.0, w - 1.0), uniform(crng, 0.0, h - 1.0)};
        s.sigma = uniform(crng, 0.6, 1.5);
        const double sign = uniform(crng, 0.0, 1.0) < spec.bright_fraction ? 1.0 : -1.0;
        s.amplitude = sign * uniform(crng, 0.6 * spec.contrast_min, spec.contrast_max);
        const bool two_frames = uniform(crng, 0.0, 1.0) < 0.5;
        clutter[f].push_back(s);
        if (two_frames && f + 1 < n) clutter[f + 1].push_back(s);
      }
    }
  }

  const Texture background = render_background(spec);
  const Vec2 tex_offset{0.5 * w, 0.5 * h};
  seq.frames.reserve(n);
  std::vector<double> img(static_cast<std::size_t>(w) * h);
  for (std::size_t f = 0; f < n; ++f) {
    const auto &m = to_world[f].matrix();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double d = m(2, 0) * x + m(2, 1) * y + m(2, 2);
        const double u = (m(0, 0) * x + m(0, 1) * y + m(0, 2)) / d + tex_offset.x;
        const double v = (m(1, 0) * x + m(1, 1) * y + m(1, 2)) / d + tex_offset.y;
        img[static_cast<std::size_t>(y) * w + x] = background.sample(u, v);
      }
    for (std::size_t i = 0; i < movers.size(); ++i) {
      const auto &mv = movers[i];
      add_blob(img, w, h, seq.truth.targets[f][i].position, mv.size / 4.0, mv.sign * mv.contrast);
    }
    for (const auto &s : clutter[f]) add_blob(img, w, h, s.position, s.sigma, s.amplitude);
    std::vector<std::uint16_t> px(img.size());
    if (spec.noise_sigma > 0.0) {
      auto nrng = make_stream(spec.seed, kNoise, f);
      std::normal_distribution<double> noise(0.0, spec.noise_sigma);
      for (auto &v : img) v += noise(nrng);
    }
    for (std::size_t i = 0; i < img.size(); ++i)
      px[i] = static_cast<std::uint16_t>(std::clamp(std::lround(img[i]), 0L, 65535L));
    seq.frames.emplace_back(w, h, std::move(px), f);
  }
  return seq;
}

void write_dataset(const SyntheticSequence &sequence, const SequenceSpec &spec, const std::filesystem::path &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  char name[32];
  for (const auto &f : sequence.frames) {
    std::snprintf(name, sizeof name, "frame_%05zu.pgm", f.index());
    save_frame(f, dir / name);
  }
  auto annotations = sequence.truth.annotations();
  for (auto &a : annotations) a.scene = background_name(spec.background);
  save_annotations_csv(annotations, dir / "annotations.csv", true);
  save_transforms(sequence.truth.steps, dir / "transforms.txt");
  std::ofstream cfg(dir / "sequence.cfg");
  if (!cfg) throw IoError("cannot write " + (dir / "sequence.cfg").string());
  cfg << format_key_values(spec.to_key_values());
}

std::size_t count_true_trajectories(const GroundTruth &truth, std::size_t min_length) {
  std::size_t count = 0;
  std::vector<std::size_t> run;
  for (std::size_t f = 0; f <= truth.targets.size(); ++f) {
    const bool last = f == truth.targets.size();
    const std::size_t n_targets = last ? run.size() : truth.targets[f].size();
    run.resize(std::max(run.size(), n_targets), 0);
    for (std::size_t i = 0; i < run.size(); ++i) {
      const bool visible = !last && i < n_targets && truth.targets[f][i].in_view;
      if (visible) {
        ++run[i];
      } else {
        if (run[i] > min_length) ++count;
        run[i] = 0;
      }
    }
  }
  return count;
}

}  // namespace irtk
