#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "irtk/config.hpp"
#include "irtk/features.hpp"
#include "irtk/geometry.hpp"
#include "irtk/imaging.hpp"
#include "irtk/registration.hpp"

namespace irtk {

enum class BackgroundKind { smooth_noise, cloud_like, block_texture };

struct SequenceSpec {
  int width = 640;
  int height = 512;
  std::size_t n_frames = 50;
  int n_targets = 1;  // 0..3
  double size_min = 3.0;  // blob extent in pixels
  double size_max = 7.0;
  double bright_fraction = 1.0;
  double contrast_min = 2500.0;
  double contrast_max = 5000.0;
  double speed_min = 4.5;  // world pixels per frame
  double speed_max = 6.5;
  std::optional<double> heading;  // initial heading in radians; drawn when unset
  int velocity_hold_min = 15;  // frames between velocity changes
  int velocity_hold_max = 30;
  double turn_rate = 0.15;     // radians per frame while turning
  double margin = 24.0;        // targets are steered to stay this far inside
  BackgroundKind background = BackgroundKind::smooth_noise;
  double background_level = 20000.0;
  double background_amplitude = 2000.0;
  double camera_translation = 2.0;  // max per-frame shift
  double camera_rotation = 0.002;   // max per-frame rotation, radians
  double camera_perspective = 1e-6;
  double camera_drift_x = 0.0;  // constant per-frame shift added to the walk
  double camera_drift_y = 0.0;
  double clutter_rate = 0.0;  // expected speckles per frame
  double noise_sigma = 40.0;
  std::uint64_t seed = 0;

  void validate() const;
  KeyValues to_key_values() const;
  /// Throws ParseError for unknown keys or malformed values.
  void set(const std::string &key, const std::string &value);
};

SequenceSpec load_sequence_spec(const std::filesystem::path &path);

struct TargetState {
  int target_id = 0;
  Vec2 position;  // image coordinates, sub-pixel
  bool in_view = false;
};

struct GroundTruth {
  std::vector<std::vector<TargetState>> targets;  // per frame
  std::vector<Homography> steps;                  // steps[k] maps frame k+1 into frame k
  int width = 0;  // frame size; annotations are clamped into it when set
  int height = 0;

  /// Rounded centers of targets in view, in frame order. A target counts as
  /// in view while its center is within one blob sigma of the frame.
  std::vector<Annotation> annotations() const;
};

struct SyntheticSequence {
  std::vector<Frame> frames;
  GroundTruth truth;
};

SyntheticSequence generate_sequence(const SequenceSpec &spec);

/// Writes frame_%05d.pgm files, annotations.csv, transforms.txt and
/// sequence.cfg into `dir` (created if missing).
void write_dataset(const SyntheticSequence &sequence, const SequenceSpec &spec, const std::filesystem::path &dir);

/// Number of maximal runs of consecutive in-view frames per target that are
/// longer than `min_length` frames.
std::size_t count_true_trajectories(const GroundTruth &truth, std::size_t min_length);

}  // namespace irtk
