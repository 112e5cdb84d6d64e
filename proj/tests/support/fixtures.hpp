#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "irtk/gbdt.hpp"
#include "irtk/imaging.hpp"
#include "irtk/synth.hpp"

namespace fixture {

/// Fresh empty directory below the system temp dir.
std::filesystem::path scratch_dir(const std::string &name);

/// Smooth-noise frame without targets or noise.
irtk::Frame textured_frame(int width, int height, std::uint64_t seed);

/// 256x256, 50 frames, 2 targets, light clutter, moving camera.
irtk::SequenceSpec small_sequence(std::uint64_t seed);

/// Candidate budget used with small_sequence-sized frames (3500 scaled by
/// the pixel count relative to 640x512, rounded).
std::size_t scaled_budget(int width, int height);

/// Trains the default classifier on sequences generated from `spec` with the
/// given seeds.
irtk::GbdtModel train_detector(irtk::SequenceSpec spec, const std::vector<std::uint64_t> &seeds,
                               std::uint64_t train_seed = 0);

std::string read_file(const std::filesystem::path &path);

}  // namespace fixture
