#include "fixtures.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "irtk/config.hpp"
#include "irtk/features.hpp"

namespace fixture {

std::filesystem::path scratch_dir(const std::string &name) {
  const auto dir = std::filesystem::temp_directory_path() / "irtk_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

irtk::Frame textured_frame(int width, int height, std::uint64_t seed) {
  irtk::SequenceSpec spec;
  spec.width = width;
  spec.height = height;
  spec.n_frames = 1;
  spec.n_targets = 0;
  spec.margin = 0.0;
  spec.noise_sigma = 0.0;
  spec.seed = seed;
  return irtk::generate_sequence(spec).frames.front();
}

irtk::SequenceSpec small_sequence(std::uint64_t seed) {
  irtk::SequenceSpec spec;
  spec.width = 256;
  spec.height = 256;
  spec.n_frames = 50;
  spec.n_targets = 2;
  spec.clutter_rate = 3.0;
  spec.seed = seed;
  return spec;
}

std::size_t scaled_budget(int width, int height) {
  return static_cast<std::size_t>(std::lround(3500.0 * width * height / (640.0 * 512.0)));
}

irtk::GbdtModel train_detector(irtk::SequenceSpec spec, const std::vector<std::uint64_t> &seeds,
                               std::uint64_t train_seed) {
  const irtk::PipelineConfig config;
  irtk::TrainingSet data;
  for (std::uint64_t s : seeds) {
    spec.seed = s;
    const auto seq = irtk::generate_sequence(spec);
    auto options = config.training_options();
    options.seed = s;
    data.append(irtk::build_training_set(seq.frames, seq.truth.annotations(), options));
  }
  return irtk::train(data, config.gbdt, train_seed);
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fixture
