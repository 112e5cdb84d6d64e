#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "irtk/features.hpp"
#include "irtk/imaging.hpp"
#include "irtk/trajectory.hpp"

namespace irtk {

/// Header `frame,target_id,x,y` with an optional trailing `scene` column.
std::vector<Annotation> load_annotations_csv(const std::filesystem::path &path);
void save_annotations_csv(std::span<const Annotation> annotations, const std::filesystem::path &path,
                          bool with_scene = false);

/// Header `frame,track_id,x,y,score`.
std::vector<Detection> load_detections_csv(const std::filesystem::path &path);
void save_detections_csv(std::span<const Detection> detections, const std::filesystem::path &path);

/// PGM files in `dir`, sorted by name.
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path &dir);

/// Frame number taken from the trailing digits of the file stem, or -1.
long long frame_number_from_name(const std::filesystem::path &file);

/// Loads every frame of a directory. Frames are numbered from their file
/// names when all names carry a number, otherwise by position.
std::vector<Frame> load_sequence(const std::filesystem::path &dir);

}  // namespace irtk
