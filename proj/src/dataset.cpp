#include "irtk/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <string>

#include "irtk/errors.hpp"

namespace irtk {

namespace {

std::string trim(const std::string &s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_csv(const std::string &line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// Reads a CSV with a header row and hands each data row to `row` as a map
// from required column names to values.
class CsvTable {
 public:
  CsvTable(const std::filesystem::path &path, std::vector<std::string> required, std::vector<std::string> optional)
      : path_(path), in_(path) {
    if (!in_) throw IoError("cannot open " + path.string());
    std::string header;
    do {
      if (!std::getline(in_, header)) throw ParseError(path.string() + ": missing header");
      ++line_no_;
    } while (trim(header).empty());
    const auto names = split_csv(header);
    for (auto &name : required) {
      auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) throw ParseError(path.string() + ": missing column '" + name + "'");
      columns_[name] = static_cast<std::size_t>(it - names.begin());
    }
    for (auto &name : optional) {
      auto it = std::find(names.begin(), names.end(), name);
      if (it != names.end()) columns_[name] = static_cast<std::size_t>(it - names.begin());
    }
    width_ = names.size();
  }

  bool has(const std::string &name) const { return columns_.count(name) > 0; }

  bool next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (trim(line).empty()) continue;
      fields_ = split_csv(line);
      if (fields_.size() != width_)
        throw ParseError(where() + ": expected " + std::to_string(width_) + " fields, got " +
                         std::to_string(fields_.size()));
      return true;
    }
    return false;
  }

  const std::string &text(const std::string &name) const { return fields_[columns_.at(name)]; }

  double real(const std::string &name) const {
    const std::string &s = text(name);
    char *end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || !std::isfinite(v)) throw ParseError(where() + ": bad number '" + s + "'");
    return v;
  }

  long long integer(const std::string &name) const {
    const std::string &s = text(name);
    char *end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0') throw ParseError(where() + ": bad integer '" + s + "'");
    return v;
  }

  std::string where() const { return path_.string() + ":" + std::to_string(line_no_); }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::map<std::string, std::size_t> columns_;
  std::vector<std::string> fields_;
  std::size_t width_ = 0;
  int line_no_ = 0;
};

}  // namespace

std::vector<Annotation> load_annotations_csv(const std::filesystem::path &path) {
  CsvTable table(path, {"frame", "target_id", "x", "y"}, {"scene"});
  std::vector<Annotation> out;
  while (table.next()) {
    Annotation a;
    const long long frame = table.integer("frame");
    if (frame < 0) throw ParseError(table.where() + ": negative frame");
    a.frame = static_cast<std::size_t>(frame);
    a.target_id = static_cast<int>(table.integer("target_id"));
    a.x = static_cast<int>(std::lround(table.real("x")));
    a.y = static_cast<int>(std::lround(table.real("y")));
    if (table.has("scene")) a.scene = table.text("scene");
    out.push_back(std::move(a));
  }
  return out;
}

void save_annotations_csv(std::span<const Annotation> annotations, const std::filesystem::path &path,
                          bool with_scene) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "frame,target_id,x,y" << (with_scene ? ",scene" : "") << '\n';
  for (const auto &a : annotations) {
    out << a.frame << ',' << a.target_id << ',' << a.x << ',' << a.y;
    if (with_scene) out << ',' << a.scene;
    out << '\n';
  }
}

std::vector<Detection> load_detections_csv(const std::filesystem::path &path) {
  CsvTable table(path, {"frame", "track_id", "x", "y", "score"}, {});
  std::vector<Detection> out;
  while (table.next()) {
    Detection d;
    const long long frame = table.integer("frame");
    const long long track = table.integer("track_id");
    if (frame < 0 || track < 0) throw ParseError(table.where() + ": negative frame or track id");
    d.frame = static_cast<std::size_t>(frame);
    d.track_id = static_cast<std::uint64_t>(track);
    d.x = table.real("x");
    d.y = table.real("y");
    d.score = table.real("score");
    out.push_back(d);
  }
  return out;
}

void save_detections_csv(std::span<const Detection> detections, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "frame,track_id,x,y,score\n";
  char buf[160];
  for (const auto &d : detections) {
    std::snprintf(buf, sizeof buf, "%zu,%llu,%.3f,%.3f,%.6f\n", d.frame, static_cast<unsigned long long>(d.track_id),
                  d.x, d.y, d.score);
    out << buf;
  }
}

std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path &dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> out;
  for (const auto &entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

long long frame_number_from_name(const std::filesystem::path &file) {
  const std::string stem = file.stem().string();
  std::size_t i = stem.size();
  while (i > 0 && std::isdigit(static_cast<unsigned char>(stem[i - 1]))) --i;
  if (i == stem.size()) return -1;
  return std::stoll(stem.substr(i, 18));
}

std::vector<Frame> load_sequence(const std::filesystem::path &dir) {
  const auto files = list_frame_files(dir);
  std::vector<long long> numbers;
  bool numbered = true;
  for (const auto &f : files) {
    numbers.push_back(frame_number_from_name(f));
    if (numbers.back() < 0) numbered = false;
  }
  std::vector<Frame> frames;
  frames.reserve(files.size());
  for (std::size_t i = 0; i < files.size(); ++i)
    frames.push_back(load_frame(files[i], numbered ? static_cast<std::size_t>(numbers[i]) : i));
  std::stable_sort(frames.begin(), frames.end(), [](const Frame &a, const Frame &b) { return a.index() < b.index(); });
  return frames;
}

}  // namespace irtk
