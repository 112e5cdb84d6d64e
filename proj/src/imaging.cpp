#include "irtk/imaging.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <string>

#include "irtk/errors.hpp"

namespace irtk {

Frame::Frame(int width, int height, std::size_t index)
    : Frame(width, height, std::vector<std::uint16_t>(static_cast<std::size_t>(width) * height, 0), index) {}

Frame::Frame(int width, int height, std::vector<std::uint16_t> pixels, std::size_t index)
    : width_(width), height_(height), index_(index), pixels_(std::move(pixels)) {
  if (width <= 0 || height <= 0) throw PreconditionError("frame dimensions must be positive");
  if (pixels_.size() != static_cast<std::size_t>(width) * height)
    throw PreconditionError("pixel count does not match frame dimensions");
}

namespace {

// Reads one header token, skipping whitespace and '#' comments.
std::string next_token(std::istream &in) {
  std::string token;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c) && c != '#') {
    token.push_back(static_cast<char>(c));
    c = in.get();
  }
  if (c == '#') in.unget();
  if (token.empty()) throw FormatError("PGM header ended early");
  // The single whitespace byte after maxval has been consumed by the loop above.
  return token;
}

int parse_header_int(std::istream &in, const char *what) {
  const std::string token = next_token(in);
  if (!std::all_of(token.begin(), token.end(), [](unsigned char ch) { return std::isdigit(ch); }))
    throw FormatError(std::string("PGM header: bad ") + what + " '" + token + "'");
  try {
    return std::stoi(token);
  } catch (const std::exception &) {
    throw FormatError(std::string("PGM header: out-of-range ") + what);
  }
}

}  // namespace

Frame load_frame(const std::filesystem::path &path, std::size_t index) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() != 2 || magic[0] != 'P' || magic[1] != '5')
    throw FormatError(path.string() + ": not a binary PGM (expected P5)");

  const int width = parse_header_int(in, "width");
  const int height = parse_header_int(in, "height");
  const int maxval = parse_header_int(in, "maxval");
  if (width <= 0 || height <= 0) throw FormatError(path.string() + ": non-positive dimensions");
  if (maxval <= 0 || maxval > 65535) throw FormatError(path.string() + ": maxval out of range");

  const std::size_t count = static_cast<std::size_t>(width) * height;
  const std::size_t bytes_per_sample = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> raw(count * bytes_per_sample);
  in.read(reinterpret_cast<char *>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw IoError(path.string() + ": truncated pixel data");

  std::vector<std::uint16_t> pixels(count);
  if (bytes_per_sample == 1) {
    std::copy(raw.begin(), raw.end(), pixels.begin());
  } else {
    for (std::size_t i = 0; i < count; ++i)
      pixels[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
  }
  return Frame(width, height, std::move(pixels), index);
}

void save_frame(const Frame &frame, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << frame.width() << ' ' << frame.height() << "\n65535\n";
  const auto px = frame.pixels();
  std::vector<unsigned char> raw(px.size() * 2);
  for (std::size_t i = 0; i < px.size(); ++i) {
    raw[2 * i] = static_cast<unsigned char>(px[i] >> 8);
    raw[2 * i + 1] = static_cast<unsigned char>(px[i] & 0xff);
  }
  out.write(reinterpret_cast<const char *>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

struct Run {
  int row;
  int x0;
  int x1;  // inclusive
  std::int8_t label;
};

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0u); }

  std::uint32_t find(std::uint32_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }

  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Smaller index stays root, so roots are the first run of each component.
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::uint32_t> parent_;
};

// Run-length labeling: runs of equal nonzero label are united with overlapping
// (or diagonally touching) runs of the same label in the previous row.
struct RunLabeling {
  std::vector<Run> runs;
  DisjointSet sets{0};
};

RunLabeling label_runs(const LabelMask &mask) {
  RunLabeling out;
  std::vector<std::size_t> row_start(static_cast<std::size_t>(mask.height) + 1, 0);
  for (int y = 0; y < mask.height; ++y) {
    row_start[y] = out.runs.size();
    const std::int8_t *row = mask.labels.data() + static_cast<std::size_t>(y) * mask.width;
    int x = 0;
    while (x < mask.width) {
      const std::int8_t v = row[x];
      if (v == 0) {
        ++x;
        continue;
      }
      int end = x;
      while (end + 1 < mask.width && row[end + 1] == v) ++end;
      out.runs.push_back({y, x, end, v});
      x = end + 1;
    }
  }
  row_start[mask.height] = out.runs.size();

  out.sets = DisjointSet(out.runs.size());
  for (int y = 1; y < mask.height; ++y) {
    std::size_t p = row_start[y - 1];
    const std::size_t p_end = row_start[y];
    for (std::size_t c = row_start[y]; c < row_start[y + 1]; ++c) {
      const Run &cur = out.runs[c];
      while (p < p_end && out.runs[p].x1 < cur.x0 - 1) ++p;
      for (std::size_t q = p; q < p_end && out.runs[q].x0 <= cur.x1 + 1; ++q) {
        if (out.runs[q].label == cur.label)
          out.sets.unite(static_cast<std::uint32_t>(q), static_cast<std::uint32_t>(c));
      }
    }
  }
  return out;
}

}  // namespace

std::size_t count_components(const LabelMask &mask) {
  RunLabeling lab = label_runs(mask);
  std::size_t roots = 0;
  for (std::size_t i = 0; i < lab.runs.size(); ++i)
    if (lab.sets.find(static_cast<std::uint32_t>(i)) == i) ++roots;
  return roots;
}

std::vector<Component> connected_components(const LabelMask &mask) {
  RunLabeling lab = label_runs(mask);
  std::vector<int> comp_of_root(lab.runs.size(), -1);
  std::vector<Component> comps;
  std::vector<int> min_col;
  for (std::size_t i = 0; i < lab.runs.size(); ++i) {
    const std::uint32_t root = lab.sets.find(static_cast<std::uint32_t>(i));
    int &id = comp_of_root[root];
    if (id < 0) {
      id = static_cast<int>(comps.size());
      Component c;
      c.polarity = lab.runs[i].label > 0 ? Polarity::bright : Polarity::dark;
      comps.push_back(std::move(c));
      min_col.push_back(lab.runs[i].x0);
    }
    const Run &r = lab.runs[i];
    min_col[id] = std::min(min_col[id], r.x0);
    for (int x = r.x0; x <= r.x1; ++x) comps[id].pixels.push_back({x, r.row});
  }
  // Components were created in raster order of their first pixel, so a stable
  // sort on (min row, min col) leaves raster order as the tie-break.
  std::vector<std::size_t> order(comps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const int ra = comps[a].pixels.front().y, rb = comps[b].pixels.front().y;
    if (ra != rb) return ra < rb;
    return min_col[a] < min_col[b];
  });
  std::vector<Component> sorted;
  sorted.reserve(comps.size());
  for (std::size_t i : order) {
    comps[i].representative = comps[i].pixels.front();
    sorted.push_back(std::move(comps[i]));
  }
  return sorted;
}

}  // namespace irtk
