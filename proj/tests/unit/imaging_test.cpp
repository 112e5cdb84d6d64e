#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "irtk/errors.hpp"
#include "irtk/imaging.hpp"
#include "oracles.hpp"

using namespace irtk;

namespace {

void write_bytes(const std::filesystem::path &path, const std::string &header, const std::vector<unsigned char> &body) {
  std::ofstream out(path, std::ios::binary);
  out << header;
  out.write(reinterpret_cast<const char *>(body.data()), static_cast<std::streamsize>(body.size()));
}

LabelMask random_mask(std::mt19937_64 &rng, int w, int h, double density) {
  LabelMask m(w, h);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto &l : m.labels) {
    const double r = u(rng);
    l = r < density / 2 ? 1 : (r < density ? -1 : 0);
  }
  return m;
}

}  // namespace

TEST_SUITE("imaging") {
  TEST_CASE("16-bit PGM samples are read big-endian") {
    const auto dir = fixture::scratch_dir("pgm16");
    write_bytes(dir / "a.pgm", "P5\n2 2\n65535\n", {0, 0, 0, 100, 0, 200, 255, 255});
    const Frame f = load_frame(dir / "a.pgm");
    CHECK(f.width() == 2);
    CHECK(f.height() == 2);
    CHECK(std::vector<std::uint16_t>(f.pixels().begin(), f.pixels().end()) == std::vector<std::uint16_t>{0, 100, 200, 65535});
  }

  TEST_CASE("8-bit PGM is widened without scaling") {
    const auto dir = fixture::scratch_dir("pgm8");
    write_bytes(dir / "a.pgm", "P5\n# comment line\n2 1\n255\n", {0, 255});
    const Frame f = load_frame(dir / "a.pgm");
    CHECK(f.at(0, 0) == 0);
    CHECK(f.at(1, 0) == 255);
  }

  TEST_CASE("bad files are rejected") {
    const auto dir = fixture::scratch_dir("pgmbad");
    write_bytes(dir / "p6.pgm", "P6\n2 2\n255\n", std::vector<unsigned char>(12, 0));
    CHECK_THROWS_AS(load_frame(dir / "p6.pgm"), FormatError);
    write_bytes(dir / "short.pgm", "P5\n4 4\n65535\n", std::vector<unsigned char>(10, 0));
    CHECK_THROWS_AS(load_frame(dir / "short.pgm"), IoError);
    write_bytes(dir / "maxval.pgm", "P5\n1 1\n70000\n", {0, 0});
    CHECK_THROWS_AS(load_frame(dir / "maxval.pgm"), FormatError);
    write_bytes(dir / "dims.pgm", "P5\nx 1\n255\n", {0});
    CHECK_THROWS_AS(load_frame(dir / "dims.pgm"), FormatError);
    CHECK_THROWS_AS(load_frame(dir / "missing.pgm"), IoError);
  }

  TEST_CASE("save then load is the identity") {
    const auto dir = fixture::scratch_dir("pgmrt");
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      const int w = 1 + static_cast<int>(rng() % 40), h = 1 + static_cast<int>(rng() % 40);
      std::vector<std::uint16_t> px(static_cast<std::size_t>(w) * h);
      for (auto &v : px) v = static_cast<std::uint16_t>(rng());
      const Frame f(w, h, px, 7);
      save_frame(f, dir / "f.pgm");
      const Frame g = load_frame(dir / "f.pgm", 7);
      CHECK(f == g);
    }
  }

  TEST_CASE("saved file size is header plus two bytes per pixel") {
    const auto dir = fixture::scratch_dir("pgmsize");
    for (auto [w, h] : {std::pair{3, 2}, std::pair{640, 512}}) {
      save_frame(Frame(w, h), dir / "z.pgm");
      const std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n65535\n";
      const std::string bytes = fixture::read_file(dir / "z.pgm");
      CHECK(bytes.size() == header.size() + 2u * w * h);
      CHECK(bytes.compare(0, header.size(), header) == 0);
      CHECK(bytes.find_first_not_of('\0', header.size()) == std::string::npos);
    }
  }

  TEST_CASE("frame constructor validates sizes") {
    CHECK_THROWS_AS(Frame(0, 3), PreconditionError);
    CHECK_THROWS_AS(Frame(2, 2, std::vector<std::uint16_t>(3)), PreconditionError);
  }

  TEST_CASE("components: hand cases") {
    LabelMask empty(5, 4);
    CHECK(connected_components(empty).empty());

    LabelMask diag(3, 3);
    diag.at(0, 0) = 1;
    diag.at(1, 1) = 1;
    auto c = connected_components(diag);
    REQUIRE(c.size() == 1);
    CHECK(c[0].pixels.size() == 2);

    LabelMask split(3, 1);
    split.at(0, 0) = 1;
    split.at(1, 0) = -1;
    c = connected_components(split);
    REQUIRE(c.size() == 2);
    CHECK(c[0].polarity == Polarity::bright);
    CHECK(c[1].polarity == Polarity::dark);
  }

  TEST_CASE("components agree with a flood fill and are ordered") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 60; ++trial) {
      const int w = 1 + static_cast<int>(rng() % 30), h = 1 + static_cast<int>(rng() % 30);
      const LabelMask m = random_mask(rng, w, h, 0.1 + 0.08 * (trial % 10));
      const auto comps = connected_components(m);
      const auto blobs = oracle::flood_components(m);
      REQUIRE(comps.size() == blobs.size());
      CHECK(count_components(m) == blobs.size());

      std::set<std::vector<std::size_t>> expected, got;
      for (const auto &b : blobs) expected.insert(b.pixels);
      for (const auto &cc : comps) {
        std::vector<std::size_t> flat;
        for (const auto &p : cc.pixels) {
          CHECK(m.at(p.x, p.y) == static_cast<std::int8_t>(cc.polarity));
          flat.push_back(static_cast<std::size_t>(p.y) * w + p.x);
        }
        std::sort(flat.begin(), flat.end());
        got.insert(flat);
      }
      CHECK(got == expected);

      for (std::size_t i = 1; i < comps.size(); ++i) {
        auto key = [](const Component &cc) {
          int row = cc.pixels.front().y, col = cc.pixels.front().x;
          for (const auto &p : cc.pixels) {
            row = std::min(row, p.y);
            col = std::min(col, p.x);
          }
          return std::pair{row, col};
        };
        CHECK(key(comps[i - 1]) <= key(comps[i]));
      }
    }
  }

  TEST_CASE("component count is translation invariant") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const LabelMask inner = random_mask(rng, 12, 10, 0.4);
      LabelMask a(20, 20), b(20, 20);
      const int dx = 1 + static_cast<int>(rng() % 6), dy = 1 + static_cast<int>(rng() % 8);
      for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 12; ++x) {
          a.at(x + 1, y + 1) = inner.at(x, y);
          b.at(x + dx, y + dy) = inner.at(x, y);
        }
      CHECK(connected_components(a).size() == connected_components(b).size());
    }
  }

  TEST_CASE("mirror index matches folding") {
    for (int n : {1, 2, 3, 7})
      for (int i = -25; i < 25; ++i) CHECK(reflect_index(i, n) == oracle::fold(i, n));
  }
}
