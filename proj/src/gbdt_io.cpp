#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "irtk/errors.hpp"
#include "irtk/gbdt.hpp"

namespace irtk {

namespace {

constexpr int kModelVersion = 1;
constexpr const char *kMagic = "irtk-gbdt-model";

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class TokenReader {
 public:
  TokenReader(std::istream &in, std::string source) : in_(in), source_(std::move(source)) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw ParseError(source_ + ": unexpected end of model file");
    return w;
  }

  void expect(const std::string &key) {
    const std::string w = word();
    if (w != key) throw ParseError(source_ + ": expected '" + key + "', found '" + w + "'");
  }

  long long integer() {
    const std::string w = word();
    char *end = nullptr;
    const long long v = std::strtoll(w.c_str(), &end, 10);
    if (end == w.c_str() || *end != '\0') throw ParseError(source_ + ": bad integer '" + w + "'");
    return v;
  }

  double real() {
    const std::string w = word();
    char *end = nullptr;
    const double v = std::strtod(w.c_str(), &end);
    if (end == w.c_str() || *end != '\0') throw ParseError(source_ + ": bad number '" + w + "'");
    return v;
  }

 private:
  std::istream &in_;
  std::string source_;
};

}  // namespace

// Layout:
//   irtk-gbdt-model
//   version 1
//   feature_dim D
//   base_score B
//   learning_rate R
//   trees T
//   tree <i> nodes <K>
//   <L|I> <feature> <threshold> <left> <right> <value>   (K lines)
//   end
void save_model(const GbdtModel &model, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << kMagic << '\n'
      << "version " << kModelVersion << '\n'
      << "feature_dim " << model.feature_dim() << '\n'
      << "base_score " << fmt17(model.base_score()) << '\n'
      << "learning_rate " << fmt17(model.learning_rate()) << '\n'
      << "trees " << model.trees().size() << '\n';
  for (std::size_t t = 0; t < model.trees().size(); ++t) {
    const auto &nodes = model.trees()[t].nodes;
    out << "tree " << t << " nodes " << nodes.size() << '\n';
    for (const auto &n : nodes) {
      out << (n.leaf ? 'L' : 'I') << ' ' << n.feature << ' ' << fmt17(n.threshold) << ' ' << n.left << ' ' << n.right
          << ' ' << fmt17(n.value) << '\n';
    }
  }
  out << "end\n";
  if (!out) throw IoError("write failed: " + path.string());
}

GbdtModel load_model(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  TokenReader r(in, path.string());
  r.expect(kMagic);
  r.expect("version");
  const long long version = r.integer();
  if (version != kModelVersion)
    throw VersionError(path.string() + ": unsupported model version " + std::to_string(version));
  r.expect("feature_dim");
  const long long dim = r.integer();
  if (dim <= 0) throw ParseError(path.string() + ": feature_dim must be positive");
  r.expect("base_score");
  const double base = r.real();
  r.expect("learning_rate");
  const double lr = r.real();
  r.expect("trees");
  const long long n_trees = r.integer();
  if (n_trees < 0) throw ParseError(path.string() + ": negative tree count");

  std::vector<Tree> trees(static_cast<std::size_t>(n_trees));
  for (long long t = 0; t < n_trees; ++t) {
    r.expect("tree");
    if (r.integer() != t) throw ParseError(path.string() + ": tree index out of sequence");
    r.expect("nodes");
    const long long k = r.integer();
    if (k <= 0) throw ParseError(path.string() + ": tree without nodes");
    auto &nodes = trees[t].nodes;
    nodes.resize(static_cast<std::size_t>(k));
    for (long long idx = 0; idx < k; ++idx) {
      auto &n = nodes[static_cast<std::size_t>(idx)];
      const std::string kind = r.word();
      if (kind != "L" && kind != "I") throw ParseError(path.string() + ": bad node kind '" + kind + "'");
      n.leaf = kind == "L";
      n.feature = static_cast<int>(r.integer());
      n.threshold = r.real();
      n.left = static_cast<int>(r.integer());
      n.right = static_cast<int>(r.integer());
      n.value = r.real();
      if (!n.leaf && (n.feature < 0 || n.feature >= dim || n.left <= idx || n.right <= idx || n.left >= k || n.right >= k))
        throw ParseError(path.string() + ": internal node references out of range");
    }
  }
  r.expect("end");
  return GbdtModel(static_cast<std::size_t>(dim), base, lr, std::move(trees));
}

}  // namespace irtk
