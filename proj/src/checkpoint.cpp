#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "wsdiff/wsnn.hpp"

namespace wsdiff {

namespace {

constexpr const char* kMagic = "wsnn-checkpoint";
constexpr int kVersion = 1;

void write_mask(std::ostream& out, const char* tag, int layer, const std::vector<std::uint8_t>& mask) {
  out << tag << ' ' << layer;
  if (mask.empty()) {
    out << " dense\n";
    return;
  }
  out << ' ' << mask.size();
  for (auto v : mask) out << ' ' << static_cast<int>(v);
  out << '\n';
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void expect(const std::string& word) {
    const auto got = token();
    if (got != word) fail("expected '" + word + "', got '" + got + "'");
  }
  std::string token() {
    std::string s;
    if (!(in_ >> s)) fail("unexpected end of checkpoint");
    return s;
  }
  long integer() {
    const auto s = token();
    try {
      std::size_t pos = 0;
      const long v = std::stol(s, &pos);
      if (pos != s.size()) fail("bad integer '" + s + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("bad integer '" + s + "'");
    }
  }
  double real() {
    const auto s = token();
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) fail("bad real '" + s + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("bad real '" + s + "'");
    }
  }
  [[noreturn]] void fail(const std::string& msg) { throw Error(ErrorKind::ParseError, msg); }

 private:
  std::istream& in_;
};

std::vector<std::uint8_t> read_mask(Reader& r, const char* tag, int layer) {
  r.expect(tag);
  if (r.integer() != layer) r.fail(std::string(tag) + " out of order");
  const auto first = r.token();
  if (first == "dense") return {};
  const long n = std::stol(first);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n));
  for (auto& v : mask) v = static_cast<std::uint8_t>(r.integer() != 0);
  return mask;
}

}  // namespace

void save_checkpoint(std::ostream& out, const WsnnArchitecture& arch, const WsnnParams& params) {
  arch.validate();
  out << kMagic << ' ' << kVersion << '\n';
  out << "depth " << arch.depth << '\n';
  out << "widths";
  for (int w : arch.widths) out << ' ' << w;
  out << "\nreplicas";
  for (int m : arch.replicas()) out << ' ' << m;
  out << "\nsparsity " << arch.sparsity << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "magnitude " << arch.magnitude << '\n';
  for (int i = 0; i + 1 < arch.depth; ++i) {
    const auto& p = arch.perms[static_cast<std::size_t>(i)];
    for (int j = 0; j < p.replicas(); ++j) {
      for (const auto* kind : {"Q", "R"}) {
        const auto& perm = (*kind == 'Q' ? p.q : p.r)[static_cast<std::size_t>(j)];
        out << "perm " << i << ' ' << j << ' ' << kind << ' ' << perm.size();
        for (int v : perm.mapping()) out << ' ' << v;
        out << '\n';
      }
    }
  }
  for (int i = 0; i < arch.depth; ++i) {
    write_mask(out, "weight_mask", i, arch.weight_masks[static_cast<std::size_t>(i)]);
    write_mask(out, "bias_mask", i, arch.bias_masks[static_cast<std::size_t>(i)]);
  }
  for (int i = 0; i < arch.depth; ++i) {
    const auto& w = params.weights[static_cast<std::size_t>(i)];
    out << "weight " << i << ' ' << w.rows() << ' ' << w.cols();
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) out << ' ' << w(r, c);
    }
    const auto& b = params.biases[static_cast<std::size_t>(i)];
    out << "\nbias " << i << ' ' << b.size();
    for (Eigen::Index r = 0; r < b.size(); ++r) out << ' ' << b[r];
    out << '\n';
  }
  out << "end\n";
  if (!out) throw Error(ErrorKind::IoError, "failed writing checkpoint");
}

void load_checkpoint(std::istream& in, WsnnArchitecture& arch, WsnnParams& params) {
  Reader r(in);
  r.expect(kMagic);
  if (r.integer() != kVersion) r.fail("unsupported checkpoint version");
  WsnnArchitecture a;
  r.expect("depth");
  a.depth = static_cast<int>(r.integer());
  if (a.depth < 2 || a.depth > 1024) r.fail("bad depth");
  r.expect("widths");
  for (int i = 0; i <= a.depth; ++i) a.widths.push_back(static_cast<int>(r.integer()));
  r.expect("replicas");
  std::vector<long> reps;
  for (int i = 0; i + 1 < a.depth; ++i) reps.push_back(r.integer());
  r.expect("sparsity");
  a.sparsity = r.integer();
  r.expect("magnitude");
  a.magnitude = r.real();
  a.perms.resize(static_cast<std::size_t>(a.depth - 1));
  for (int i = 0; i + 1 < a.depth; ++i) {
    for (long j = 0; j < reps[static_cast<std::size_t>(i)]; ++j) {
      for (const char kind : {'Q', 'R'}) {
        r.expect("perm");
        if (r.integer() != i || r.integer() != j) r.fail("permutation table out of order");
        if (r.token() != std::string(1, kind)) r.fail("permutation kind out of order");
        const long n = r.integer();
        std::vector<int> mapping(static_cast<std::size_t>(n));
        for (auto& v : mapping) v = static_cast<int>(r.integer());
        auto& target = kind == 'Q' ? a.perms[static_cast<std::size_t>(i)].q
                                   : a.perms[static_cast<std::size_t>(i)].r;
        target.emplace_back(std::move(mapping));
      }
    }
  }
  for (int i = 0; i < a.depth; ++i) {
    a.weight_masks.push_back(read_mask(r, "weight_mask", i));
    a.bias_masks.push_back(read_mask(r, "bias_mask", i));
  }
  a.validate();
  WsnnParams p;
  for (int i = 0; i < a.depth; ++i) {
    r.expect("weight");
    if (r.integer() != i) r.fail("weights out of order");
    const long rows = r.integer();
    const long cols = r.integer();
    if (rows != a.widths[static_cast<std::size_t>(i) + 1] || cols != a.widths[static_cast<std::size_t>(i)]) {
      r.fail("weight shape does not match widths");
    }
    Matrix w(rows, cols);
    for (long rr = 0; rr < rows; ++rr) {
      for (long cc = 0; cc < cols; ++cc) w(rr, cc) = r.real();
    }
    r.expect("bias");
    if (r.integer() != i) r.fail("biases out of order");
    const long n = r.integer();
    if (n != rows) r.fail("bias length does not match widths");
    Vector b(n);
    for (long k = 0; k < n; ++k) b[k] = r.real();
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  r.expect("end");
  arch = std::move(a);
  params = std::move(p);
}

}  // namespace wsdiff
