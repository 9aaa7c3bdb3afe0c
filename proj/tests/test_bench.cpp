#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wsdiff/bench.hpp"

using namespace wsdiff;

namespace {

constexpr double kHalfLog2PiE = 2.04709558518064110270;

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("wsdiff_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

ExperimentConfig kde_config() {
  ExperimentConfig c;
  c.case_id = 1;
  c.side = 3;
  c.n_list = {100};
  c.methods = {"kde-g"};
  c.n_eval = 500;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("config parsing") {
  std::istringstream in(
      "# desk run\ncase = 3\nK=2\nM=5\nn_list=100, 200\nmethods=kde-g,kde-u\nseed=9\nlr=0.01\n"
      "arch.widths=32,16\narch.depth=3\narch.sigma_features=true\ntiming=off\n");
  const auto c = parse_config(in);
  CHECK(c.case_id == 3);
  CHECK(c.side == 2);
  CHECK(c.components == 5);
  CHECK(c.n_list == std::vector<long>{100, 200});
  CHECK(c.methods == std::vector<std::string>{"kde-g", "kde-u"});
  CHECK(c.seed == 9);
  CHECK(c.lr == 0.01);
  CHECK(c.arch_widths == std::vector<int>{32, 16});
  CHECK(c.sigma_features);
  CHECK_FALSE(c.record_runtime);

  std::ostringstream out;
  write_config(out, c);
  std::istringstream back(out.str());
  const auto c2 = parse_config(back);
  CHECK(c2.n_list == c.n_list);
  CHECK(c2.arch_widths == c.arch_widths);
  CHECK(c2.lr == c.lr);

  auto kind_of = [](const std::string& text) {
    std::istringstream s(text);
    try {
      parse_config(s);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::IoError;
  };
  CHECK(kind_of("bogus=1\n") == ErrorKind::ParseError);
  CHECK(kind_of("K=abc\n") == ErrorKind::ParseError);
  CHECK(kind_of("no equals sign\n") == ErrorKind::ParseError);
  CHECK(kind_of("K=1\n") == ErrorKind::InvalidArgument);
  CHECK(kind_of("M=0\n") == ErrorKind::InvalidArgument);
  CHECK(kind_of("n_eval=0\n") == ErrorKind::InvalidArgument);
  CHECK(kind_of("methods=magic\n") == ErrorKind::InvalidArgument);
}

TEST_CASE("case builders") {
  ExperimentConfig c;
  c.side = 3;
  CHECK(dimension(case_density(c)) == 9);
  c.case_id = 2;
  CHECK(family_name(case_density(c)) == "grid-mrf");
  c.case_id = 3;
  c.components = 5;
  const auto mix = std::get<GaussMixture>(case_density(c));
  CHECK(mix.components() == 5);
  CHECK(std::get<GaussMixture>(case_density(c)).means == mix.means);
  CHECK(score_architecture(c).widths == std::vector<int>{10, 64, 64, 9});
  c.sigma_features = true;
  CHECK(score_architecture(c).input_width() == 12);
  CHECK(vanilla_architecture(c).input_width() == 9);
}

TEST_CASE("report CSV round trip") {
  BpdReport r;
  r.rows.push_back({1, 3, 0, "kde-g", 100, 0, 2.123456789012345678, std::nullopt, "ok"});
  r.rows.push_back({3, 3, 5, "diffusion", 500, 2, std::nullopt, 12.5, "NonFiniteState"});
  r.rows.push_back({2, 5, 0, "kde-u", 2000, 1, 1.0 / 3.0, 0.25, "ok"});
  std::stringstream buf;
  write_report_csv(buf, r);
  CHECK(buf.str().rfind("case,K,M,method,n,repetition,bpd,runtime_s,status\n", 0) == 0);
  CHECK(read_report_csv(buf) == r);
  std::stringstream bad("case,K\n");
  CHECK_THROWS_AS(read_report_csv(bad), Error);
}

TEST_CASE("run_case smoke test with the Gaussian KDE") {
  auto c = kde_config();
  std::vector<BpdRow> seen;
  const auto report = run_case(c, [&](const BpdRow& row) { seen.push_back(row); });
  REQUIRE(report.rows.size() == static_cast<std::size_t>(c.repetitions));
  CHECK(seen == report.rows);
  for (const auto& row : report.rows) {
    CHECK(row.status == "ok");
    REQUIRE(row.bpd.has_value());
    CHECK(std::isfinite(*row.bpd));
    CHECK_FALSE(row.runtime_s.has_value());
  }
}

TEST_CASE("run_case is byte-identical on rerun") {
  auto c = kde_config();
  c.repetitions = 1;
  c.methods = {"kde-g", "kde-u", "diffusion"};
  c.steps = 50;
  c.em_steps = 20;
  c.n_eval = 200;
  std::ostringstream a;
  std::ostringstream b;
  write_report_csv(a, run_case(c));
  write_report_csv(b, run_case(c));
  CHECK(a.str() == b.str());
  c.seed += 1;
  std::ostringstream d;
  write_report_csv(d, run_case(c));
  CHECK(d.str() != a.str());
}

TEST_CASE("failing cells become typed status rows") {
  auto c = kde_config();
  c.n_list = {1};  // bandwidth rule needs two points
  c.repetitions = 1;
  const auto report = run_case(c);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].status == "InvalidArgument");
  CHECK_FALSE(report.rows[0].bpd.has_value());
}

TEST_CASE("analytic score method reaches the entropy of N(0, I)") {
  auto c = kde_config();
  c.methods = {"analytic"};
  c.repetitions = 1;
  c.n_eval = 3000;
  const auto report = run_case(c);
  REQUIRE(report.rows[0].bpd.has_value());
  CHECK(std::abs(*report.rows[0].bpd - kHalfLog2PiE) < 0.15);
}

TEST_CASE("emit_plots") {
  const auto empty_dir = scratch_dir("empty");
  CHECK_THROWS_AS(emit_plots(BpdReport{}, empty_dir), Error);
  CHECK_FALSE(std::filesystem::exists(empty_dir));

  BpdReport r;
  for (const std::string m : {"kde-g", "diffusion"}) {
    for (long n : {100, 500, 2000}) {
      for (int rep = 0; rep < 2; ++rep) r.rows.push_back({1, 3, 0, m, n, rep, 2.0 + 0.01 * rep + 1.0 / n, std::nullopt, "ok"});
    }
  }
  const auto dir = scratch_dir("plots");
  const auto files = emit_plots(r, dir);
  REQUIRE(files.size() == 2);
  std::ifstream svg_in(files[0]);
  const std::string svg((std::istreambuf_iterator<char>(svg_in)), {});
  CHECK(count(svg, "<polyline") == 2);
  const auto first = svg.find("points=\"");
  const auto end = svg.find('"', first + 8);
  CHECK(count(svg.substr(first + 8, end - first - 8), ",") == 3);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("style=") != std::string::npos);

  std::ifstream csv_in(dir / "report.csv");
  CHECK(read_report_csv(csv_in) == r);
  std::filesystem::remove_all(dir);
}

TEST_CASE("render_svg skips rows without a value") {
  std::vector<BpdRow> rows{{1, 3, 0, "kde-u", 100, 0, std::nullopt, std::nullopt, "NonFiniteState"},
                           {1, 3, 0, "kde-u", 500, 0, 2.5, std::nullopt, "ok"}};
  const auto svg = render_svg(rows, "t");
  CHECK(svg.find("nan") == std::string::npos);
  CHECK(count(svg, "<polyline") == 1);
}

TEST_CASE("score_mse_study: training beats the initial network") {
  ExperimentConfig c;
  c.side = 2;
  c.n_list = {500};
  c.repetitions = 1;
  c.steps = 600;
  c.mse_mc = 4000;
  const auto rows = score_mse_study(c);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].trained < rows[0].initial);
  std::ostringstream out;
  write_score_mse_csv(out, rows);
  CHECK(out.str().rfind("n,repetition,score_mse_init,score_mse_trained,std_error\n", 0) == 0);
}
