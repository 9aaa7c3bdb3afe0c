#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "wsdiff/densities.hpp"
#include "wsdiff/diffusion.hpp"

using namespace wsdiff;

namespace {

constexpr double kHalfLog2PiE = 2.04709558518064110270;  // (1/2) log2(2 pi e)

Matrix sample_cov(const Matrix& m) {
  const Matrix c = m.rowwise() - m.colwise().mean();
  return c.transpose() * c / static_cast<double>(m.rows() - 1);
}

// log N(x; 0, cov) through Eigen's LDLT, independent of the library's path.
double gaussian_logpdf(const Vector& x, const Matrix& cov) {
  const Eigen::LDLT<Matrix> ldlt(cov);
  const double logdet = ldlt.vectorD().array().log().sum();
  return -0.5 * x.dot(ldlt.solve(x)) - 0.5 * logdet - 0.5 * x.size() * std::log(2 * std::numbers::pi);
}

Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double eps = 1e-5) {
  Vector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vector p = x;
    Vector m = x;
    p[k] += eps;
    m[k] -= eps;
    g[k] = (f(p) - f(m)) / (2 * eps);
  }
  return g;
}

}  // namespace

TEST_CASE("grid MRF precision has the 4-neighbour pattern") {
  const auto mrf = GridMrfGaussian::make(3);
  REQUIRE(mrf.precision.rows() == 9);
  for (int a = 0; a < 9; ++a) {
    for (int b = 0; b < 9; ++b) {
      const int ra = a / 3, ca = a % 3, rb = b / 3, cb = b % 3;
      const int manhattan = std::abs(ra - rb) + std::abs(ca - cb);
      const double expect = a == b ? 1.0 : (manhattan == 1 ? -0.2 : 0.0);
      CHECK(mrf.precision(a, b) == expect);
    }
  }
  CHECK((mrf.covariance - mrf.precision.inverse()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((mrf.covariance_factor * mrf.covariance_factor.transpose() - mrf.covariance).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("non positive-definite MRF is rejected") {
  CHECK_THROWS_AS(GridMrfGaussian::make(3, 1.0, -0.5), Error);
}

TEST_CASE("log_density reference values") {
  CHECK(log_density(IsoGaussian{1}, Vector::Zero(1)) == doctest::Approx(-0.9189385332046727).epsilon(1e-15));
  const auto mrf = GridMrfGaussian::make(3);
  CHECK(log_density(mrf, Vector::Zero(9)) ==
        doctest::Approx(0.5 * std::log(mrf.precision.determinant()) - 4.5 * std::log(2 * std::numbers::pi)));
  Rng rng(1);
  const Vector x = standard_normal(rng, 9);
  CHECK(log_density(mrf, x) == doctest::Approx(gaussian_logpdf(x, mrf.precision.inverse())).epsilon(1e-12));

  Matrix means(2, 2);
  means << 1, 0, -1, 0;
  const GaussMixture mix{means};
  const Vector mid = Vector::Zero(2);
  // Both terms equal: log p = log N(mid; m_1, I).
  CHECK(log_density(mix, mid) == doctest::Approx(-std::log(2 * std::numbers::pi) - 0.5));
}

TEST_CASE("analytic scores") {
  const auto s = DiffusionSchedule::constant();
  Rng rng(2);
  const Vector x = standard_normal(rng, 4);
  CHECK((analytic_score_t(IsoGaussian{4}, x, 0.7, s) + x).cwiseAbs().maxCoeff() < 1e-14);

  Matrix sym(2, 1);
  sym << 1.5, -1.5;
  CHECK(analytic_score_t(GaussMixture{sym}, Vector::Zero(1), 0.4, s).norm() < 1e-15);

  const auto mrf = GridMrfGaussian::make(3);
  const double t = 0.3;
  const auto ms = mu_sigma(s, t);
  const Matrix cov_t = ms.mu * ms.mu * mrf.precision.inverse() + ms.sigma * ms.sigma * Matrix::Identity(9, 9);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector y = standard_normal(rng, 9);
    const Vector fd = fd_gradient([&](const Vector& v) { return gaussian_logpdf(v, cov_t); }, y);
    CHECK((analytic_score_t(mrf, y, t, s) - fd).cwiseAbs().maxCoeff() < 1e-6);
  }

  Rng mr(3);
  const auto mix = GaussMixture::random(3, 4, mr);
  auto log_pt = [&](const Vector& v) {
    double acc = 0.0;
    const double var = ms.mu * ms.mu + ms.sigma * ms.sigma;
    for (int k = 0; k < 4; ++k) {
      const Vector d = v - ms.mu * mix.means.row(k).transpose();
      acc += std::exp(-0.5 * d.squaredNorm() / var) / std::pow(2 * std::numbers::pi * var, 1.5);
    }
    return std::log(acc / 4.0);
  };
  for (int trial = 0; trial < 5; ++trial) {
    const Vector y = standard_normal(rng, 3);
    CHECK((analytic_score_t(mix, y, t, s) - fd_gradient(log_pt, y)).cwiseAbs().maxCoeff() < 1e-6);
  }

  CHECK_THROWS_AS(analytic_score_t(FactorDensity::cosine_bump(2), Vector::Zero(2), 0.5, s), Error);
}

TEST_CASE("MRF score at small t approaches -Lambda x") {
  const auto s = DiffusionSchedule::constant();
  const auto mrf = GridMrfGaussian::make(3);
  Rng rng(4);
  const Vector x = standard_normal(rng, 9);
  const Vector exact = -(mrf.precision * x);
  const Vector near = analytic_score_t(mrf, x, 1e-3, s);
  CHECK((near - exact).cwiseAbs().maxCoeff() < 1e-3 * (1.0 + exact.cwiseAbs().maxCoeff()));
}

TEST_CASE("sampling moments") {
  Rng rng(5);
  const auto iso = sample(IsoGaussian{2}, 100000, rng);
  CHECK((sample_cov(iso.samples) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.05);

  const auto mrf = GridMrfGaussian::make(3);
  const auto ds = sample(mrf, 100000, rng);
  CHECK((sample_cov(ds.samples) - mrf.precision.inverse()).cwiseAbs().maxCoeff() < 0.05);

  Matrix means(2, 2);
  means << 2, 0, -2, 0;
  const auto mix = sample(GaussMixture{means}, 10000, rng);
  const double right = (mix.samples.col(0).array() > 0.0).cast<double>().mean();
  CHECK(std::abs(right - 0.5) < 0.03);
}

TEST_CASE("forward-diffused mixture matches the closed-form moments") {
  const auto s = DiffusionSchedule::constant();
  Matrix means(3, 2);
  means << 1, 2, -1, 0, 0.5, -2;
  const Density mix = GaussMixture{means};
  Rng rng(6);
  const double t = 0.4;
  const auto ms = mu_sigma(s, t);
  const int n = 100000;
  const auto x0 = sample(mix, n, rng);
  Matrix xt(n, 2);
  for (int i = 0; i < n; ++i) xt.row(i) = forward_sample(s, x0.samples.row(i).transpose(), t, rng).transpose();
  const Vector mbar = means.colwise().mean().transpose();
  const Matrix centred = means.rowwise() - means.colwise().mean();
  const Matrix cov_means = centred.transpose() * centred / 3.0;
  const Matrix cov = ms.mu * ms.mu * (cov_means + Matrix::Identity(2, 2)) + ms.sigma * ms.sigma * Matrix::Identity(2, 2);
  CHECK((xt.colwise().mean().transpose() - ms.mu * mbar).cwiseAbs().maxCoeff() < 0.03);
  CHECK((sample_cov(xt) - cov).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("bits per dimension") {
  CHECK(bpd(IsoGaussian{1}, Matrix::Zero(1, 1)).bits == doctest::Approx(1.3257480647361594).epsilon(1e-14));
  CHECK(bpd(IsoGaussian{1}, Matrix::Zero(5, 1)).bits == doctest::Approx(1.3257480647361594).epsilon(1e-14));

  Rng rng(7);
  const auto draws = sample(IsoGaussian{4}, 3000, rng);
  CHECK(std::abs(bpd(IsoGaussian{4}, draws.samples).bits - kHalfLog2PiE) < 0.1);

  Rng r2(8);
  const auto ref = reference_bpd(IsoGaussian{3}, 20000, r2);
  CHECK(std::abs(ref.mean - kHalfLog2PiE) < 3 * ref.std_error);

  const auto mrf = GridMrfGaussian::make(3);
  // Gaussian entropy per dimension in bits: (1/2D) log2((2 pi e)^D det Sigma).
  const double exact = kHalfLog2PiE + 0.5 / 9.0 * std::log2(mrf.precision.inverse().determinant());
  Rng r3(9);
  const auto mref = reference_bpd(mrf, 20000, r3);
  CHECK(std::abs(mref.mean - exact) < 3 * mref.std_error);

  Rng r4(10);
  const auto draws2 = sample(mrf, 5000, r4);
  const double direct = bpd(mrf, draws2.samples).bits;
  std::vector<double> per(5000);
  for (int i = 0; i < 5000; ++i) per[i] = -log_density(mrf, draws2.samples.row(i).transpose()) / (9.0 * std::log(2.0));
  const auto pe = mean_and_error(per);
  CHECK(std::abs(direct - mref.mean) < 3 * std::hypot(pe.std_error, mref.std_error));

  Matrix one(1, 2);
  one << 3.0, -1.0;
  Rng r5(11);
  const auto single = reference_bpd(GaussMixture{one}, 20000, r5);
  CHECK(std::abs(single.mean - kHalfLog2PiE) < 3 * single.std_error);
}

TEST_CASE("factor density normalization, separability and support") {
  const auto bump = FactorDensity::cosine_bump(2);
  CHECK(bump.log_norm == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(bump.effective_dim() == 1);
  Vector x(2);
  x << 0.3, -0.6;
  const auto one = FactorDensity::cosine_bump(1);
  CHECK(log_density(bump, x) ==
        doctest::Approx(log_density(one, Vector::Constant(1, 0.3)) + log_density(one, Vector::Constant(1, -0.6))));
  CHECK_THROWS_AS(log_density(bump, Vector::Constant(2, 1.5)), Error);

  // Overlapping factors normalized over the square; Riemann oracle.
  const auto coupled = FactorDensity::make(
      2, {Factor{{0, 1}, [](std::span<const double> v) { return std::exp(v[0] * v[1]); }, std::exp(1.0)},
          Factor{{1}, [](std::span<const double> v) { return 1.0 + 0.5 * v[0]; }, 1.5}});
  CHECK(coupled.effective_dim() == 2);
  const int grid = 400;
  double total = 0.0;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      Vector p(2);
      p << -1 + (i + 0.5) * 2.0 / grid, -1 + (j + 0.5) * 2.0 / grid;
      total += std::exp(log_density(coupled, p));
    }
  }
  total *= 4.0 / (grid * grid);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-4));

  Rng rng(12);
  const auto draws = sample(coupled, 2000, rng);
  CHECK(draws.samples.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("rejection sampling gives up after its budget") {
  const auto spiky = FactorDensity::make(
      1, {Factor{{0}, [](std::span<const double> v) { return std::exp(-1e4 * v[0] * v[0]); }, 1e12}});
  Rng rng(13);
  try {
    sample(spiky, 10, rng, 5);
    FAIL("expected RejectionBudgetExceeded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RejectionBudgetExceeded);
  }
}

TEST_CASE("dataset CSV round trip is exact") {
  Rng rng(14);
  const auto d = sample(GridMrfGaussian::make(2), 50, rng);
  std::stringstream buf;
  write_dataset_csv(buf, d.samples);
  CHECK(buf.str().rfind("x1,x2,x3,x4\n", 0) == 0);
  CHECK(read_dataset_csv(buf) == d.samples);
  std::stringstream bad("x1,x2\n1,2\n3\n");
  CHECK_THROWS_AS(read_dataset_csv(bad), Error);
}

TEST_CASE("density metadata round trip rebuilds the same density") {
  Rng rng(15);
  const Density mix = GaussMixture::random(4, 3, rng);
  const Density mrf = GridMrfGaussian::make(3, 1.2, -0.25);
  for (const Density& d : {mix, mrf, Density{IsoGaussian{5}}}) {
    std::stringstream buf;
    write_density_metadata(buf, describe_density(d, 9));
    const Density back = build_density(read_density_metadata(buf));
    const Vector x = standard_normal(rng, dimension(d));
    CHECK(log_density(back, x) == log_density(d, x));
    CHECK(family_name(back) == family_name(d));
  }
}
