#include "wsdiff/densities.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "wsdiff/quadrature.hpp"

namespace wsdiff {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// Tensor Gauss-Legendre integral of f over [-1,1]^dim.
double cube_integral(int dim, const std::function<double(std::span<const double>)>& f) {
  const int per_axis = dim <= 1 ? 256 : (dim == 2 ? 128 : 64);
  const auto rule = composite_rule(-1.0, 1.0, per_axis, 8);
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  std::vector<double> point(static_cast<std::size_t>(dim));
  double sum = 0.0;
  while (true) {
    double w = 1.0;
    for (int i = 0; i < dim; ++i) {
      const auto j = static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
      point[static_cast<std::size_t>(i)] = rule.nodes[j];
      w *= rule.weights[j];
    }
    sum += w * f(point);
    int axis = dim - 1;
    while (axis >= 0 && ++idx[static_cast<std::size_t>(axis)] == per_axis) {
      idx[static_cast<std::size_t>(axis)] = 0;
      --axis;
    }
    if (axis < 0) break;
  }
  return sum;
}

void check_dim(const Density& density, const Vector& x) {
  if (x.size() != dimension(density)) {
    throw Error(ErrorKind::DimensionMismatch, "point has dimension " + std::to_string(x.size()) +
                                                  ", density has " + std::to_string(dimension(density)));
  }
}

}  // namespace

GridMrfGaussian GridMrfGaussian::make(int side, double diag, double coupling) {
  if (side < 1) throw Error(ErrorKind::InvalidArgument, "grid side must be >= 1");
  GridMrfGaussian g;
  g.side = side;
  g.diag = diag;
  g.coupling = coupling;
  const int dim = side * side;
  g.precision = Matrix::Zero(dim, dim);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const int i = r * side + c;
      g.precision(i, i) = diag;
      if (c + 1 < side) g.precision(i, i + 1) = g.precision(i + 1, i) = coupling;
      if (r + 1 < side) g.precision(i, i + side) = g.precision(i + side, i) = coupling;
    }
  }
  const Matrix prec_factor = cholesky(g.precision);
  g.log_det_precision = cholesky_log_det(prec_factor);
  g.covariance = Matrix::Zero(dim, dim);
  for (int j = 0; j < dim; ++j) g.covariance.col(j) = cholesky_solve(prec_factor, Vector::Unit(dim, j));
  g.covariance = 0.5 * (g.covariance + g.covariance.transpose()).eval();
  g.covariance_factor = cholesky(g.covariance);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g.covariance);
  g.eigenvectors = eig.eigenvectors();
  g.eigenvalues = eig.eigenvalues();
  return g;
}

GaussMixture GaussMixture::random(int dim, int components, Rng& rng) {
  if (dim < 1 || components < 1) throw Error(ErrorKind::InvalidArgument, "mixture needs dim, M >= 1");
  GaussMixture mix;
  mix.means.resize(components, dim);
  for (int k = 0; k < components; ++k) {
    for (int j = 0; j < dim; ++j) mix.means(k, j) = rng.normal();
  }
  return mix;
}

FactorDensity FactorDensity::make(int dim, std::vector<Factor> factors) {
  if (dim < 1) throw Error(ErrorKind::InvalidArgument, "factor density needs dim >= 1");
  FactorDensity d;
  d.dim = dim;
  d.factors = std::move(factors);
  std::set<int> seen;
  bool disjoint = true;
  for (const auto& f : d.factors) {
    if (f.indices.empty() || !f.g) throw Error(ErrorKind::InvalidArgument, "empty factor");
    for (int i : f.indices) {
      if (i < 0 || i >= dim) throw Error(ErrorKind::InvalidArgument, "factor index out of range");
      if (!seen.insert(i).second) disjoint = false;
    }
  }
  if (disjoint) {
    double log_z = static_cast<double>(dim - static_cast<int>(seen.size())) * std::log(2.0);
    for (const auto& f : d.factors) {
      if (f.indices.size() > 3) {
        throw Error(ErrorKind::DimensionTooLarge, "factor normalization supports |I| <= 3");
      }
      log_z += std::log(cube_integral(static_cast<int>(f.indices.size()), f.g));
    }
    d.log_norm = log_z;
  } else {
    if (dim > 3) throw Error(ErrorKind::DimensionTooLarge, "overlapping factors need dim <= 3");
    d.log_norm = 0.0;
    d.log_norm = std::log(cube_integral(dim, [&](std::span<const double> x) { return d.unnormalized(x); }));
  }
  return d;
}

FactorDensity FactorDensity::cosine_bump(int dim) {
  std::vector<Factor> factors;
  for (int i = 0; i < dim; ++i) {
    factors.push_back({{i}, [](std::span<const double> x) { return 0.5 * (1.0 + std::cos(std::numbers::pi * x[0])); }, 1.0});
  }
  return make(dim, std::move(factors));
}

int FactorDensity::effective_dim() const {
  std::size_t d = 0;
  for (const auto& f : factors) d = std::max(d, f.indices.size());
  return static_cast<int>(d);
}

double FactorDensity::unnormalized(std::span<const double> x) const {
  double p = 1.0;
  std::vector<double> sub;
  for (const auto& f : factors) {
    sub.clear();
    for (int i : f.indices) sub.push_back(x[static_cast<std::size_t>(i)]);
    p *= f.g(sub);
  }
  return p;
}

int dimension(const Density& density) {
  return std::visit(Overloaded{
                        [](const IsoGaussian& d) { return d.dim; },
                        [](const GridMrfGaussian& d) { return d.dim(); },
                        [](const GaussMixture& d) { return d.dim(); },
                        [](const FactorDensity& d) { return d.dim; },
                    },
                    density);
}

int effective_dimension(const Density& density) {
  return std::visit(Overloaded{
                        [](const IsoGaussian&) { return 1; },
                        [](const GridMrfGaussian& d) { return d.side > 1 ? 2 : 1; },
                        [](const GaussMixture& d) { return d.dim(); },
                        [](const FactorDensity& d) { return d.effective_dim(); },
                    },
                    density);
}

std::string family_name(const Density& density) {
  return std::visit(Overloaded{
                        [](const IsoGaussian&) { return std::string("iso-gaussian"); },
                        [](const GridMrfGaussian&) { return std::string("grid-mrf"); },
                        [](const GaussMixture&) { return std::string("gauss-mixture"); },
                        [](const FactorDensity&) { return std::string("factor"); },
                    },
                    density);
}

bool has_analytic_score(const Density& density) {
  return !std::holds_alternative<FactorDensity>(density);
}

Density build_density(const DensitySpec& spec) {
  if (spec.family == "iso-gaussian") return IsoGaussian{spec.dim};
  if (spec.family == "grid-mrf") return GridMrfGaussian::make(spec.side, spec.diag, spec.coupling);
  if (spec.family == "gauss-mixture") {
    if (spec.means.rows() > 0) return GaussMixture{spec.means};
    Rng rng(spec.seed);
    return GaussMixture::random(spec.dim, spec.components, rng);
  }
  if (spec.family == "cosine-bump") return FactorDensity::cosine_bump(spec.dim);
  throw Error(ErrorKind::InvalidArgument, "unknown density family '" + spec.family + "'");
}

DensitySpec describe_density(const Density& density, std::uint64_t seed) {
  DensitySpec spec;
  spec.seed = seed;
  spec.dim = dimension(density);
  std::visit(Overloaded{
                 [&](const IsoGaussian&) { spec.family = "iso-gaussian"; },
                 [&](const GridMrfGaussian& d) {
                   spec.family = "grid-mrf";
                   spec.side = d.side;
                   spec.diag = d.diag;
                   spec.coupling = d.coupling;
                 },
                 [&](const GaussMixture& d) {
                   spec.family = "gauss-mixture";
                   spec.components = d.components();
                   spec.means = d.means;
                 },
                 // Only the built-in cosine bump round-trips through a spec.
                 [&](const FactorDensity&) { spec.family = "cosine-bump"; },
             },
             density);
  return spec;
}

Dataset sample(const Density& density, long n, Rng& rng, long rejection_budget_per_sample) {
  if (n < 1) throw Error(ErrorKind::InvalidSize, "sample needs n >= 1");
  const int dim = dimension(density);
  Dataset out;
  out.samples.resize(n, dim);
  out.origin = describe_density(density);
  std::visit(Overloaded{
                 [&](const IsoGaussian&) {
                   for (long i = 0; i < n; ++i) {
                     for (int j = 0; j < dim; ++j) out.samples(i, j) = rng.normal();
                   }
                 },
                 [&](const GridMrfGaussian& d) {
                   for (long i = 0; i < n; ++i) {
                     out.samples.row(i) = (d.covariance_factor * standard_normal(rng, dim)).transpose();
                   }
                 },
                 [&](const GaussMixture& d) {
                   for (long i = 0; i < n; ++i) {
                     const auto k = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(d.components())));
                     for (int j = 0; j < dim; ++j) out.samples(i, j) = d.means(k, j) + rng.normal();
                   }
                 },
                 [&](const FactorDensity& d) {
                   double envelope = 1.0;
                   for (const auto& f : d.factors) envelope *= f.sup;
                   std::vector<double> x(static_cast<std::size_t>(dim));
                   const long budget = rejection_budget_per_sample * n;
                   long attempts = 0;
                   for (long i = 0; i < n;) {
                     if (++attempts > budget) {
                       throw Error(ErrorKind::RejectionBudgetExceeded,
                                   "accepted " + std::to_string(i) + " of " + std::to_string(n));
                     }
                     for (auto& v : x) v = 2.0 * rng.uniform() - 1.0;
                     if (rng.uniform() * envelope <= d.unnormalized(x)) {
                       for (int j = 0; j < dim; ++j) out.samples(i, j) = x[static_cast<std::size_t>(j)];
                       ++i;
                     }
                   }
                 },
             },
             density);
  return out;
}

double log_density(const Density& density, const Vector& x) {
  check_dim(density, x);
  const double dim = static_cast<double>(x.size());
  return std::visit(Overloaded{
                        [&](const IsoGaussian&) { return -0.5 * dim * kLog2Pi - 0.5 * x.squaredNorm(); },
                        [&](const GridMrfGaussian& d) {
                          return 0.5 * d.log_det_precision - 0.5 * dim * kLog2Pi -
                                 0.5 * x.dot(d.precision * x);
                        },
                        [&](const GaussMixture& d) {
                          Vector terms(d.components());
                          for (int k = 0; k < d.components(); ++k) {
                            terms[k] = -0.5 * (x - d.means.row(k).transpose()).squaredNorm();
                          }
                          return log_sum_exp(terms) - std::log(static_cast<double>(d.components())) -
                                 0.5 * dim * kLog2Pi;
                        },
                        [&](const FactorDensity& d) {
                          if (x.cwiseAbs().maxCoeff() > 1.0) {
                            throw Error(ErrorKind::OutOfSupport, "point outside [-1,1]^D");
                          }
                          return std::log(d.unnormalized(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())))) -
                                 d.log_norm;
                        },
                    },
                    density);
}

Vector analytic_score_t(const Density& density, const Vector& x, double t,
                        const DiffusionSchedule& schedule) {
  check_dim(density, x);
  const auto [mu, sigma] = mu_sigma(schedule, t);
  const double mu2 = mu * mu;
  const double s2 = sigma * sigma;
  return std::visit(Overloaded{
                        [&](const IsoGaussian&) -> Vector { return -x / (mu2 + s2); },
                        [&](const GridMrfGaussian& d) -> Vector {
                          // (mu^2 Sigma + sigma^2 I)^{-1} in the covariance eigenbasis.
                          const Vector coords = d.eigenvectors.transpose() * x;
                          const Vector scaled =
                              coords.array() / (mu2 * d.eigenvalues.array() + s2);
                          return -(d.eigenvectors * scaled);
                        },
                        [&](const GaussMixture& d) -> Vector {
                          const double var = mu2 + s2;
                          Vector logits(d.components());
                          for (int k = 0; k < d.components(); ++k) {
                            logits[k] = -0.5 * (x - mu * d.means.row(k).transpose()).squaredNorm() / var;
                          }
                          const Vector w = (logits.array() - log_sum_exp(logits)).exp();
                          Vector centre = mu * (d.means.transpose() * w);
                          return (centre - x) / var;
                        },
                        [&](const FactorDensity&) -> Vector {
                          throw Error(ErrorKind::NoAnalyticScore,
                                      "factor densities have no closed-form p_t score; use pt_quadrature");
                        },
                    },
                    density);
}

BpdResult bpd(const Density& density, const Matrix& samples) {
  if (samples.rows() < 1) throw Error(ErrorKind::EmptyDataset, "bpd of zero samples");
  double total = 0.0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const double lp = log_density(density, samples.row(i).transpose());
    if (!std::isfinite(lp)) {
      return {std::numeric_limits<double>::infinity(), true};
    }
    total += lp;
  }
  const double n = static_cast<double>(samples.rows());
  const double dim = static_cast<double>(samples.cols());
  return {-total / (n * dim * std::numbers::ln2), false};
}

MeanAndError reference_bpd(const Density& density, long n_mc, Rng& rng) {
  if (n_mc < 1) throw Error(ErrorKind::InvalidSize, "reference_bpd needs n_mc >= 1");
  const Dataset draws = sample(density, n_mc, rng);
  const double dim = static_cast<double>(draws.dim());
  std::vector<double> bits(static_cast<std::size_t>(n_mc));
  for (long i = 0; i < n_mc; ++i) {
    bits[static_cast<std::size_t>(i)] =
        -log_density(density, draws.samples.row(i).transpose()) / (dim * std::numbers::ln2);
  }
  return mean_and_error(bits);
}

}  // namespace wsdiff
