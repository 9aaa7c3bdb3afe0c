#pragma once

// Ground-truth densities used for simulation: an isotropic Gaussian, a
// Gaussian Markov random field on a K x K grid, an equal-weight Gaussian
// mixture, and a generic product-of-factors density on [-1, 1]^D.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "wsdiff/numerics.hpp"
#include "wsdiff/schedule.hpp"

namespace wsdiff {

struct IsoGaussian {
  int dim = 1;
};

// Precision with `diag` on the diagonal and `coupling` between 4-neighbours of
// a side x side grid (row-major flattening).
struct GridMrfGaussian {
  int side = 0;
  double diag = 1.0;
  double coupling = -0.2;
  Matrix precision;
  Matrix covariance;
  Matrix covariance_factor;  // lower Cholesky factor of the covariance
  Matrix eigenvectors;       // covariance = V diag(eigenvalues) V^T
  Vector eigenvalues;
  double log_det_precision = 0.0;

  static GridMrfGaussian make(int side, double diag = 1.0, double coupling = -0.2);
  int dim() const { return side * side; }
};

// p(x) = (1/M) sum_k N(x; mean_k, I).
struct GaussMixture {
  Matrix means;  // components x dim

  static GaussMixture random(int dim, int components, Rng& rng);
  int dim() const { return static_cast<int>(means.cols()); }
  int components() const { return static_cast<int>(means.rows()); }
};

struct Factor {
  std::vector<int> indices;
  std::function<double(std::span<const double>)> g;  // positive on [-1,1]^|indices|
  double sup = 1.0;                                   // upper bound of g, for rejection
};

// p(x) = prod_I g_I(x_I) / Z on [-1, 1]^D.
struct FactorDensity {
  int dim = 1;
  std::vector<Factor> factors;
  double log_norm = 0.0;  // log Z

  // Computes Z numerically: per factor when the index sets are disjoint,
  // otherwise over the whole cube (dim <= 3).
  static FactorDensity make(int dim, std::vector<Factor> factors);
  // prod_i (1 + cos(pi x_i)) / 2, which already integrates to one.
  static FactorDensity cosine_bump(int dim);

  int effective_dim() const;
  double unnormalized(std::span<const double> x) const;
};

using Density = std::variant<IsoGaussian, GridMrfGaussian, GaussMixture, FactorDensity>;

// Serializable recipe for the built-in families; lets the CLI rebuild p0 from
// a dataset's metadata sidecar.
struct DensitySpec {
  std::string family = "iso-gaussian";  // iso-gaussian | grid-mrf | gauss-mixture | cosine-bump
  int dim = 1;
  int side = 0;
  int components = 0;
  double diag = 1.0;
  double coupling = -0.2;
  std::uint64_t seed = 0;
  Matrix means;  // filled for gauss-mixture
};

Density build_density(const DensitySpec& spec);
DensitySpec describe_density(const Density& density, std::uint64_t seed = 0);

int dimension(const Density& density);
int effective_dimension(const Density& density);
std::string family_name(const Density& density);
bool has_analytic_score(const Density& density);

struct Dataset {
  Matrix samples;  // n x D, one sample per row
  DensitySpec origin;

  Eigen::Index size() const { return samples.rows(); }
  Eigen::Index dim() const { return samples.cols(); }
};

Dataset sample(const Density& density, long n, Rng& rng, long rejection_budget_per_sample = 10000);

// Exact log p0(x). FactorDensity throws OutOfSupport outside the cube.
double log_density(const Density& density, const Vector& x);

// grad log p_t(x) for the Gaussian families; throws NoAnalyticScore otherwise.
Vector analytic_score_t(const Density& density, const Vector& x, double t,
                        const DiffusionSchedule& schedule);

struct BpdResult {
  double bits = 0.0;
  bool infinite = false;  // some sample had p0 = 0
};

// -(1 / (n D)) sum_i log2 p0(x_i).
BpdResult bpd(const Density& density, const Matrix& samples);

// Bits per dimension of exact draws from p0, with Monte Carlo standard error.
MeanAndError reference_bpd(const Density& density, long n_mc, Rng& rng);

// Dataset CSV: header "x1,...,xD" then one row per sample.
void write_dataset_csv(std::ostream& out, const Matrix& samples);
Matrix read_dataset_csv(std::istream& in);
// JSON sidecar carrying the DensitySpec.
void write_density_metadata(std::ostream& out, const DensitySpec& spec);
DensitySpec read_density_metadata(std::istream& in);

}  // namespace wsdiff
