#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "wsdiff/densities.hpp"
#include "wsdiff/numerics.hpp"

namespace wsdiff {

// n-point Gauss-Legendre rule on [-1, 1]; nodes ascending.
struct GaussLegendreRule {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Roots of P_n by Newton iteration from Chebyshev guesses; weights
// 2 / ((1 - x^2) P_n'(x)^2). Throws ConvergenceFailure.
GaussLegendreRule legendre_rule(int n);

// Value and derivative of P_n at x via the three-term recurrence.
std::pair<double, double> legendre_eval(int n, double x);

// Block order for smoothness beta: the largest integer strictly below max(beta, 2).
int block_order_for_smoothness(double beta);

// [lo, hi] split into m / block_order equal blocks, each carrying a
// block_order-point Gauss-Legendre rule. Node r of block k sits at
//   lo + h (x_r + 2k + 1),  h = (hi - lo) block_order / (2m),
// with weight h w_r.
struct CompositeRule {
  double lo = -1.0;
  double hi = 1.0;
  int block_order = 1;
  int points = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Throws BadPointCount unless m is a positive multiple of block_order, and
// InvalidArgument unless lo < hi.
CompositeRule composite_rule(double lo, double hi, int m, int block_order);

double composite_quadrature(const std::function<double(double)>& g, double lo, double hi, int m,
                            int block_order);

struct TensorQuadratureConfig {
  int points = 32;        // m per axis
  int block_order = 2;    // n_beta
  double tau_tail = 2.0;
  double tau_bd = 0.5;
};

struct ConvolutionEstimate {
  double density = 0.0;  // p_{mu,sigma}(x)
  Vector gradient;       // grad_x p_{mu,sigma}(x)
};

// p_{mu,sigma}(x) = int_{[-1,1]^D} p0(y) phi_sigma(x - mu y) dy and its gradient,
// computed with the truncated, stretched per-axis rule (see README). p0 is
// evaluated only on [-1,1]^D. Throws PreconditionViolated when x is too close
// to the boundary or mu is outside [1/2, 1], DimensionTooLarge for D > 3 and
// ContainmentViolated when a node argument leaves the guaranteed region.
ConvolutionEstimate pt_quadrature(const std::function<double(const Vector&)>& p0, const Vector& x,
                                  double mu, double sigma, const TensorQuadratureConfig& config);
ConvolutionEstimate pt_quadrature(const FactorDensity& p0, const Vector& x, double mu, double sigma,
                                  const TensorQuadratureConfig& config);

// Midpoint-rule evaluation of the same integral on a `grid`^D lattice over the
// support; the brute-force reference for pt_quadrature.
double convolution_riemann(const std::function<double(const Vector&)>& p0, const Vector& x,
                           double mu, double sigma, int grid);

struct ConvergenceRow {
  int points = 0;
  double estimate = 0.0;
  double oracle = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;
};

std::vector<ConvergenceRow> pt_convergence_study(const FactorDensity& p0, const Vector& x,
                                                 double mu, double sigma,
                                                 const std::vector<int>& point_counts,
                                                 const TensorQuadratureConfig& base, int oracle_grid);
// Columns m,p_hat,oracle,abs_err,rel_err.
void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows);

}  // namespace wsdiff
