#include "wsdiff/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

namespace wsdiff {

std::pair<double, double> legendre_eval(int n, double x) {
  double p_prev = 1.0;
  double p = x;
  if (n == 0) return {1.0, 0.0};
  for (int k = 2; k <= n; ++k) {
    const double p_next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
    p_prev = p;
    p = p_next;
  }
  // (1 - x^2) P_n'(x) = n (P_{n-1}(x) - x P_n(x))
  const double dp = n * (p_prev - x * p) / (1.0 - x * x);
  return {p, dp};
}

GaussLegendreRule legendre_rule(int n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "legendre_rule needs n >= 1");
  GaussLegendreRule rule;
  rule.order = n;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    bool converged = false;
    for (int iter = 0; iter < 100; ++iter) {
      const auto [p, dp] = legendre_eval(n, x);
      const double step = p / dp;
      x -= step;
      if (std::abs(step) < 1e-16) {
        converged = true;
        break;
      }
    }
    const auto [p, dp] = legendre_eval(n, x);
    if (!converged && std::abs(p) >= 1e-14) {
      throw Error(ErrorKind::ConvergenceFailure,
                  "Newton iteration for root " + std::to_string(i) + " of P_" + std::to_string(n));
    }
    // Roots come out descending; store ascending.
    const auto slot = static_cast<std::size_t>(n - 1 - i);
    rule.nodes[slot] = x;
    rule.weights[slot] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

int block_order_for_smoothness(double beta) {
  if (!(beta > 0.0)) throw Error(ErrorKind::InvalidArgument, "smoothness must be positive");
  const double b = std::max(beta, 2.0);
  const double below = std::ceil(b) - 1.0;
  return static_cast<int>(below);
}

CompositeRule composite_rule(double lo, double hi, int m, int block_order) {
  if (!(lo < hi)) throw Error(ErrorKind::InvalidArgument, "composite rule needs lo < hi");
  if (block_order < 1 || m < block_order || m % block_order != 0) {
    throw Error(ErrorKind::BadPointCount,
                "m = " + std::to_string(m) + " is not a positive multiple of " +
                    std::to_string(block_order));
  }
  const auto base = legendre_rule(block_order);
  CompositeRule rule{lo, hi, block_order, m, {}, {}};
  const double h = (hi - lo) * block_order / (2.0 * m);
  const int blocks = m / block_order;
  rule.nodes.reserve(static_cast<std::size_t>(m));
  rule.weights.reserve(static_cast<std::size_t>(m));
  for (int k = 0; k < blocks; ++k) {
    for (int r = 0; r < block_order; ++r) {
      rule.nodes.push_back(lo + h * (base.nodes[static_cast<std::size_t>(r)] + 2.0 * k + 1.0));
      rule.weights.push_back(h * base.weights[static_cast<std::size_t>(r)]);
    }
  }
  return rule;
}

double composite_quadrature(const std::function<double(double)>& g, double lo, double hi, int m,
                            int block_order) {
  const auto rule = composite_rule(lo, hi, m, block_order);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * g(rule.nodes[i]);
  return sum;
}

namespace {

double std_normal_pdf(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }

// Calls visit(index) for every multi-index in [m]^dim, last axis fastest.
template <typename Visit>
void for_each_index(int dim, int m, Visit&& visit) {
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  while (true) {
    visit(idx);
    int axis = dim - 1;
    while (axis >= 0 && ++idx[static_cast<std::size_t>(axis)] == m) {
      idx[static_cast<std::size_t>(axis)] = 0;
      --axis;
    }
    if (axis < 0) return;
  }
}

}  // namespace

ConvolutionEstimate pt_quadrature(const std::function<double(const Vector&)>& p0, const Vector& x,
                                  double mu, double sigma, const TensorQuadratureConfig& config) {
  const int dim = static_cast<int>(x.size());
  if (dim < 1) throw Error(ErrorKind::DimensionMismatch, "empty evaluation point");
  if (dim > 3) throw Error(ErrorKind::DimensionTooLarge, "tensor quadrature supports D <= 3");
  if (!(config.tau_tail > 0.0) || !(config.tau_bd > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "tau_tail and tau_bd must be positive");
  }
  if (!(mu >= 0.5 && mu <= 1.0)) throw Error(ErrorKind::PreconditionViolated, "mu must lie in [1/2, 1]");
  if (!(sigma > 0.0 && sigma < 1.0)) throw Error(ErrorKind::PreconditionViolated, "sigma must lie in (0, 1)");

  const double log_inv_sigma = std::log(1.0 / sigma);
  const double boundary_gap = std::pow(log_inv_sigma, -config.tau_bd);
  if (x.cwiseAbs().maxCoeff() > mu - mu * boundary_gap) {
    throw Error(ErrorKind::PreconditionViolated, "x is too close to the support boundary");
  }
  const double containment = 1.0 - boundary_gap / 2.0;

  const int m = config.points;
  const int nb = config.block_order;
  const auto unit = composite_rule(0.0, 2.0, m, nb);  // nodes n_b/m (x_r + 2k + 1), weights n_b w_r / m
  const double stretch =
      2.0 * std::sqrt(2.0 * config.tau_tail) * std::pow(log_inv_sigma, config.tau_bd + 0.5);

  // nodes[i][j], and weight * phi(node) with the 1/m already folded in.
  std::vector<std::vector<double>> nodes(static_cast<std::size_t>(dim));
  std::vector<std::vector<double>> factors(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) {
    auto& ni = nodes[static_cast<std::size_t>(i)];
    auto& fi = factors[static_cast<std::size_t>(i)];
    for (int j = 0; j < m; ++j) {
      const double y = stretch * (-x[i] - mu + mu * unit.nodes[static_cast<std::size_t>(j)]);
      ni.push_back(y);
      fi.push_back(stretch * unit.weights[static_cast<std::size_t>(j)] * std_normal_pdf(y));
    }
  }

  ConvolutionEstimate est{0.0, Vector::Zero(dim)};
  Vector node(dim);
  Vector arg(dim);
  for_each_index(dim, m, [&](const std::vector<int>& idx) {
    double weight = 1.0;
    for (int i = 0; i < dim; ++i) {
      const auto j = static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
      node[i] = nodes[static_cast<std::size_t>(i)][j];
      weight *= factors[static_cast<std::size_t>(i)][j];
    }
    arg = (x + sigma * node) / mu;
    if (arg.cwiseAbs().maxCoeff() > containment) {
      throw Error(ErrorKind::ContainmentViolated,
                  "node argument leaves [-c, c]^D with c = " + std::to_string(containment) +
                      "; sigma is too large for these tau parameters");
    }
    const double term = weight * p0(arg);
    est.density += term;
    est.gradient += term * node;
  });
  est.gradient /= sigma;
  return est;
}

ConvolutionEstimate pt_quadrature(const FactorDensity& p0, const Vector& x, double mu, double sigma,
                                  const TensorQuadratureConfig& config) {
  if (x.size() != p0.dim) throw Error(ErrorKind::DimensionMismatch, "point dimension vs density");
  const double norm = std::exp(-p0.log_norm);
  return pt_quadrature(
      [&](const Vector& y) { return norm * p0.unnormalized(std::span<const double>(y.data(), static_cast<std::size_t>(y.size()))); },
      x, mu, sigma, config);
}

double convolution_riemann(const std::function<double(const Vector&)>& p0, const Vector& x,
                           double mu, double sigma, int grid) {
  const int dim = static_cast<int>(x.size());
  if (grid < 1 || dim < 1) throw Error(ErrorKind::InvalidArgument, "riemann grid");
  const double h = 2.0 / grid;
  std::vector<double> cell(static_cast<std::size_t>(grid));
  for (int k = 0; k < grid; ++k) cell[static_cast<std::size_t>(k)] = -1.0 + (k + 0.5) * h;
  // Per-axis kernel values phi_sigma(x_i - mu y).
  std::vector<std::vector<double>> kernel(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) {
    for (double y : cell) {
      kernel[static_cast<std::size_t>(i)].push_back(std_normal_pdf((x[i] - mu * y) / sigma) / sigma);
    }
  }
  double sum = 0.0;
  Vector y(dim);
  for_each_index(dim, grid, [&](const std::vector<int>& idx) {
    double k = 1.0;
    for (int i = 0; i < dim; ++i) {
      const auto j = static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
      y[i] = cell[j];
      k *= kernel[static_cast<std::size_t>(i)][j];
    }
    sum += k * p0(y);
  });
  return sum * std::pow(h, dim);
}

std::vector<ConvergenceRow> pt_convergence_study(const FactorDensity& p0, const Vector& x,
                                                 double mu, double sigma,
                                                 const std::vector<int>& point_counts,
                                                 const TensorQuadratureConfig& base, int oracle_grid) {
  const double norm = std::exp(-p0.log_norm);
  const auto density = [&](const Vector& y) {
    return norm * p0.unnormalized(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
  };
  const double oracle = convolution_riemann(density, x, mu, sigma, oracle_grid);
  std::vector<ConvergenceRow> rows;
  for (int m : point_counts) {
    auto cfg = base;
    cfg.points = m;
    const double est = pt_quadrature(p0, x, mu, sigma, cfg).density;
    const double abs_err = std::abs(est - oracle);
    rows.push_back({m, est, oracle, abs_err, abs_err / std::abs(oracle)});
  }
  return rows;
}

void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows) {
  out << "m,p_hat,oracle,abs_err,rel_err\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : rows) {
    out << r.points << ',' << r.estimate << ',' << r.oracle << ',' << r.abs_err << ',' << r.rel_err << '\n';
  }
}

}  // namespace wsdiff
