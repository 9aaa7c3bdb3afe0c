#include "wsdiff/numerics.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace wsdiff {

const char* error_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidSize: return "InvalidSize";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NegativeTime: return "NegativeTime";
    case ErrorKind::SingularTime: return "SingularTime";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::NoAnalyticScore: return "NoAnalyticScore";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::RejectionBudgetExceeded: return "RejectionBudgetExceeded";
    case ErrorKind::OutOfSupport: return "OutOfSupport";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::BadPointCount: return "BadPointCount";
    case ErrorKind::PreconditionViolated: return "PreconditionViolated";
    case ErrorKind::ContainmentViolated: return "ContainmentViolated";
    case ErrorKind::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
  }
  return "UnknownError";
}

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : key_(mix64(seed ^ 0x5851f42d4c957f2dULL)) {}

std::uint64_t Rng::next_u64() {
  const std::uint64_t n = counter_++;
  return mix64(key_ ^ mix64(n + 0x632be59bd9b4e019ULL));
}

double Rng::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "uniform_index(0)");
  // 128-bit multiply-shift; bias is below 2^-64 per draw.
  const unsigned __int128 prod =
      static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n);
  return static_cast<std::uint64_t>(prod >> 64);
}

Rng Rng::split(std::uint64_t stream) const {
  return Rng(mix64(key_ ^ mix64(stream ^ 0xd1b54a32d192ed03ULL)), 0);
}

Vector standard_normal(Rng& rng, Eigen::Index n) {
  if (n < 1) throw Error(ErrorKind::InvalidSize, "standard_normal needs n >= 1");
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
  return z;
}

Matrix cholesky(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "cholesky of non-square matrix");
  }
  const Eigen::Index n = a.rows();
  Matrix lower = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= lower(j, k) * lower(j, k);
    if (!(pivot > 0.0)) {
      throw Error(ErrorKind::NotPositiveDefinite,
                  "pivot " + std::to_string(j) + " is " + std::to_string(pivot));
    }
    const double diag = std::sqrt(pivot);
    lower(j, j) = diag;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      lower(i, j) = s / diag;
    }
  }
  return lower;
}

Vector cholesky_solve(const Matrix& lower, const Vector& b) {
  if (lower.rows() != b.size()) {
    throw Error(ErrorKind::DimensionMismatch, "cholesky_solve size mismatch");
  }
  const Eigen::Index n = b.size();
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = b[i];
    for (Eigen::Index k = 0; k < i; ++k) s -= lower(i, k) * y[k];
    y[i] = s / lower(i, i);
  }
  Vector x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (Eigen::Index k = i + 1; k < n; ++k) s -= lower(k, i) * x[k];
    x[i] = s / lower(i, i);
  }
  return x;
}

double cholesky_log_det(const Matrix& lower) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < lower.rows(); ++i) s += std::log(lower(i, i));
  return 2.0 * s;
}

bool all_finite(const Vector& v) { return v.allFinite(); }

MeanAndError mean_and_error(std::span<const double> values) {
  MeanAndError out;
  const auto n = static_cast<double>(values.size());
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / n;
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std_error = std::sqrt(ss / (n - 1.0) / n);
  return out;
}

}  // namespace wsdiff
