#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "wsdiff/error.hpp"

namespace wsdiff {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Counter-based generator: the n-th output is a bijective mix of (key, n), so
// a stream is fully described by its key and position. split() derives child
// keys without advancing the parent, which keeps parallel workers
// deterministic regardless of scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

  Rng split(std::uint64_t stream) const;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  Rng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t mix64(std::uint64_t x);

Vector standard_normal(Rng& rng, Eigen::Index n);

// Lower-triangular L with L * L^T = a. Throws NotPositiveDefinite when a
// pivot is not strictly positive.
Matrix cholesky(const Matrix& a);

// Solves (L L^T) x = b given the Cholesky factor L.
Vector cholesky_solve(const Matrix& lower, const Vector& b);

// log det(L L^T) = 2 * sum log L_ii.
double cholesky_log_det(const Matrix& lower);

bool all_finite(const Vector& v);

struct MeanAndError {
  double mean = 0.0;
  double std_error = 0.0;
};

// Sample mean and standard error of the mean (n - 1 denominator).
MeanAndError mean_and_error(std::span<const double> values);

}  // namespace wsdiff
