#pragma once

// Kernel density baselines with an isotropic bandwidth.

#include <optional>

#include "wsdiff/densities.hpp"
#include "wsdiff/numerics.hpp"

namespace wsdiff {

enum class Kernel { Gaussian, Uniform };

struct KdeModel {
  Matrix data;  // n x D
  double bandwidth = 1.0;
  Kernel kernel = Kernel::Gaussian;
};

// sqrt of the mean per-coordinate sample variance (n - 1 denominator).
double pooled_std(const Matrix& data);

// Scott's rule n^{-1/(D+4)} * pooled_std(data).
double scott_bandwidth(const Matrix& data);

// Uses Scott's rule unless a bandwidth is given. Throws EmptyDataset, and
// InvalidArgument for a non-positive bandwidth or automatic rules on n < 2.
KdeModel fit(const Dataset& data, Kernel kernel, std::optional<double> bandwidth = std::nullopt);

// (1/n) sum_i K_h(x - X_i); the uniform kernel is the box of half-width h
// normalized by (2h)^D.
double density(const KdeModel& model, const Vector& x);

// Picks a datum uniformly and adds h z (Gaussian) or Uniform[-h, h]^D noise.
Dataset sample(const KdeModel& model, long n_samples, Rng& rng);

}  // namespace wsdiff
