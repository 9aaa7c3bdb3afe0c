#pragma once

#include <functional>

namespace wsdiff {

// Clock of the forward Ornstein-Uhlenbeck process
//   dX_t = -alpha_t X_t dt + sqrt(2 alpha_t) dB_t,
// with mu_t = exp(-int_0^t alpha) and sigma_t^2 = 1 - mu_t^2. Training draws t
// uniformly on [t_min, t_max] (unit weighting).
class DiffusionSchedule {
 public:
  using Rate = std::function<double(double)>;

  // alpha_t = alpha for all t.
  static DiffusionSchedule constant(double alpha = 1.0, double t_min = 1e-3, double t_max = 3.0);
  // General rate; the caller promises tau_lower <= alpha_t <= tau_upper.
  static DiffusionSchedule custom(Rate alpha, double tau_lower, double tau_upper,
                                  double t_min = 1e-3, double t_max = 3.0);

  double alpha(double t) const;
  // int_0^t alpha_s ds; adaptive Simpson (1e-10) for non-constant rates.
  double integrated_rate(double t) const;
  double lambda(double) const { return 1.0; }

  double t_min() const noexcept { return t_min_; }
  double t_max() const noexcept { return t_max_; }
  double tau_lower() const noexcept { return tau_lower_; }
  double tau_upper() const noexcept { return tau_upper_; }
  bool is_constant() const noexcept { return !rate_; }

  DiffusionSchedule with_window(double t_min, double t_max) const;

 private:
  DiffusionSchedule() = default;
  void validate() const;

  Rate rate_;  // empty for a constant rate
  double constant_rate_ = 1.0;
  double tau_lower_ = 1.0;
  double tau_upper_ = 1.0;
  double t_min_ = 1e-3;
  double t_max_ = 3.0;
};

struct MuSigma {
  double mu = 1.0;
  double sigma = 0.0;
};

// Throws NegativeTime for t < 0.
MuSigma mu_sigma(const DiffusionSchedule& schedule, double t);

}  // namespace wsdiff
