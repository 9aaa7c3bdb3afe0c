#include "wsdiff/sampler.hpp"

#include <cmath>
#include <string>

namespace wsdiff {

namespace {

void guard_state(const Vector& y, double blowup, long path, long step) {
  if (!y.allFinite() || y.cwiseAbs().maxCoeff() > blowup) {
    throw Error(ErrorKind::NonFiniteState,
                "path " + std::to_string(path) + " left [-" + std::to_string(blowup) + ", " +
                    std::to_string(blowup) + "] at step " + std::to_string(step));
  }
}

}  // namespace

std::vector<double> reverse_time_grid(const DiffusionSchedule& schedule, int n_steps, TimeGrid grid) {
  if (n_steps < 1) throw Error(ErrorKind::InvalidArgument, "n_steps must be >= 1");
  const double hi = schedule.t_max();
  const double lo = schedule.t_min();
  std::vector<double> times(static_cast<std::size_t>(n_steps) + 1);
  for (int k = 0; k <= n_steps; ++k) {
    const double frac = static_cast<double>(k) / n_steps;
    times[static_cast<std::size_t>(k)] =
        grid == TimeGrid::Uniform ? hi - (hi - lo) * frac : hi * std::pow(lo / hi, frac);
  }
  times.back() = lo;
  return times;
}

Dataset reverse_sde_sample(const ScoreFunction& score, const DiffusionSchedule& schedule,
                           const SamplerConfig& config) {
  if (config.n_samples < 1 || config.dim < 1) {
    throw Error(ErrorKind::InvalidArgument, "reverse_sde_sample needs n_samples, dim >= 1");
  }
  const auto times = reverse_time_grid(schedule, config.n_steps, config.grid);
  const Rng root(config.seed);
  Dataset out;
  out.samples.resize(config.n_samples, config.dim);
  for (long path = 0; path < config.n_samples; ++path) {
    Rng rng = root.split(static_cast<std::uint64_t>(path));
    Vector y = standard_normal(rng, config.dim);
    for (int k = 0; k < config.n_steps; ++k) {
      const double t = times[static_cast<std::size_t>(k)];
      const double h = t - times[static_cast<std::size_t>(k) + 1];
      const double a = schedule.alpha(t);
      const Vector drift = a * y + 2.0 * a * score(y, t);
      y += h * drift + std::sqrt(2.0 * a * h) * standard_normal(rng, config.dim);
      guard_state(y, config.blowup, path, k);
    }
    out.samples.row(path) = y.transpose();
  }
  return out;
}

Vector vanilla_input(const WsnnArchitecture& arch, const Vector& x) {
  if (arch.output_width() != x.size()) {
    throw Error(ErrorKind::DimensionMismatch, "vanilla score network output must have width D");
  }
  if (arch.input_width() == x.size()) return x;
  if (arch.input_width() == x.size() + 1) {
    Vector in = Vector::Zero(x.size() + 1);
    in.head(x.size()) = x;
    return in;
  }
  throw Error(ErrorKind::DimensionMismatch, "vanilla score network input must be D or D + 1 wide");
}

double network_divergence(const WsnnArchitecture& arch, const WsnnParams& params, const Vector& x,
                          DivergenceMethod method) {
  const Eigen::Index dim = x.size();
  double trace = 0.0;
  if (method == DivergenceMethod::FiniteDifference) {
    constexpr double eps = 1e-4;
    for (Eigen::Index k = 0; k < dim; ++k) {
      Vector plus = x;
      Vector minus = x;
      plus[k] += eps;
      minus[k] -= eps;
      trace += (forward(arch, params, vanilla_input(arch, plus))[k] -
                forward(arch, params, vanilla_input(arch, minus))[k]) /
               (2.0 * eps);
    }
    return trace;
  }
  const Vector input = vanilla_input(arch, x);
  const LayerTrace primal = forward_trace(arch, params, input);
  for (Eigen::Index k = 0; k < dim; ++k) {
    trace += tangent_trace(arch, params, primal, Vector::Unit(input.size(), k)).output[k];
  }
  return trace;
}

double vanilla_sm_loss(const WsnnArchitecture& arch, const WsnnParams& params, const Vector& x,
                       DivergenceMethod method) {
  const Vector f = forward(arch, params, vanilla_input(arch, x));
  return network_divergence(arch, params, x, method) + 0.5 * f.squaredNorm();
}

double vanilla_sm_loss_and_grad(const WsnnArchitecture& arch, const WsnnParams& params, const Vector& x,
                                double weight, WsnnParams& grads) {
  const Vector input = vanilla_input(arch, x);
  const LayerTrace primal = forward_trace(arch, params, input);
  const Eigen::Index dim = x.size();
  // 0.5 ||f||^2
  accumulate_backward(arch, params, primal, weight * primal.output, grads, nullptr, true);
  double loss = 0.5 * primal.output.squaredNorm();
  // tr(J): the k-th tangent pass is linear in every weight once the ReLU
  // gates are frozen, so it backpropagates like a bias-free network.
  for (Eigen::Index k = 0; k < dim; ++k) {
    const LayerTrace tangent = tangent_trace(arch, params, primal, Vector::Unit(input.size(), k));
    loss += tangent.output[k];
    accumulate_backward(arch, params, tangent, weight * Vector::Unit(dim, k), grads, nullptr, false);
  }
  return loss;
}

TrainResult train_vanilla_sm(const Dataset& data, const WsnnArchitecture& arch, const WsnnParams& init,
                             const TrainConfig& config) {
  if (data.size() < 1) throw Error(ErrorKind::EmptyDataset, "training set is empty");
  if (arch.output_width() != data.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "network output width must equal data dimension");
  }
  return minibatch_adam(data, arch, init, config,
                        [&](const Vector& x0, Rng&, double weight, const WsnnParams& params, WsnnParams& grads) {
                          return vanilla_sm_loss_and_grad(arch, params, x0, weight, grads);
                        });
}

ScoreFunction vanilla_network_score(const WsnnArchitecture& arch, const WsnnParams& params) {
  return {[arch, params](const Vector& x, double) { return forward(arch, params, vanilla_input(arch, x)); },
          ScoreSource::Learned};
}

Dataset langevin_sample(const ScoreFunction& score, const LangevinConfig& config) {
  if (!(config.step_size > 0.0)) throw Error(ErrorKind::InvalidArgument, "step_size must be > 0");
  if (config.n_samples < 1 || config.dim < 1 || config.n_steps < 0) {
    throw Error(ErrorKind::InvalidArgument, "langevin_sample needs n_samples, dim >= 1");
  }
  const Rng root(config.seed);
  const double h = config.step_size;
  const double noise = std::sqrt(2.0 * h);
  Dataset out;
  out.samples.resize(config.n_samples, config.dim);
  for (long path = 0; path < config.n_samples; ++path) {
    Rng rng = root.split(static_cast<std::uint64_t>(path));
    Vector z = standard_normal(rng, config.dim);
    for (int k = 0; k < config.n_steps; ++k) {
      z += h * score(z, 0.0) + noise * standard_normal(rng, config.dim);
      guard_state(z, config.blowup, path, k);
    }
    out.samples.row(path) = z.transpose();
  }
  return out;
}

}  // namespace wsdiff
