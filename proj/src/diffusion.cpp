#include "wsdiff/diffusion.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

namespace wsdiff {

// ---------------------------------------------------------------------------
// Schedule

DiffusionSchedule DiffusionSchedule::constant(double alpha, double t_min, double t_max) {
  DiffusionSchedule s;
  s.constant_rate_ = alpha;
  s.tau_lower_ = alpha;
  s.tau_upper_ = alpha;
  s.t_min_ = t_min;
  s.t_max_ = t_max;
  s.validate();
  return s;
}

DiffusionSchedule DiffusionSchedule::custom(Rate alpha, double tau_lower, double tau_upper, double t_min,
                                            double t_max) {
  if (!alpha) throw Error(ErrorKind::InvalidArgument, "empty rate function");
  DiffusionSchedule s;
  s.rate_ = std::move(alpha);
  s.tau_lower_ = tau_lower;
  s.tau_upper_ = tau_upper;
  s.t_min_ = t_min;
  s.t_max_ = t_max;
  s.validate();
  return s;
}

void DiffusionSchedule::validate() const {
  if (!(tau_lower_ > 0.0) || !(tau_upper_ >= tau_lower_)) {
    throw Error(ErrorKind::InvalidArgument, "need 0 < tau_lower <= tau_upper");
  }
  if (!(t_min_ > 0.0) || !(t_max_ > t_min_)) {
    throw Error(ErrorKind::InvalidArgument, "need 0 < t_min < t_max");
  }
}

DiffusionSchedule DiffusionSchedule::with_window(double t_min, double t_max) const {
  DiffusionSchedule s = *this;
  s.t_min_ = t_min;
  s.t_max_ = t_max;
  s.validate();
  return s;
}

double DiffusionSchedule::alpha(double t) const { return rate_ ? rate_(t) : constant_rate_; }

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
               double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

}  // namespace

double DiffusionSchedule::integrated_rate(double t) const {
  if (t < 0.0) throw Error(ErrorKind::NegativeTime, "t = " + std::to_string(t));
  if (!rate_) return constant_rate_ * t;
  if (t == 0.0) return 0.0;
  const double fa = rate_(0.0);
  const double fm = rate_(0.5 * t);
  const double fb = rate_(t);
  return simpson(rate_, 0.0, t, fa, fm, fb, t / 6.0 * (fa + 4.0 * fm + fb), 1e-10, 40);
}

MuSigma mu_sigma(const DiffusionSchedule& schedule, double t) {
  const double integral = schedule.integrated_rate(t);
  return {std::exp(-integral), std::sqrt(-std::expm1(-2.0 * integral))};
}

// ---------------------------------------------------------------------------
// Forward process and losses

Vector forward_sample(const DiffusionSchedule& schedule, const Vector& x0, double t, Rng& rng) {
  const auto [mu, sigma] = mu_sigma(schedule, t);
  if (sigma == 0.0) return x0;
  return mu * x0 + sigma * standard_normal(rng, x0.size());
}

Vector conditional_score(const DiffusionSchedule& schedule, const Vector& x0, const Vector& xt, double t) {
  if (x0.size() != xt.size()) throw Error(ErrorKind::DimensionMismatch, "x0 vs x_t");
  const auto [mu, sigma] = mu_sigma(schedule, t);
  if (!(sigma > 0.0)) throw Error(ErrorKind::SingularTime, "sigma_t = 0 at t = " + std::to_string(t));
  return -(xt - mu * x0) / (sigma * sigma);
}

int time_feature_count(TimeFeatures features) { return features == TimeFeatures::Raw ? 1 : 3; }

Vector network_input(const Vector& x, double t, const DiffusionSchedule& schedule, TimeFeatures features) {
  Vector in(x.size() + time_feature_count(features));
  in.head(x.size()) = x;
  in[x.size()] = t;
  if (features == TimeFeatures::WithSigma) {
    const double sigma = mu_sigma(schedule, t).sigma;
    if (!(sigma > 0.0)) throw Error(ErrorKind::SingularTime, "sigma_t = 0");
    in[x.size() + 1] = sigma;
    in[x.size() + 2] = 1.0 / sigma;
  }
  return in;
}

TimeFeatures infer_time_features(const WsnnArchitecture& arch) {
  const int extra = arch.input_width() - arch.output_width();
  if (extra == 1) return TimeFeatures::Raw;
  if (extra == 3) return TimeFeatures::WithSigma;
  throw Error(ErrorKind::DimensionMismatch, "network input must be D + 1 or D + 3 wide");
}

ScoreFunction network_score(const WsnnArchitecture& arch, const WsnnParams& params,
                            const DiffusionSchedule& schedule, TimeFeatures features) {
  return {[arch, params, schedule, features](const Vector& x, double t) {
            return forward(arch, params, network_input(x, t, schedule, features));
          },
          ScoreSource::Learned};
}

double dsm_loss(const ScoreFunction& score, const DiffusionSchedule& schedule, const Vector& x0,
                const Vector& xt, double t) {
  return (score(xt, t) - conditional_score(schedule, x0, xt, t)).squaredNorm();
}

double dsm_loss(const WsnnArchitecture& arch, const WsnnParams& params, const DiffusionSchedule& schedule,
                const Vector& x0, const Vector& xt, double t, TimeFeatures features) {
  const Vector target = conditional_score(schedule, x0, xt, t);
  return (forward(arch, params, network_input(xt, t, schedule, features)) - target).squaredNorm();
}

double dsm_loss_and_grad(const WsnnArchitecture& arch, const WsnnParams& params,
                         const DiffusionSchedule& schedule, const Vector& x0, const Vector& xt, double t,
                         TimeFeatures features, double weight, WsnnParams& grads) {
  const Vector target = conditional_score(schedule, x0, xt, t);
  const LayerTrace trace = forward_trace(arch, params, network_input(xt, t, schedule, features));
  const Vector residual = trace.output - target;
  accumulate_backward(arch, params, trace, 2.0 * weight * residual, grads, nullptr, true);
  return residual.squaredNorm();
}

// ---------------------------------------------------------------------------
// Optimizer

Adam::Adam(const WsnnArchitecture& arch, AdamConfig config)
    : config_(config), m_(zero_params(arch)), v_(zero_params(arch)) {
  if (!(config.learning_rate >= 0.0)) throw Error(ErrorKind::InvalidArgument, "learning rate must be >= 0");
}

void Adam::step(WsnnParams& params, const WsnnParams& grads) {
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate;
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config_.epsilon);
  };
  for (std::size_t i = 0; i < params.layers(); ++i) {
    update(params.weights[i], grads.weights[i], m_.weights[i], v_.weights[i]);
    update(params.biases[i], grads.biases[i], m_.biases[i], v_.biases[i]);
  }
}

// ---------------------------------------------------------------------------
// Training

namespace {

std::vector<Eigen::Index> lexicographic_order(const Matrix& x) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (x(a, j) != x(b, j)) return x(a, j) < x(b, j);
    }
    return false;
  });
  return order;
}

}  // namespace

TrainResult minibatch_adam(const Dataset& data, const WsnnArchitecture& arch, const WsnnParams& init,
                           const TrainConfig& config, const ElementLoss& element_loss) {
  if (data.size() < 1) throw Error(ErrorKind::EmptyDataset, "training set is empty");
  arch.validate();
  if (config.batch_size < 1) throw Error(ErrorKind::InvalidArgument, "batch_size must be >= 1");
  if (!(config.adam.learning_rate >= 0.0)) throw Error(ErrorKind::InvalidArgument, "learning rate");

  const auto start = std::chrono::steady_clock::now();
  const Eigen::Index n = data.size();
  const bool full_batch = config.batch_size >= n;
  const Eigen::Index batch = full_batch ? n : config.batch_size;
  // A trailing partial batch is dropped, so an epoch is floor(n / batch) steps.
  const long steps_per_epoch = static_cast<long>(n / batch);

  TrainResult result{init, {}};
  Adam adam(arch, config.adam);
  const Rng root(config.seed);
  std::vector<Eigen::Index> order =
      full_batch ? lexicographic_order(data.samples) : std::vector<Eigen::Index>(static_cast<std::size_t>(n));
  if (!full_batch) std::iota(order.begin(), order.end(), Eigen::Index{0});

  double epoch_loss = 0.0;
  long epoch_batches = 0;
  long epoch = 0;
  Eigen::Index cursor = n;  // forces a shuffle before the first batch
  for (long step = 0; step < config.steps; ++step) {
    Rng step_rng = root.split(static_cast<std::uint64_t>(step));
    if (full_batch) {
      cursor = 0;
    } else if (cursor + batch > n) {
      // Fisher-Yates with the epoch's own stream.
      Rng shuffle_rng = root.split(0x5eed000000000000ULL + static_cast<std::uint64_t>(step));
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      for (Eigen::Index i = n - 1; i > 0; --i) {
        const auto j = static_cast<Eigen::Index>(shuffle_rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      }
      cursor = 0;
    }

    WsnnParams grads = zero_params(arch);
    double batch_loss = 0.0;
    const double weight = 1.0 / static_cast<double>(batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
      Rng elem_rng = step_rng.split(static_cast<std::uint64_t>(b));
      const Vector x0 = data.samples.row(order[static_cast<std::size_t>(cursor + b)]).transpose();
      batch_loss += element_loss(x0, elem_rng, weight, result.params, grads);
    }
    cursor += batch;
    adam.step(result.params, grads);
    if (config.clip_to_magnitude) result.params = project_params(std::move(result.params), arch.magnitude);

    epoch_loss += batch_loss * weight;
    ++epoch_batches;
    if (epoch_batches == steps_per_epoch || step + 1 == config.steps) {
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.trace.push_back({epoch, epoch_loss / static_cast<double>(epoch_batches), std::nullopt, elapsed});
      ++epoch;
      epoch_loss = 0.0;
      epoch_batches = 0;
    }
  }
  return result;
}

TrainResult train(const Dataset& data, const WsnnArchitecture& arch, const WsnnParams& init,
                  const DiffusionSchedule& schedule, const TrainConfig& config) {
  if (data.size() < 1) throw Error(ErrorKind::EmptyDataset, "training set is empty");
  if (arch.output_width() != data.dim() ||
      arch.input_width() != data.dim() + time_feature_count(config.time_features)) {
    throw Error(ErrorKind::DimensionMismatch, "network widths do not match data dimension");
  }
  const double t_lo = schedule.t_min();
  const double span = schedule.t_max() - schedule.t_min();
  return minibatch_adam(
      data, arch, init, config,
      [&](const Vector& x0, Rng& rng, double weight, const WsnnParams& params, WsnnParams& grads) {
        const double t = t_lo + span * rng.uniform();
        const Vector xt = forward_sample(schedule, x0, t, rng);
        return dsm_loss_and_grad(arch, params, schedule, x0, xt, t, config.time_features, weight, grads);
      });
}

MeanAndError score_mse(const ScoreFunction& score, const Density& density,
                       const DiffusionSchedule& schedule, long n_mc, Rng& rng) {
  if (!has_analytic_score(density)) {
    throw Error(ErrorKind::NoAnalyticScore, family_name(density) + " has no closed-form score");
  }
  if (n_mc < 1) throw Error(ErrorKind::InvalidSize, "score_mse needs n_mc >= 1");
  const double span = schedule.t_max() - schedule.t_min();
  const Dataset x0s = sample(density, n_mc, rng);
  std::vector<double> values(static_cast<std::size_t>(n_mc));
  for (long i = 0; i < n_mc; ++i) {
    const double t = schedule.t_min() + span * rng.uniform();
    const Vector xt = forward_sample(schedule, x0s.samples.row(i).transpose(), t, rng);
    values[static_cast<std::size_t>(i)] =
        span * (score(xt, t) - analytic_score_t(density, xt, t, schedule)).squaredNorm();
  }
  return mean_and_error(values);
}

void write_loss_trace(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "epoch,mean_loss,score_mse,wall_time_s\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& row : trace) {
    out << row.epoch << ',' << row.mean_loss << ',';
    if (row.score_mse) out << *row.score_mse;
    out << ',' << row.wall_time_s << '\n';
  }
}

}  // namespace wsdiff
