#pragma once

// Forward diffusion, denoising score matching and its ERM training loop.

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "wsdiff/densities.hpp"
#include "wsdiff/numerics.hpp"
#include "wsdiff/schedule.hpp"
#include "wsdiff/score.hpp"
#include "wsdiff/wsnn.hpp"

namespace wsdiff {

// x_t = mu_t x0 + sigma_t z.
Vector forward_sample(const DiffusionSchedule& schedule, const Vector& x0, double t, Rng& rng);

// grad_{x_t} log p_t(x_t | x0) = -(x_t - mu_t x0) / sigma_t^2. Throws SingularTime at sigma_t = 0.
Vector conditional_score(const DiffusionSchedule& schedule, const Vector& x0, const Vector& xt, double t);

// How time enters the score network: concat(x, t), optionally followed by
// (sigma_t, 1 / sigma_t).
enum class TimeFeatures { Raw, WithSigma };

int time_feature_count(TimeFeatures features);
Vector network_input(const Vector& x, double t, const DiffusionSchedule& schedule, TimeFeatures features);
// Infers the encoding from an architecture whose output width is the data dimension.
TimeFeatures infer_time_features(const WsnnArchitecture& arch);

// Network f(x, t) as a ScoreFunction (captures copies of arch and params).
ScoreFunction network_score(const WsnnArchitecture& arch, const WsnnParams& params,
                            const DiffusionSchedule& schedule, TimeFeatures features = TimeFeatures::Raw);

// || f(x_t, t) + (x_t - mu_t x0) / sigma_t^2 ||^2.
double dsm_loss(const ScoreFunction& score, const DiffusionSchedule& schedule, const Vector& x0,
                const Vector& xt, double t);
double dsm_loss(const WsnnArchitecture& arch, const WsnnParams& params, const DiffusionSchedule& schedule,
                const Vector& x0, const Vector& xt, double t, TimeFeatures features = TimeFeatures::Raw);

// Loss and parameter gradient for one (x0, x_t, t) triple; gradients are added
// into `grads` scaled by `weight`.
double dsm_loss_and_grad(const WsnnArchitecture& arch, const WsnnParams& params,
                         const DiffusionSchedule& schedule, const Vector& x0, const Vector& xt, double t,
                         TimeFeatures features, double weight, WsnnParams& grads);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(const WsnnArchitecture& arch, AdamConfig config);
  void step(WsnnParams& params, const WsnnParams& grads);
  long steps_taken() const noexcept { return t_; }

 private:
  AdamConfig config_;
  WsnnParams m_;
  WsnnParams v_;
  long t_ = 0;
};

struct TrainConfig {
  int batch_size = 128;
  long steps = 2000;
  AdamConfig adam;
  std::uint64_t seed = 0;
  bool clip_to_magnitude = false;
  TimeFeatures time_features = TimeFeatures::Raw;
};

struct TraceRow {
  long epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> score_mse;
  double wall_time_s = 0.0;
};

struct TrainResult {
  WsnnParams params;
  std::vector<TraceRow> trace;
};

// Per-element loss callback: returns the element's loss and adds
// weight * d(loss)/d(params) into grads. rng is the element's own stream.
using ElementLoss = std::function<double(const Vector& x0, Rng& rng, double weight,
                                         const WsnnParams& params, WsnnParams& grads)>;

// Shared minibatch Adam loop behind train() and train_vanilla_sm().
TrainResult minibatch_adam(const Dataset& data, const WsnnArchitecture& arch, const WsnnParams& init,
                           const TrainConfig& config, const ElementLoss& element_loss);

// Adam on the mean augmented DSM loss. Each step draws a minibatch, an
// independent t ~ U[t_min, t_max] per element and x_t from the forward
// process. Each epoch reshuffles the rows and takes floor(n / batch) disjoint
// minibatches; the remainder is skipped. A full batch (batch >= n) visits rows
// in lexicographic order, so the result does not depend on row order.
TrainResult train(const Dataset& data, const WsnnArchitecture& arch, const WsnnParams& init,
                  const DiffusionSchedule& schedule, const TrainConfig& config);

// Monte Carlo estimate of
//   int_{t_min}^{t_max} E || f(X_t, t) - grad log p_t(X_t) ||^2 dt
// as the mean of (t_max - t_min) || f - grad log p_t ||^2 over draws of
// (t, x0, x_t). Throws NoAnalyticScore for densities without a closed form.
MeanAndError score_mse(const ScoreFunction& score, const Density& density,
                       const DiffusionSchedule& schedule, long n_mc, Rng& rng);

// Columns epoch,mean_loss,score_mse,wall_time_s (score_mse empty when absent).
void write_loss_trace(std::ostream& out, const std::vector<TraceRow>& trace);

}  // namespace wsdiff
