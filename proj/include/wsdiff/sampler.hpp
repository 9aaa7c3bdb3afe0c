#pragma once

// Reverse-time SDE sampling, vanilla (Hyvarinen) score matching and the
// Langevin sampler that goes with it.

#include <cstdint>

#include "wsdiff/densities.hpp"
#include "wsdiff/diffusion.hpp"
#include "wsdiff/score.hpp"
#include "wsdiff/wsnn.hpp"

namespace wsdiff {

enum class TimeGrid { Uniform, Geometric };

struct SamplerConfig {
  int n_steps = 500;
  long n_samples = 1000;
  int dim = 1;
  std::uint64_t seed = 0;
  TimeGrid grid = TimeGrid::Uniform;
  double blowup = 1e6;
};

// Euler-Maruyama for
//   dY = [alpha_{T-s} Y + 2 alpha_{T-s} f(Y, T - s)] ds + sqrt(2 alpha_{T-s}) dB,
// Y_0 ~ N(0, I), over s in [0, t_max - t_min]; returns Y at the end, one row per
// path. Path i uses the stream split(i) of the config seed, so output rows do
// not depend on evaluation order. Throws NonFiniteState when a coordinate
// leaves [-blowup, blowup].
Dataset reverse_sde_sample(const ScoreFunction& score, const DiffusionSchedule& schedule,
                           const SamplerConfig& config);

// Time points T - s_k visited by the reverse sampler (n_steps + 1 entries,
// from t_max down to t_min).
std::vector<double> reverse_time_grid(const DiffusionSchedule& schedule, int n_steps, TimeGrid grid);

// Network input for the time-free score used by vanilla score matching: the
// data vector itself when the input width is D, or (x, 0) when it is D + 1.
Vector vanilla_input(const WsnnArchitecture& arch, const Vector& x);

enum class DivergenceMethod { Exact, FiniteDifference };

// tr(grad f(x)) + 0.5 ||f(x)||^2.
double vanilla_sm_loss(const WsnnArchitecture& arch, const WsnnParams& params, const Vector& x,
                       DivergenceMethod method = DivergenceMethod::Exact);
// tr(grad f(x)): D tangent passes (exact) or central differences with step 1e-4.
double network_divergence(const WsnnArchitecture& arch, const WsnnParams& params, const Vector& x,
                          DivergenceMethod method = DivergenceMethod::Exact);

// Loss plus parameter gradient (scaled by weight, added into grads).
double vanilla_sm_loss_and_grad(const WsnnArchitecture& arch, const WsnnParams& params, const Vector& x,
                                double weight, WsnnParams& grads);

// Adam on the mean vanilla score-matching loss; same batching and seeding as train().
TrainResult train_vanilla_sm(const Dataset& data, const WsnnArchitecture& arch, const WsnnParams& init,
                             const TrainConfig& config);

// Time-free network as a ScoreFunction (t is ignored).
ScoreFunction vanilla_network_score(const WsnnArchitecture& arch, const WsnnParams& params);

struct LangevinConfig {
  double step_size = 0.01;
  int n_steps = 2000;
  long n_samples = 1000;
  int dim = 1;
  std::uint64_t seed = 0;
  double blowup = 1e6;
};

// Z <- Z + h f(Z) + sqrt(2h) z from Z_0 ~ N(0, I); the score is evaluated at t = 0.
Dataset langevin_sample(const ScoreFunction& score, const LangevinConfig& config);

}  // namespace wsdiff
