#pragma once

// Desk-scale benchmark: simulate data from one of the three test families,
// fit each method, draw n_eval samples from it and score them by bits per
// dimension under the true density.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wsdiff/densities.hpp"
#include "wsdiff/diffusion.hpp"
#include "wsdiff/sampler.hpp"

namespace wsdiff {

struct ExperimentConfig {
  int case_id = 1;  // 1 iso Gaussian, 2 grid MRF, 3 Gaussian mixture; D = K^2
  int side = 3;     // K
  int components = 3;  // M (case 3)
  std::vector<long> n_list{100, 500, 2000};
  long n_eval = 3000;
  std::vector<std::string> methods{"diffusion", "kde-g", "kde-u"};
  std::uint64_t seed = 0;
  int repetitions = 3;

  // diffusion / vanilla-sm training
  long steps = 2000;
  int batch = 128;
  double lr = 1e-3;
  double t_min = 1e-3;
  double t_max = 3.0;
  int em_steps = 500;
  int arch_depth = 3;               // L
  std::vector<int> arch_widths{64};  // hidden widths; one value is broadcast
  bool sigma_features = false;

  // vanilla-sm training rate and Langevin sampling
  double vanilla_lr = 1e-4;
  double langevin_step = 0.01;
  int langevin_steps = 2000;

  double mrf_diag = 1.0;
  double mrf_coupling = -0.2;

  long mse_mc = 20000;        // Monte Carlo draws for score_mse_study
  bool record_runtime = false;  // wall-clock column; off keeps reports byte-stable

  int dim() const { return side * side; }
  void validate() const;
};

// Flat key=value lines ('#' comments). Keys: case, K, M, n_list, n_eval,
// methods, seed, repetitions, steps, batch, lr, T_min, T_max, em_steps,
// arch.depth, arch.widths, arch.sigma_features, vanilla.lr, langevin.step,
// langevin.steps, mrf.diag, mrf.coupling, mse_mc, timing.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
void apply_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);
void write_config(std::ostream& out, const ExperimentConfig& config);

Density case_density(const ExperimentConfig& config);
WsnnArchitecture score_architecture(const ExperimentConfig& config);
// Time-free network for vanilla score matching (input width D).
WsnnArchitecture vanilla_architecture(const ExperimentConfig& config);
DiffusionSchedule case_schedule(const ExperimentConfig& config);

struct BpdRow {
  int case_id = 1;
  int side = 0;
  int components = 0;
  std::string method;
  long n = 0;
  int repetition = 0;
  std::optional<double> bpd;
  std::optional<double> runtime_s;
  std::string status = "ok";

  bool operator==(const BpdRow&) const = default;
};

struct BpdReport {
  std::vector<BpdRow> rows;
  bool operator==(const BpdReport&) const = default;
};

// Columns case,K,M,method,n,repetition,bpd,runtime_s,status. Empty cells
// stand for absent values; reals use round-trip precision.
void write_report_csv(std::ostream& out, const BpdReport& report);
BpdReport read_report_csv(std::istream& in);

// Fits one method on `train` and returns n_eval generated samples.
Matrix generate_with_method(const std::string& method, const Dataset& train, const Density& truth,
                            const ExperimentConfig& config, std::uint64_t cell_seed);

// Every (n, method, repetition) cell in config order. A cell that raises a
// library error becomes a row whose status is the error name. on_row, when
// set, sees each row as soon as it is finished.
BpdReport run_case(const ExperimentConfig& config,
                   const std::function<void(const BpdRow&)>& on_row = nullptr);

// One SVG per (case, K, M) plus report.csv; returns the written paths.
// Throws InvalidArgument on an empty report and IoError on write failure.
std::vector<std::filesystem::path> emit_plots(const BpdReport& report, const std::filesystem::path& out_dir);
std::string render_svg(const std::vector<BpdRow>& rows, const std::string& title);

struct ScoreMseRow {
  long n = 0;
  int repetition = 0;
  double initial = 0.0;
  double trained = 0.0;
  double trained_std_error = 0.0;
};

std::vector<ScoreMseRow> score_mse_study(const ExperimentConfig& config);
// Columns n,repetition,score_mse_init,score_mse_trained,std_error.
void write_score_mse_csv(std::ostream& out, const std::vector<ScoreMseRow>& rows);

}  // namespace wsdiff
