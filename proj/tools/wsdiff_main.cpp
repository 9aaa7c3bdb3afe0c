// Command-line front end: data generation, training, sampling, evaluation
// and the benchmark runner.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "wsdiff/bench.hpp"
#include "wsdiff/kde.hpp"
#include "wsdiff/quadrature.hpp"

using namespace wsdiff;

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
  return out;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  if (!path.empty()) {
    auto in = open_in(path);
    cfg = parse_config(in);
  }
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::ParseError, "--set expects key=value, got " + kv);
    apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

DiffusionSchedule schedule_from(double t_min, double t_max) { return DiffusionSchedule::constant(1.0, t_min, t_max); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weight-sharing score networks and diffusion sampling"};
  app.require_subcommand(1);

  // gen-data
  DensitySpec spec;
  long gen_n = 1000;
  std::string gen_out = "data.csv";
  std::string gen_meta;
  auto* gen = app.add_subcommand("gen-data", "Draw a dataset from one of the test densities");
  gen->add_option("--family", spec.family, "iso-gaussian | grid-mrf | gauss-mixture | cosine-bump")
      ->capture_default_str();
  gen->add_option("--dim", spec.dim, "Dimension (iso-gaussian, gauss-mixture, cosine-bump)");
  gen->add_option("--K", spec.side, "Grid side; sets dim = K^2");
  gen->add_option("--M", spec.components, "Mixture components");
  gen->add_option("--diag", spec.diag, "MRF precision diagonal")->capture_default_str();
  gen->add_option("--coupling", spec.coupling, "MRF neighbour coupling")->capture_default_str();
  gen->add_option("--seed", spec.seed)->capture_default_str();
  gen->add_option("-n,--n", gen_n, "Number of samples")->capture_default_str();
  gen->add_option("-o,--out", gen_out, "Dataset CSV")->capture_default_str();
  gen->add_option("--meta", gen_meta, "Density metadata JSON (needed by evaluate)");

  // train
  std::string tr_data;
  std::string tr_out = "model.ckpt";
  std::string tr_trace;
  int tr_depth = 3;
  std::vector<int> tr_widths{64};
  bool tr_sigma = false;
  bool tr_vanilla = false;
  double t_min = 1e-3;
  double t_max = 3.0;
  TrainConfig tc;
  auto* trn = app.add_subcommand("train", "Fit a score network by denoising (or vanilla) score matching");
  trn->add_option("--data", tr_data, "Dataset CSV")->required();
  trn->add_option("-o,--out", tr_out, "Checkpoint path")->capture_default_str();
  trn->add_option("--trace", tr_trace, "Per-epoch loss CSV");
  trn->add_option("--depth", tr_depth, "Number of layers L")->capture_default_str();
  trn->add_option("--widths", tr_widths, "Hidden widths (one value is broadcast)")->delimiter(',');
  trn->add_flag("--sigma-features", tr_sigma, "Append (sigma_t, 1/sigma_t) to the time input");
  trn->add_flag("--vanilla", tr_vanilla, "Vanilla score matching on x alone");
  trn->add_option("--steps", tc.steps)->capture_default_str();
  trn->add_option("--batch", tc.batch_size)->capture_default_str();
  trn->add_option("--lr", tc.adam.learning_rate)->capture_default_str();
  trn->add_option("--seed", tc.seed)->capture_default_str();
  trn->add_option("--T-min", t_min)->capture_default_str();
  trn->add_option("--T-max", t_max)->capture_default_str();
  trn->add_flag("--clip", tc.clip_to_magnitude, "Project parameters into [-M, M] after each step");

  // sample
  std::string sm_ckpt;
  std::string sm_out = "samples.csv";
  SamplerConfig sc;
  bool sm_langevin = false;
  bool sm_geometric = false;
  LangevinConfig lc;
  auto* smp = app.add_subcommand("sample", "Generate samples from a trained checkpoint");
  smp->add_option("--checkpoint", sm_ckpt)->required();
  smp->add_option("-o,--out", sm_out)->capture_default_str();
  smp->add_option("-n,--n", sc.n_samples)->capture_default_str();
  smp->add_option("--steps", sc.n_steps, "Reverse-SDE steps")->capture_default_str();
  smp->add_option("--seed", sc.seed)->capture_default_str();
  smp->add_option("--T-min", t_min)->capture_default_str();
  smp->add_option("--T-max", t_max)->capture_default_str();
  smp->add_flag("--geometric", sm_geometric, "Geometric rather than uniform time grid");
  smp->add_flag("--langevin", sm_langevin, "Langevin dynamics with a vanilla-SM network");
  smp->add_option("--langevin-step", lc.step_size)->capture_default_str();
  smp->add_option("--langevin-steps", lc.n_steps)->capture_default_str();

  // evaluate
  std::string ev_meta;
  std::string ev_samples;
  auto* ev = app.add_subcommand("evaluate", "Bits per dimension of samples under the true density");
  ev->add_option("--meta", ev_meta, "Density metadata JSON")->required();
  ev->add_option("--samples", ev_samples, "Samples CSV")->required();

  // run-case / score-mse
  std::string cfg_path;
  std::vector<std::string> overrides;
  std::string rc_out = "report.csv";
  std::string rc_plots;
  auto* rc = app.add_subcommand("run-case", "Benchmark BPD over (n, method, repetition)");
  rc->add_option("--config", cfg_path, "key=value config file");
  rc->add_option("--set", overrides, "Override one config key (key=value)");
  rc->add_option("-o,--out", rc_out)->capture_default_str();
  rc->add_option("--plots", rc_plots, "Directory for SVG plots and a copy of the CSV");

  std::string mse_out = "score_mse.csv";
  auto* mse = app.add_subcommand("score-mse", "Score MSE of trained networks against the exact score");
  mse->add_option("--config", cfg_path, "key=value config file");
  mse->add_option("--set", overrides, "Override one config key (key=value)");
  mse->add_option("-o,--out", mse_out)->capture_default_str();

  // plot
  std::string pl_report;
  std::string pl_dir = "plots";
  auto* pl = app.add_subcommand("plot", "Render SVG plots from a report CSV");
  pl->add_option("--report", pl_report)->required();
  pl->add_option("-o,--out-dir", pl_dir)->capture_default_str();

  // quad-study
  int qs_dim = 2;
  std::vector<double> qs_x;
  double qs_mu = 0.9;
  double qs_sigma = 0.05;
  std::vector<int> qs_points{8, 16, 32, 64};
  int qs_grid = 400;
  std::string qs_out = "convergence.csv";
  TensorQuadratureConfig qc;
  auto* qs = app.add_subcommand("quad-study", "pt_quadrature error against a Riemann oracle on the cosine bump");
  qs->add_option("--dim", qs_dim)->capture_default_str();
  qs->add_option("--x", qs_x, "Evaluation point (default origin)")->delimiter(',');
  qs->add_option("--mu", qs_mu)->capture_default_str();
  qs->add_option("--sigma", qs_sigma)->capture_default_str();
  qs->add_option("--points", qs_points, "Per-axis node counts")->delimiter(',');
  qs->add_option("--grid", qs_grid, "Riemann oracle cells per axis")->capture_default_str();
  qs->add_option("--block-order", qc.block_order)->capture_default_str();
  qs->add_option("--tau-tail", qc.tau_tail)->capture_default_str();
  qs->add_option("--tau-bd", qc.tau_bd)->capture_default_str();
  qs->add_option("-o,--out", qs_out)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      if (spec.side > 0) spec.dim = spec.side * spec.side;
      const Density density = build_density(spec);
      Rng rng = Rng(spec.seed).split(1);
      const Dataset data = sample(density, gen_n, rng);
      auto out = open_out(gen_out);
      write_dataset_csv(out, data.samples);
      if (!gen_meta.empty()) {
        auto meta = open_out(gen_meta);
        write_density_metadata(meta, describe_density(density, spec.seed));
      }
    } else if (*trn) {
      auto in = open_in(tr_data);
      Dataset data;
      data.samples = read_dataset_csv(in);
      const int dim = static_cast<int>(data.dim());
      tc.time_features = tr_sigma ? TimeFeatures::WithSigma : TimeFeatures::Raw;
      std::vector<int> widths{tr_vanilla ? dim : dim + time_feature_count(tc.time_features)};
      if (tr_widths.size() != 1 && static_cast<int>(tr_widths.size()) != tr_depth - 1) {
        throw Error(ErrorKind::InvalidArgument, "--widths needs 1 or depth - 1 values");
      }
      for (int i = 0; i + 1 < tr_depth; ++i) {
        widths.push_back(tr_widths.size() == 1 ? tr_widths[0] : tr_widths[static_cast<std::size_t>(i)]);
      }
      widths.push_back(dim);
      const auto arch = WsnnArchitecture::mlp(widths);
      Rng init_rng = Rng(tc.seed).split(1);
      const auto init = init_params(arch, init_rng);
      const auto result = tr_vanilla ? train_vanilla_sm(data, arch, init, tc)
                                     : train(data, arch, init, schedule_from(t_min, t_max), tc);
      auto out = open_out(tr_out);
      save_checkpoint(out, arch, result.params);
      if (!tr_trace.empty()) {
        auto trace = open_out(tr_trace);
        write_loss_trace(trace, result.trace);
      }
      if (!result.trace.empty()) std::cerr << "final epoch loss " << result.trace.back().mean_loss << '\n';
    } else if (*smp) {
      auto in = open_in(sm_ckpt);
      WsnnArchitecture arch;
      WsnnParams params;
      load_checkpoint(in, arch, params);
      Dataset generated;
      if (sm_langevin) {
        lc.n_samples = sc.n_samples;
        lc.dim = arch.output_width();
        lc.seed = sc.seed;
        generated = langevin_sample(vanilla_network_score(arch, params), lc);
      } else {
        const auto schedule = schedule_from(t_min, t_max);
        sc.dim = arch.output_width();
        sc.grid = sm_geometric ? TimeGrid::Geometric : TimeGrid::Uniform;
        generated = reverse_sde_sample(network_score(arch, params, schedule, infer_time_features(arch)),
                                       schedule, sc);
      }
      auto out = open_out(sm_out);
      write_dataset_csv(out, generated.samples);
    } else if (*ev) {
      auto meta = open_in(ev_meta);
      const Density density = build_density(read_density_metadata(meta));
      auto in = open_in(ev_samples);
      const auto result = bpd(density, read_dataset_csv(in));
      std::cout.precision(std::numeric_limits<double>::max_digits10);
      if (result.infinite) {
        std::cout << "bpd inf\n";
      } else {
        std::cout << "bpd " << result.bits << '\n';
      }
    } else if (*rc) {
      const auto cfg = load_config(cfg_path, overrides);
      auto out = open_out(rc_out);
      write_report_csv(out, BpdReport{});
      out.flush();
      // Rows are appended as they finish so an abort keeps earlier cells.
      const auto report = run_case(cfg, [&](const BpdRow& row) {
        BpdReport one{{row}};
        std::ostringstream line;
        write_report_csv(line, one);
        const auto text = line.str();
        out << text.substr(text.find('\n') + 1);
        out.flush();
        std::cerr << row.method << " n=" << row.n << " rep=" << row.repetition << ' '
                  << (row.bpd ? std::to_string(*row.bpd) : row.status) << '\n';
      });
      if (!rc_plots.empty()) {
        for (const auto& p : emit_plots(report, rc_plots)) std::cerr << "wrote " << p.string() << '\n';
      }
    } else if (*mse) {
      const auto cfg = load_config(cfg_path, overrides);
      auto out = open_out(mse_out);
      write_score_mse_csv(out, score_mse_study(cfg));
    } else if (*pl) {
      auto in = open_in(pl_report);
      for (const auto& p : emit_plots(read_report_csv(in), pl_dir)) std::cout << p.string() << '\n';
    } else if (*qs) {
      const auto bump = FactorDensity::cosine_bump(qs_dim);
      Vector x = Vector::Zero(qs_dim);
      if (!qs_x.empty()) {
        if (static_cast<int>(qs_x.size()) != qs_dim) throw Error(ErrorKind::DimensionMismatch, "--x needs dim values");
        x = Eigen::Map<const Vector>(qs_x.data(), qs_dim);
      }
      auto out = open_out(qs_out);
      write_convergence_csv(out, pt_convergence_study(bump, x, qs_mu, qs_sigma, qs_points, qc, qs_grid));
    }
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  return 0;
}
