#include "wsdiff/bench.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "wsdiff/kde.hpp"

namespace wsdiff {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

long parse_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos == v.size()) return x;
  } catch (const std::logic_error&) {
  }
  throw Error(ErrorKind::ParseError, "key '" + key + "': expected an integer, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos == v.size()) return x;
  } catch (const std::logic_error&) {
  }
  throw Error(ErrorKind::ParseError, "key '" + key + "': expected a number, got '" + v + "'");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw Error(ErrorKind::ParseError, "key '" + key + "': expected a boolean, got '" + v + "'");
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream out;
  for (std::size_t i = 0; i < xs.size(); ++i) out << (i ? "," : "") << xs[i];
  return out.str();
}

// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

const std::vector<std::string> kMethods{"diffusion", "kde-g", "kde-u", "vanilla-sm", "analytic"};

}  // namespace

void ExperimentConfig::validate() const {
  if (case_id < 1 || case_id > 3) throw Error(ErrorKind::InvalidArgument, "case must be 1, 2 or 3");
  if (side < 2) throw Error(ErrorKind::InvalidArgument, "K must be >= 2");
  if (components < 1) throw Error(ErrorKind::InvalidArgument, "M must be >= 1");
  if (n_eval < 1) throw Error(ErrorKind::InvalidArgument, "n_eval must be >= 1");
  if (repetitions < 1) throw Error(ErrorKind::InvalidArgument, "repetitions must be >= 1");
  if (n_list.empty()) throw Error(ErrorKind::InvalidArgument, "n_list is empty");
  for (long n : n_list) {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "training sizes must be >= 1");
  }
  for (const auto& m : methods) {
    if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end()) {
      throw Error(ErrorKind::InvalidArgument, "unknown method '" + m + "'");
    }
  }
  if (arch_depth < 2) throw Error(ErrorKind::InvalidArgument, "arch.depth must be >= 2");
  if (arch_widths.empty()) throw Error(ErrorKind::InvalidArgument, "arch.widths is empty");
  if (arch_widths.size() != 1 && static_cast<int>(arch_widths.size()) != arch_depth - 1) {
    throw Error(ErrorKind::InvalidArgument, "arch.widths needs 1 or arch.depth - 1 entries");
  }
}

void apply_config_value(ExperimentConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "case") c.case_id = static_cast<int>(parse_long(key, v));
  else if (key == "K") c.side = static_cast<int>(parse_long(key, v));
  else if (key == "M") c.components = static_cast<int>(parse_long(key, v));
  else if (key == "n_list") {
    c.n_list.clear();
    for (const auto& s : split_list(v)) c.n_list.push_back(parse_long(key, s));
  } else if (key == "n_eval") c.n_eval = parse_long(key, v);
  else if (key == "methods") c.methods = split_list(v);
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_long(key, v));
  else if (key == "repetitions") c.repetitions = static_cast<int>(parse_long(key, v));
  else if (key == "steps") c.steps = parse_long(key, v);
  else if (key == "batch") c.batch = static_cast<int>(parse_long(key, v));
  else if (key == "lr") c.lr = parse_double(key, v);
  else if (key == "T_min") c.t_min = parse_double(key, v);
  else if (key == "T_max") c.t_max = parse_double(key, v);
  else if (key == "em_steps") c.em_steps = static_cast<int>(parse_long(key, v));
  else if (key == "arch.depth") c.arch_depth = static_cast<int>(parse_long(key, v));
  else if (key == "arch.widths") {
    c.arch_widths.clear();
    for (const auto& s : split_list(v)) c.arch_widths.push_back(static_cast<int>(parse_long(key, s)));
  } else if (key == "arch.sigma_features") c.sigma_features = parse_bool(key, v);
  else if (key == "vanilla.lr") c.vanilla_lr = parse_double(key, v);
  else if (key == "langevin.step") c.langevin_step = parse_double(key, v);
  else if (key == "langevin.steps") c.langevin_steps = static_cast<int>(parse_long(key, v));
  else if (key == "mrf.diag") c.mrf_diag = parse_double(key, v);
  else if (key == "mrf.coupling") c.mrf_coupling = parse_double(key, v);
  else if (key == "mse_mc") c.mse_mc = parse_long(key, v);
  else if (key == "timing") c.record_runtime = parse_bool(key, v);
  else throw Error(ErrorKind::ParseError, "unknown config key '" + key + "'");
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": expected key=value");
    }
    apply_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  base.validate();
  return base;
}

void write_config(std::ostream& out, const ExperimentConfig& c) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "case=" << c.case_id << "\nK=" << c.side << "\nM=" << c.components << "\nn_list=" << join(c.n_list)
      << "\nn_eval=" << c.n_eval << "\nmethods=" << join(c.methods) << "\nseed=" << c.seed
      << "\nrepetitions=" << c.repetitions << "\nsteps=" << c.steps << "\nbatch=" << c.batch << "\nlr=" << c.lr
      << "\nT_min=" << c.t_min << "\nT_max=" << c.t_max << "\nem_steps=" << c.em_steps
      << "\narch.depth=" << c.arch_depth << "\narch.widths=" << join(c.arch_widths)
      << "\narch.sigma_features=" << (c.sigma_features ? "true" : "false") << "\nvanilla.lr=" << c.vanilla_lr
      << "\nlangevin.step=" << c.langevin_step
      << "\nlangevin.steps=" << c.langevin_steps << "\nmrf.diag=" << c.mrf_diag
      << "\nmrf.coupling=" << c.mrf_coupling << "\nmse_mc=" << c.mse_mc
      << "\ntiming=" << (c.record_runtime ? "true" : "false") << '\n';
}

Density case_density(const ExperimentConfig& c) {
  switch (c.case_id) {
    case 1: return IsoGaussian{c.dim()};
    case 2: return GridMrfGaussian::make(c.side, c.mrf_diag, c.mrf_coupling);
    case 3: {
      Rng rng(mix64(c.seed ^ 0x6d69787475726573ULL));
      return GaussMixture::random(c.dim(), c.components, rng);
    }
    default: throw Error(ErrorKind::InvalidArgument, "case must be 1, 2 or 3");
  }
}

namespace {

std::vector<int> layer_widths(const ExperimentConfig& c, int in, int out) {
  std::vector<int> widths{in};
  for (int i = 0; i + 1 < c.arch_depth; ++i) {
    widths.push_back(c.arch_widths.size() == 1 ? c.arch_widths[0] : c.arch_widths[static_cast<std::size_t>(i)]);
  }
  widths.push_back(out);
  return widths;
}

TimeFeatures features_of(const ExperimentConfig& c) {
  return c.sigma_features ? TimeFeatures::WithSigma : TimeFeatures::Raw;
}

}  // namespace

WsnnArchitecture score_architecture(const ExperimentConfig& c) {
  return WsnnArchitecture::mlp(layer_widths(c, c.dim() + time_feature_count(features_of(c)), c.dim()));
}

WsnnArchitecture vanilla_architecture(const ExperimentConfig& c) {
  return WsnnArchitecture::mlp(layer_widths(c, c.dim(), c.dim()));
}

DiffusionSchedule case_schedule(const ExperimentConfig& c) {
  return DiffusionSchedule::constant(1.0, c.t_min, c.t_max);
}

Matrix generate_with_method(const std::string& method, const Dataset& train_set, const Density& truth,
                            const ExperimentConfig& c, std::uint64_t cell_seed) {
  const Rng cell(cell_seed);
  const int dim = c.dim();
  TrainConfig tc;
  tc.batch_size = c.batch;
  tc.steps = c.steps;
  tc.adam.learning_rate = c.lr;
  tc.seed = cell.split(2).next_u64();
  tc.time_features = features_of(c);
  const auto schedule = case_schedule(c);

  if (method == "diffusion") {
    const auto arch = score_architecture(c);
    Rng init_rng = cell.split(1);
    const auto fitted = train(train_set, arch, init_params(arch, init_rng), schedule, tc);
    SamplerConfig sc{c.em_steps, c.n_eval, dim, cell.split(3).next_u64()};
    return reverse_sde_sample(network_score(arch, fitted.params, schedule, tc.time_features), schedule, sc)
        .samples;
  }
  if (method == "analytic") {
    const ScoreFunction exact{[&truth, &schedule](const Vector& x, double t) {
                                return analytic_score_t(truth, x, t, schedule);
                              },
                              ScoreSource::Analytic};
    SamplerConfig sc{c.em_steps, c.n_eval, dim, cell.split(3).next_u64()};
    return reverse_sde_sample(exact, schedule, sc).samples;
  }
  if (method == "kde-g" || method == "kde-u") {
    const auto model = fit(train_set, method == "kde-g" ? Kernel::Gaussian : Kernel::Uniform);
    Rng rng = cell.split(3);
    return sample(model, c.n_eval, rng).samples;
  }
  if (method == "vanilla-sm") {
    const auto arch = vanilla_architecture(c);
    Rng init_rng = cell.split(1);
    tc.adam.learning_rate = c.vanilla_lr;
    const auto fitted = train_vanilla_sm(train_set, arch, init_params(arch, init_rng), tc);
    LangevinConfig lc{c.langevin_step, c.langevin_steps, c.n_eval, dim, cell.split(3).next_u64()};
    return langevin_sample(vanilla_network_score(arch, fitted.params), lc).samples;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown method '" + method + "'");
}

BpdReport run_case(const ExperimentConfig& c, const std::function<void(const BpdRow&)>& on_row) {
  c.validate();
  const Density truth = case_density(c);
  const Rng root(c.seed);
  BpdReport report;
  for (long n : c.n_list) {
    for (int rep = 0; rep < c.repetitions; ++rep) {
      Rng data_rng = root.split(1).split(static_cast<std::uint64_t>(n)).split(static_cast<std::uint64_t>(rep));
      const Dataset train_set = sample(truth, n, data_rng);
      for (const auto& method : c.methods) {
        BpdRow row{c.case_id, c.side, c.case_id == 3 ? c.components : 0, method, n, rep,
                   std::nullopt, std::nullopt, "ok"};
        const auto start = std::chrono::steady_clock::now();
        try {
          const std::uint64_t cell_seed = mix64(root.split(2).split(static_cast<std::uint64_t>(n))
                                                    .split(static_cast<std::uint64_t>(rep))
                                                    .split(stable_hash(method))
                                                    .next_u64());
          const Matrix generated = generate_with_method(method, train_set, truth, c, cell_seed);
          const auto score = bpd(truth, generated);
          if (score.infinite) {
            row.status = "InfiniteBpd";
          } else {
            row.bpd = score.bits;
          }
        } catch (const Error& e) {
          row.status = e.name();
        }
        if (c.record_runtime) {
          row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
        report.rows.push_back(row);
        if (on_row) on_row(row);
      }
    }
  }
  return report;
}

void write_report_csv(std::ostream& out, const BpdReport& report) {
  out << "case,K,M,method,n,repetition,bpd,runtime_s,status\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : report.rows) {
    out << r.case_id << ',' << r.side << ',' << r.components << ',' << r.method << ',' << r.n << ','
        << r.repetition << ',';
    if (r.bpd) out << *r.bpd;
    out << ',';
    if (r.runtime_s) out << *r.runtime_s;
    out << ',' << r.status << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "failed writing report CSV");
}

BpdReport read_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "case,K,M,method,n,repetition,bpd,runtime_s,status") {
    throw Error(ErrorKind::ParseError, "unexpected report header");
  }
  BpdReport report;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() == 8 && line.back() == ',') cells.emplace_back();
    if (cells.size() != 9) throw Error(ErrorKind::ParseError, "report row needs 9 cells: " + line);
    BpdRow r;
    r.case_id = static_cast<int>(parse_long("case", cells[0]));
    r.side = static_cast<int>(parse_long("K", cells[1]));
    r.components = static_cast<int>(parse_long("M", cells[2]));
    r.method = cells[3];
    r.n = parse_long("n", cells[4]);
    r.repetition = static_cast<int>(parse_long("repetition", cells[5]));
    if (!cells[6].empty()) r.bpd = parse_double("bpd", cells[6]);
    if (!cells[7].empty()) r.runtime_s = parse_double("runtime_s", cells[7]);
    r.status = trim(cells[8]);
    report.rows.push_back(std::move(r));
  }
  return report;
}

std::vector<ScoreMseRow> score_mse_study(const ExperimentConfig& c) {
  c.validate();
  const Density truth = case_density(c);
  const auto schedule = case_schedule(c);
  const auto arch = score_architecture(c);
  const Rng root(c.seed);
  std::vector<ScoreMseRow> rows;
  for (long n : c.n_list) {
    for (int rep = 0; rep < c.repetitions; ++rep) {
      const Rng cell = root.split(7).split(static_cast<std::uint64_t>(n)).split(static_cast<std::uint64_t>(rep));
      Rng data_rng = cell.split(0);
      const Dataset train_set = sample(truth, n, data_rng);
      Rng init_rng = cell.split(1);
      const WsnnParams init = init_params(arch, init_rng);
      TrainConfig tc;
      tc.batch_size = c.batch;
      tc.steps = c.steps;
      tc.adam.learning_rate = c.lr;
      tc.seed = cell.split(2).next_u64();
      tc.time_features = features_of(c);
      const auto fitted = train(train_set, arch, init, schedule, tc);
      // Same evaluation draws for the untrained and trained networks.
      Rng eval_a = cell.split(3);
      Rng eval_b = cell.split(3);
      const auto before = score_mse(network_score(arch, init, schedule, tc.time_features), truth, schedule, c.mse_mc, eval_a);
      const auto after =
          score_mse(network_score(arch, fitted.params, schedule, tc.time_features), truth, schedule, c.mse_mc, eval_b);
      rows.push_back({n, rep, before.mean, after.mean, after.std_error});
    }
  }
  return rows;
}

void write_score_mse_csv(std::ostream& out, const std::vector<ScoreMseRow>& rows) {
  out << "n,repetition,score_mse_init,score_mse_trained,std_error\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : rows) {
    out << r.n << ',' << r.repetition << ',' << r.initial << ',' << r.trained << ',' << r.trained_std_error << '\n';
  }
}

}  // namespace wsdiff
