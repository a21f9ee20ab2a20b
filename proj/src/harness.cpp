#include "cesbl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace cesbl {

void validate(const SystemConfig& cfg) {
  if (cfg.M < 1 || cfg.N_p < 1 || cfg.L < 1)
    throw config_error("system: M, N_p, L must be positive");
  if (cfg.t_m < 0) throw config_error("system: t_m must be >= 0");
  if (cfg.K < 1) throw config_error("system: K must be >= 1");
  if (static_cast<long>(cfg.K) >
      static_cast<long>(cfg.N_p) * (cfg.t_m + 1))
    throw config_error("system: K exceeds N_p * (t_m + 1) identities");
  if (std::isnan(cfg.snr_db) || (std::isinf(cfg.snr_db) && cfg.snr_db < 0))
    throw config_error("system: snr_db must be finite or +inf");
  if (cfg.sigma2_surrogate <= 0.0)
    throw config_error("system: sigma2_surrogate must be positive");
  ChannelParams p = cfg.channel;
  p.M = cfg.M;
  validate(p);
  validate(cfg.solver);
  DetectorConfig d = cfg.detector;
  d.theta1 = effective_theta1(cfg);
  validate(d);
}

double effective_theta1(const SystemConfig& cfg) {
  return cfg.theta1_auto ? theta1_for_snr(cfg.snr_db) : cfg.detector.theta1;
}

const char* solver_name(SolverId id) {
  return id == SolverId::ce_sbl ? "ce_sbl" : "m_sbl";
}

SolverId solver_from_name(const std::string& name) {
  if (name == "ce_sbl") return SolverId::ce_sbl;
  if (name == "m_sbl") return SolverId::m_sbl;
  throw config_error("unknown solver '" + name + "'");
}

TrialArtifacts run_trial_verbose(const SystemConfig& cfg, SolverId solver,
                                 std::uint64_t trial_seed) {
  validate(cfg);
  ChannelParams params = cfg.channel;
  params.M = cfg.M;
  const PilotPool pool = generate_pilot_pool(cfg.L, cfg.N_p, cfg.pool_seed);
  const ExtendedPilotMatrix ext = build_extended_matrix(pool, cfg.t_m);
  Rng rng(trial_seed);
  std::vector<UserRealization> users =
      sample_actives(cfg.K, params, cfg.N_p, cfg.t_m, rng);

  TrialArtifacts art;
  art.truth = assemble_ground_truth(std::move(users), ext, cfg.M);
  art.meas = synthesize_received(ext, art.truth, cfg.snr_db, rng);
  const RealSystem sys = realify(ext.matrix, art.meas.Y_hat);

  SolverConfig scfg = cfg.solver;
  // solver noise parameter is the stacked real per-component variance
  scfg.sigma2 = std::isinf(cfg.snr_db) ? cfg.sigma2_surrogate
                                       : art.meas.sigma2 / 2.0;
  art.sol = solver == SolverId::ce_sbl ? ce_sbl(sys, scfg) : m_sbl(sys, scfg);

  const MatC X_est = complex_from_stacked(art.sol.X);
  DetectorConfig dcfg = cfg.detector;
  dcfg.theta1 = effective_theta1(cfg);
  const MatC Psi = dft_transform_matrix(cfg.M);
  art.det = run_detector(X_est, cfg.t_m, dcfg, Psi);
  art.outcome.score =
      match_and_score(art.truth, X_est, art.det, dcfg, Psi, cfg.t_m);
  art.outcome.iterations = art.sol.iterations;
  art.outcome.converged = art.sol.converged;
  return art;
}

TrialOutcome run_trial(const SystemConfig& cfg, SolverId solver,
                       std::uint64_t trial_seed) {
  return run_trial_verbose(cfg, solver, trial_seed).outcome;
}

const char* sweep_name(SweepParam p) {
  switch (p) {
    case SweepParam::K: return "K";
    case SweepParam::L: return "L";
    case SweepParam::snr_db: return "snr_db";
    case SweepParam::t_m: return "t_m";
  }
  return "?";
}

SweepParam sweep_from_name(const std::string& name) {
  if (name == "K") return SweepParam::K;
  if (name == "L") return SweepParam::L;
  if (name == "snr_db") return SweepParam::snr_db;
  if (name == "t_m") return SweepParam::t_m;
  throw config_error("unknown sweep parameter '" + name + "'");
}

namespace {

int integral_value(SweepParam p, double value) {
  if (!std::isfinite(value) || value != std::nearbyint(value) ||
      std::fabs(value) > 1e9)
    throw config_error(std::string("sweep value for ") + sweep_name(p) +
                       " must be a small integer");
  return static_cast<int>(value);
}

}  // namespace

SystemConfig apply_sweep_value(SystemConfig cfg, SweepParam p, double value) {
  switch (p) {
    case SweepParam::K: cfg.K = integral_value(p, value); break;
    case SweepParam::L: cfg.L = integral_value(p, value); break;
    case SweepParam::snr_db:
      if (std::isnan(value)) throw config_error("sweep value for snr_db is nan");
      cfg.snr_db = value;
      break;
    case SweepParam::t_m: cfg.t_m = integral_value(p, value); break;
  }
  return cfg;
}

void validate(const ExperimentSpec& spec) {
  if (spec.trials < 1) throw config_error("experiment: trials must be >= 1");
  if (spec.values.empty()) throw config_error("experiment: no sweep values");
  if (spec.solvers.empty()) throw config_error("experiment: no solvers");
  for (std::size_t i = 0; i + 1 < spec.solvers.size(); ++i)
    for (std::size_t j = i + 1; j < spec.solvers.size(); ++j)
      if (spec.solvers[i] == spec.solvers[j])
        throw config_error("experiment: duplicate solver");
  for (double v : spec.values)
    validate(apply_sweep_value(spec.base, spec.sweep, v));
}

namespace {

struct Stats {
  double mean = 0.0, se = 0.0;
};

Stats mean_se(const std::vector<double>& xs) {
  Stats s;
  const std::size_t n = xs.size();
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.se = std::sqrt(ss / (static_cast<double>(n) - 1.0) /
                     static_cast<double>(n));
  }
  return s;
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentSpec& spec, int jobs,
                                std::ostream* csv_out) {
  validate(spec);
  if (jobs < 1) jobs = 1;
  std::vector<SweepRow> rows;
  if (csv_out) {
    (*csv_out) << kCsvHeader << '\n';
    csv_out->flush();
  }
  const int T = spec.trials;
  const std::size_t S = spec.solvers.size();
  for (std::size_t p = 0; p < spec.values.size(); ++p) {
    SystemConfig cfg = apply_sweep_value(spec.base, spec.sweep, spec.values[p]);
    cfg.pool_seed = derive_seed(spec.seed, "pilot", p, 0);
    std::vector<std::uint64_t> tseed(T);
    for (int t = 0; t < T; ++t) tseed[t] = derive_seed(spec.seed, "trial", p, t);

    // both solvers see the same trial streams (paired comparison)
    std::vector<TrialOutcome> slots(S * static_cast<std::size_t>(T));
    auto work = [&](std::size_t idx) {
      const std::size_t s = idx / T;
      const int t = static_cast<int>(idx % T);
      slots[idx] = run_trial(cfg, spec.solvers[s], tseed[t]);
    };
    const std::size_t total = slots.size();
    if (jobs == 1 || total == 1) {
      for (std::size_t idx = 0; idx < total; ++idx) work(idx);
    } else {
      std::atomic<std::size_t> next{0};
      std::exception_ptr err;
      std::mutex err_mu;
      auto worker = [&] {
        while (true) {
          const std::size_t idx = next.fetch_add(1);
          if (idx >= total) return;
          try {
            work(idx);
          } catch (...) {
            std::lock_guard<std::mutex> lock(err_mu);
            if (!err) err = std::current_exception();
            return;
          }
        }
      };
      std::vector<std::thread> threads;
      const std::size_t nthreads =
          std::min<std::size_t>(static_cast<std::size_t>(jobs), total);
      threads.reserve(nthreads);
      for (std::size_t i = 0; i < nthreads; ++i) threads.emplace_back(worker);
      for (auto& th : threads) th.join();
      if (err) std::rethrow_exception(err);
    }

    for (std::size_t s = 0; s < S; ++s) {
      std::vector<double> mu(T), nmse(T);
      double iter_sum = 0.0;
      int bad = 0;
      for (int t = 0; t < T; ++t) {
        const TrialOutcome& o = slots[s * T + t];
        mu[t] = o.score.mu_ad;
        nmse[t] = o.score.nmse_ce_db;
        iter_sum += o.iterations;
        if (!o.converged) ++bad;
      }
      const Stats m = mean_se(mu), n = mean_se(nmse);
      SweepRow row;
      row.sweep_param = sweep_name(spec.sweep);
      row.sweep_value = spec.values[p];
      row.solver = solver_name(spec.solvers[s]);
      row.trials = T;
      row.mu_ad_mean = m.mean;
      row.mu_ad_se = m.se;
      row.nmse_ce_db_mean = n.mean;
      row.nmse_ce_db_se = n.se;
      row.avg_iters = iter_sum / T;
      row.nonconverged = bad;
      rows.push_back(row);
      if (csv_out) {
        (*csv_out) << csv_row(row) << '\n';
        csv_out->flush();  // partial results survive an interruption
      }
    }
  }
  return rows;
}

const char* const kCsvHeader =
    "sweep_param,sweep_value,solver,trials,mu_ad_mean,mu_ad_se,"
    "nmse_ce_db_mean,nmse_ce_db_se,avg_iters,nonconverged";

std::string csv_row(const SweepRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%s,%.17g,%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d",
                r.sweep_param.c_str(), r.sweep_value, r.solver.c_str(),
                r.trials, r.mu_ad_mean, r.mu_ad_se, r.nmse_ce_db_mean,
                r.nmse_ce_db_se, r.avg_iters, r.nonconverged);
  return buf;
}

std::string csv_to_string(const std::vector<SweepRow>& rows) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const SweepRow& r : rows) {
    out += csv_row(r);
    out += '\n';
  }
  return out;
}

void write_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw io_error("cannot open '" + path + "' for writing");
  os << csv_to_string(rows);
  if (!os) throw io_error("write failed on '" + path + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& val) {
  std::string v = trim(val);
  if (v == "inf" || v == "+inf" || v == "Inf" || v == "INF")
    return std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw config_error("bad numeric value for '" + key + "': " + v);
  }
}

long parse_integer(const std::string& key, const std::string& val) {
  const double x = parse_real(key, val);
  if (!std::isfinite(x) || x != std::nearbyint(x) || std::fabs(x) > 1e15)
    throw config_error("'" + key + "' must be an integer");
  return static_cast<long>(x);
}

std::uint64_t parse_seed(const std::string& key, const std::string& val) {
  std::string v = trim(val);
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw config_error("bad seed value for '" + key + "': " + v);
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

}  // namespace

ExperimentSpec parse_experiment_text(const std::string& text) {
  ExperimentSpec spec;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool have_sweep = false, have_values = false;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("line " + std::to_string(lineno) +
                         ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    SystemConfig& b = spec.base;
    if (key == "M") {
      b.M = static_cast<int>(parse_integer(key, val));
      b.channel.M = b.M;
    } else if (key == "N_p") {
      b.N_p = static_cast<int>(parse_integer(key, val));
    } else if (key == "L") {
      b.L = static_cast<int>(parse_integer(key, val));
    } else if (key == "K") {
      b.K = static_cast<int>(parse_integer(key, val));
    } else if (key == "t_m") {
      b.t_m = static_cast<int>(parse_integer(key, val));
    } else if (key == "snr_db") {
      b.snr_db = parse_real(key, val);
    } else if (key == "L_path") {
      b.channel.L_path = static_cast<int>(parse_integer(key, val));
    } else if (key == "delta_deg") {
      b.channel.delta_deg = parse_real(key, val);
    } else if (key == "L_cp") {
      b.channel.L_cp = parse_real(key, val);
    } else if (key == "bandwidth_hz") {
      b.channel.bandwidth_hz = parse_real(key, val);
    } else if (key == "antenna_spacing") {
      b.channel.antenna_spacing_ratio = parse_real(key, val);
    } else if (key == "a") {
      b.solver.a = parse_real(key, val);
    } else if (key == "b") {
      b.solver.b = parse_real(key, val);
    } else if (key == "c") {
      b.solver.c = parse_real(key, val);
    } else if (key == "d") {
      b.solver.d = parse_real(key, val);
    } else if (key == "lambda") {
      b.solver.lambda = parse_real(key, val);
    } else if (key == "kappa") {
      b.solver.kappa = parse_real(key, val);
    } else if (key == "tol") {
      b.solver.tol = parse_real(key, val);
    } else if (key == "max_iters") {
      b.solver.max_iters = static_cast<int>(parse_integer(key, val));
    } else if (key == "sigma2_surrogate") {
      b.sigma2_surrogate = parse_real(key, val);
    } else if (key == "theta1") {
      if (trim(val) == "auto") {
        b.theta1_auto = true;
      } else {
        b.theta1_auto = false;
        b.detector.theta1 = parse_real(key, val);
      }
    } else if (key == "theta2") {
      b.detector.theta2 = parse_real(key, val);
    } else if (key == "theta3") {
      b.detector.theta3 = static_cast<int>(parse_integer(key, val));
    } else if (key == "user_nmse_gate_db") {
      b.detector.user_nmse_gate_db = parse_real(key, val);
    } else if (key == "sweep") {
      spec.sweep = sweep_from_name(trim(val));
      have_sweep = true;
    } else if (key == "sweep_values") {
      spec.values.clear();
      for (const std::string& v : split_list(val))
        spec.values.push_back(parse_real(key, v));
      have_values = true;
    } else if (key == "trials") {
      spec.trials = static_cast<int>(parse_integer(key, val));
    } else if (key == "solvers") {
      spec.solvers.clear();
      for (const std::string& v : split_list(val))
        spec.solvers.push_back(solver_from_name(v));
    } else if (key == "seed") {
      spec.seed = parse_seed(key, val);
    } else if (key == "out") {
      spec.out_path = val;
    } else {
      throw config_error("unknown key '" + key + "' on line " +
                         std::to_string(lineno));
    }
  }
  if (!have_sweep || !have_values)
    throw config_error("experiment file needs 'sweep' and 'sweep_values'");
  validate(spec);
  return spec;
}

ExperimentSpec parse_experiment_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_experiment_text(buf.str());
}

SystemConfig profile_fast() {
  SystemConfig c;
  c.M = 32;
  c.N_p = 32;
  c.L = 32;
  c.K = 12;
  c.t_m = 4;
  c.snr_db = 15.0;
  c.channel.M = 32;
  return c;
}

SystemConfig profile_paper() {
  return SystemConfig{};  // defaults are the paper-scale values
}

}  // namespace cesbl
