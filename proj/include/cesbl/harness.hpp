#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cesbl/airlink.hpp"
#include "cesbl/channel.hpp"
#include "cesbl/detector.hpp"
#include "cesbl/solver.hpp"
#include "cesbl/types.hpp"

namespace cesbl {

struct SystemConfig {
  int M = 64;    // antennas = angular bins
  int N_p = 64;  // pilot pool size
  int L = 64;    // pilot length, L_hat = L + t_m
  int K = 30;    // active users
  int t_m = 4;   // maximum frame delay, symbols
  double snr_db = 15.0;  // +inf gives a noiseless measurement
  ChannelParams channel;  // channel.M is overridden by M at run time
  SolverConfig solver;    // solver.sigma2 is overridden per trial
  DetectorConfig detector;
  bool theta1_auto = true;         // theta1 = theta1_for_snr(snr_db)
  double sigma2_surrogate = 1e-8;  // solver noise floor at snr_db = +inf
  std::uint64_t pool_seed = 0;     // pilot pool stream, set by run_sweep
};

void validate(const SystemConfig& cfg);

double effective_theta1(const SystemConfig& cfg);

enum class SolverId { ce_sbl, m_sbl };

const char* solver_name(SolverId id);
SolverId solver_from_name(const std::string& name);

struct TrialOutcome {
  ScoreReport score;
  int iterations = 0;
  bool converged = false;
};

struct TrialArtifacts {
  GroundTruth truth;
  Measurement meas;
  SolverResult sol;
  DetectionResult det;
  TrialOutcome outcome;
};

// pilots -> actives -> ground truth -> received -> realify -> solver ->
// detect -> score; a pure function of (cfg, solver, trial_seed)
TrialArtifacts run_trial_verbose(const SystemConfig& cfg, SolverId solver,
                                 std::uint64_t trial_seed);
TrialOutcome run_trial(const SystemConfig& cfg, SolverId solver,
                       std::uint64_t trial_seed);

enum class SweepParam { K, L, snr_db, t_m };

const char* sweep_name(SweepParam p);
SweepParam sweep_from_name(const std::string& name);

struct ExperimentSpec {
  SystemConfig base;
  SweepParam sweep = SweepParam::K;
  std::vector<double> values;
  int trials = 50;
  std::vector<SolverId> solvers{SolverId::ce_sbl, SolverId::m_sbl};
  std::uint64_t seed = 1;
  std::string out_path;  // CSV destination; empty keeps results in memory
};

void validate(const ExperimentSpec& spec);

SystemConfig apply_sweep_value(SystemConfig cfg, SweepParam p, double value);

struct SweepRow {
  std::string sweep_param;
  double sweep_value = 0.0;
  std::string solver;
  int trials = 0;
  double mu_ad_mean = 0.0, mu_ad_se = 0.0;
  double nmse_ce_db_mean = 0.0, nmse_ce_db_se = 0.0;
  double avg_iters = 0.0;
  int nonconverged = 0;
};

extern const char* const kCsvHeader;

// Trials are farmed out to `jobs` workers; aggregation always walks trials in
// index order, so the result set depends only on spec. csv_out, when given,
// receives the header up front and the finished rows point by point.
std::vector<SweepRow> run_sweep(const ExperimentSpec& spec, int jobs = 1,
                                std::ostream* csv_out = nullptr);

std::string csv_row(const SweepRow& row);
std::string csv_to_string(const std::vector<SweepRow>& rows);
void write_csv(const std::vector<SweepRow>& rows, const std::string& path);

// flat key=value text, '#' comments, unknown keys rejected
ExperimentSpec parse_experiment_text(const std::string& text);
ExperimentSpec parse_experiment_file(const std::string& path);

SystemConfig profile_fast();
SystemConfig profile_paper();

// one SVG per metric (mu_ad, nmse_ce_db); x = sweep point, one series per
// solver, whiskers = standard error; returns the paths written
std::vector<std::string> emit_plots(const std::vector<SweepRow>& rows,
                                    const std::string& dir);

}  // namespace cesbl
