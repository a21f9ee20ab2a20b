#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "cesbl/harness.hpp"

using namespace cesbl;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

// small enough to keep a full sweep under a second
SystemConfig tiny_config() {
  SystemConfig cfg;
  cfg.M = 8;
  cfg.N_p = 4;
  cfg.L = 8;
  cfg.K = 2;
  cfg.t_m = 1;
  cfg.snr_db = kInf;
  cfg.channel.M = 8;
  cfg.channel.L_path = 2;
  return cfg;
}

}  // namespace

TEST_CASE("system config validation") {
  SystemConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.K = 0;
  CHECK_THROWS_AS(validate(cfg), config_error);
  cfg = SystemConfig{};
  cfg.K = 400;  // over the 64 * 5 identity budget
  CHECK_THROWS_AS(validate(cfg), config_error);
  cfg = SystemConfig{};
  cfg.snr_db = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(validate(cfg), config_error);
  cfg = SystemConfig{};
  cfg.snr_db = -kInf;
  CHECK_THROWS_AS(validate(cfg), config_error);
  cfg = SystemConfig{};
  cfg.sigma2_surrogate = 0.0;
  CHECK_THROWS_AS(validate(cfg), config_error);
}

TEST_CASE("theta1 selection") {
  SystemConfig cfg;
  cfg.snr_db = 15.0;
  CHECK(effective_theta1(cfg) == doctest::Approx(theta1_for_snr(15.0)));
  cfg.snr_db = kInf;
  CHECK(effective_theta1(cfg) == 1.0);
  cfg.theta1_auto = false;
  cfg.detector.theta1 = 0.9;
  CHECK(effective_theta1(cfg) == 0.9);
}

TEST_CASE("solver and sweep names round-trip") {
  CHECK(solver_from_name("ce_sbl") == SolverId::ce_sbl);
  CHECK(solver_from_name("m_sbl") == SolverId::m_sbl);
  CHECK(std::string(solver_name(SolverId::ce_sbl)) == "ce_sbl");
  CHECK_THROWS_AS(solver_from_name("foo"), config_error);
  CHECK(sweep_from_name("K") == SweepParam::K);
  CHECK(sweep_from_name("snr_db") == SweepParam::snr_db);
  CHECK(std::string(sweep_name(SweepParam::t_m)) == "t_m");
  CHECK_THROWS_AS(sweep_from_name("k"), config_error);
}

TEST_CASE("a lone synchronous noiseless user is always detected") {
  SystemConfig cfg;
  cfg.M = 16;
  cfg.N_p = 8;
  cfg.L = 16;
  cfg.K = 1;
  cfg.t_m = 0;
  cfg.snr_db = kInf;
  cfg.channel.M = 16;
  for (SolverId id : {SolverId::ce_sbl, SolverId::m_sbl}) {
    TrialOutcome out = run_trial(cfg, id, 77);
    CHECK(out.score.mu_ad == 1.0);
    CHECK(out.score.truth_count == 1);
    CHECK(out.score.nmse_ce_db < -40.0);
  }
}

TEST_CASE("trials are pure functions of config and seed") {
  SystemConfig cfg = tiny_config();
  TrialOutcome a = run_trial(cfg, SolverId::ce_sbl, 123);
  TrialOutcome b = run_trial(cfg, SolverId::ce_sbl, 123);
  CHECK(a.score.mu_ad == b.score.mu_ad);
  CHECK(a.score.nmse_ce_db == b.score.nmse_ce_db);
  CHECK(a.iterations == b.iterations);
  CHECK(a.converged == b.converged);

  TrialArtifacts art = run_trial_verbose(cfg, SolverId::ce_sbl, 123);
  CHECK(art.outcome.score.mu_ad == a.score.mu_ad);
  CHECK(art.outcome.score.nmse_ce_db == a.score.nmse_ce_db);

  TrialOutcome c = run_trial(cfg, SolverId::ce_sbl, 124);
  CHECK((c.score.nmse_ce_db != a.score.nmse_ce_db ||
         c.score.mu_ad != a.score.mu_ad));
}

TEST_CASE("sweep bookkeeping") {
  ExperimentSpec spec;
  spec.base = tiny_config();
  spec.sweep = SweepParam::K;
  spec.values = {2, 3};
  spec.trials = 2;
  spec.seed = 5;

  auto rows = run_sweep(spec);
  REQUIRE(rows.size() == 4);  // 2 points x 2 solvers, point-major
  CHECK(rows[0].sweep_value == 2);
  CHECK(rows[0].solver == "ce_sbl");
  CHECK(rows[1].sweep_value == 2);
  CHECK(rows[1].solver == "m_sbl");
  CHECK(rows[2].sweep_value == 3);
  CHECK(rows[3].solver == "m_sbl");
  for (const auto& r : rows) {
    CHECK(r.sweep_param == "K");
    CHECK(r.trials == 2);
    CHECK(r.mu_ad_mean >= 0.0);
    CHECK(r.mu_ad_mean <= 1.0);
    CHECK(r.mu_ad_se >= 0.0);
    CHECK(r.nonconverged >= 0);
    CHECK(r.nonconverged <= 2);
  }

  // the aggregate is reproducible from the derived per-trial streams
  SystemConfig point = apply_sweep_value(spec.base, spec.sweep, spec.values[1]);
  point.pool_seed = derive_seed(spec.seed, "pilot", 1, 0);
  double mu_sum = 0.0, iter_sum = 0.0;
  for (int t = 0; t < spec.trials; ++t) {
    TrialOutcome o =
        run_trial(point, SolverId::m_sbl, derive_seed(spec.seed, "trial", 1, t));
    mu_sum += o.score.mu_ad;
    iter_sum += o.iterations;
  }
  CHECK(rows[3].mu_ad_mean == doctest::Approx(mu_sum / 2.0).epsilon(1e-15));
  CHECK(rows[3].avg_iters == doctest::Approx(iter_sum / 2.0).epsilon(1e-15));
}

TEST_CASE("adding trials preserves the existing streams") {
  ExperimentSpec spec;
  spec.base = tiny_config();
  spec.sweep = SweepParam::K;
  spec.values = {2};
  spec.trials = 2;
  spec.seed = 6;
  auto short_rows = run_sweep(spec);
  spec.trials = 4;
  auto long_rows = run_sweep(spec);

  SystemConfig point = apply_sweep_value(spec.base, spec.sweep, 2);
  point.pool_seed = derive_seed(spec.seed, "pilot", 0, 0);
  double t2 = run_trial(point, SolverId::ce_sbl, derive_seed(spec.seed, "trial", 0, 2))
                  .score.mu_ad;
  double t3 = run_trial(point, SolverId::ce_sbl, derive_seed(spec.seed, "trial", 0, 3))
                  .score.mu_ad;
  const double want = (2.0 * short_rows[0].mu_ad_mean + t2 + t3) / 4.0;
  CHECK(long_rows[0].mu_ad_mean == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("worker count does not change the results") {
  ExperimentSpec spec;
  spec.base = tiny_config();
  spec.sweep = SweepParam::t_m;
  spec.values = {0, 1};
  spec.trials = 2;
  spec.seed = 7;
  auto serial = run_sweep(spec, 1);
  auto threaded = run_sweep(spec, 3);
  CHECK(csv_to_string(serial) == csv_to_string(threaded));
}

TEST_CASE("csv schema is pinned") {
  CHECK(std::string(kCsvHeader) ==
        "sweep_param,sweep_value,solver,trials,mu_ad_mean,mu_ad_se,"
        "nmse_ce_db_mean,nmse_ce_db_se,avg_iters,nonconverged");
  SweepRow row;
  row.sweep_param = "K";
  row.sweep_value = 12;
  row.solver = "ce_sbl";
  row.trials = 3;
  std::string line = csv_row(row);
  int commas = 0;
  for (char ch : line)
    if (ch == ',') ++commas;
  CHECK(commas == 9);

  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "cesbl_rows_test.csv";
  write_csv({row}, path.string());
  std::ifstream is(path);
  std::ostringstream buf;
  buf << is.rdbuf();
  CHECK(buf.str() == csv_to_string({row}));
  fs::remove(path);
  CHECK_THROWS_AS(write_csv({row}, "/nonexistent_dir_zz/x.csv"), io_error);
}

TEST_CASE("live csv stream matches the returned rows") {
  ExperimentSpec spec;
  spec.base = tiny_config();
  spec.sweep = SweepParam::K;
  spec.values = {2};
  spec.trials = 2;
  spec.seed = 8;
  std::ostringstream os;
  auto rows = run_sweep(spec, 1, &os);
  CHECK(os.str() == csv_to_string(rows));
}

TEST_CASE("experiment text parsing") {
  const std::string text =
      "# K sweep on the tiny boxed system\n"
      "M = 8\n"
      "N_p = 4\n"
      "L = 8\n"
      "K = 2\n"
      "t_m = 1\n"
      "snr_db = inf\n"
      "L_path = 2\n"
      "delta_deg = 10\n"
      "L_cp = 32\n"
      "bandwidth_hz = 1.0e6\n"
      "antenna_spacing = 0.5\n"
      "a = 30\n"
      "b = 1e-4\n"
      "c = 0.125\n"
      "d = 1e-4\n"
      "lambda = 0.02\n"
      "kappa = 0.2\n"
      "tol = 1e-7\n"
      "max_iters = 120\n"
      "sigma2_surrogate = 1e-7\n"
      "theta1 = auto\n"
      "theta2 = 0.97\n"
      "theta3 = 2\n"
      "user_nmse_gate_db = -12\n"
      "sweep = K\n"
      "sweep_values = 2, 3\n"
      "trials = 4\n"
      "solvers = ce_sbl, m_sbl\n"
      "seed = 9\n"
      "out = run.csv\n";
  ExperimentSpec spec = parse_experiment_text(text);
  CHECK(spec.base.M == 8);
  CHECK(spec.base.N_p == 4);
  CHECK(spec.base.L == 8);
  CHECK(spec.base.K == 2);
  CHECK(spec.base.t_m == 1);
  CHECK(std::isinf(spec.base.snr_db));
  CHECK(spec.base.channel.M == 8);
  CHECK(spec.base.channel.L_path == 2);
  CHECK(spec.base.channel.delta_deg == 10.0);
  CHECK(spec.base.channel.L_cp == 32.0);
  CHECK(spec.base.solver.lambda == 0.02);
  CHECK(spec.base.solver.kappa == 0.2);
  CHECK(spec.base.solver.max_iters == 120);
  CHECK(spec.base.sigma2_surrogate == 1e-7);
  CHECK(spec.base.theta1_auto);
  CHECK(spec.base.detector.theta2 == 0.97);
  CHECK(spec.base.detector.theta3 == 2);
  CHECK(spec.base.detector.user_nmse_gate_db == -12.0);
  CHECK(spec.sweep == SweepParam::K);
  CHECK(spec.values == std::vector<double>{2, 3});
  CHECK(spec.trials == 4);
  REQUIRE(spec.solvers.size() == 2);
  CHECK(spec.seed == 9);
  CHECK(spec.out_path == "run.csv");

  // a numeric theta1 switches the auto mode off
  ExperimentSpec fixed = parse_experiment_text(
      "M=8\nN_p=4\nL=8\nK=2\nt_m=1\ntheta1 = 0.9\nsweep=K\nsweep_values=2\n");
  CHECK(!fixed.base.theta1_auto);
  CHECK(fixed.base.detector.theta1 == 0.9);

  CHECK_THROWS_AS(parse_experiment_text("bogus_key = 1\nsweep=K\nsweep_values=2\n"),
                  config_error);
  CHECK_THROWS_AS(parse_experiment_text("M = eight\nsweep=K\nsweep_values=2\n"),
                  config_error);
  CHECK_THROWS_AS(parse_experiment_text("M = 8\n"), config_error);
  CHECK_THROWS_AS(parse_experiment_text("no equals line\n"), config_error);
  CHECK_THROWS_AS(
      parse_experiment_text("solvers = ce_sbl, ce_sbl\nsweep=K\nsweep_values=2\n"),
      config_error);
  CHECK_THROWS_AS(parse_experiment_text("K = 2.5\nsweep=K\nsweep_values=2\n"),
                  config_error);
}

TEST_CASE("experiment file parsing") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "cesbl_exp_test.cfg";
  {
    std::ofstream f(path);
    f << "M=8\nN_p=4\nL=8\nK=2\nt_m=1\nsweep = t_m\nsweep_values = 0, 1\n";
  }
  ExperimentSpec spec = parse_experiment_file(path.string());
  CHECK(spec.sweep == SweepParam::t_m);
  CHECK(spec.values.size() == 2);
  fs::remove(path);
  CHECK_THROWS_AS(parse_experiment_file(path.string()), io_error);
}

TEST_CASE("sweep value coercion") {
  SystemConfig cfg = tiny_config();
  CHECK(apply_sweep_value(cfg, SweepParam::K, 3.0).K == 3);
  CHECK_THROWS_AS(apply_sweep_value(cfg, SweepParam::K, 2.5), config_error);
  CHECK_THROWS_AS(apply_sweep_value(cfg, SweepParam::L, kInf), config_error);
  CHECK(std::isinf(apply_sweep_value(cfg, SweepParam::snr_db, kInf).snr_db));
  CHECK_THROWS_AS(
      apply_sweep_value(cfg, SweepParam::snr_db,
                        std::numeric_limits<double>::quiet_NaN()),
      config_error);
}

TEST_CASE("profiles") {
  SystemConfig fast = profile_fast();
  CHECK(fast.M == 32);
  CHECK(fast.N_p == 32);
  CHECK(fast.K == 12);
  CHECK(fast.channel.M == 32);
  CHECK_NOTHROW(validate(fast));
  SystemConfig paper = profile_paper();
  CHECK(paper.M == 64);
  CHECK(paper.N_p == 64);
  CHECK(paper.K == 30);
  CHECK(paper.snr_db == 15.0);
  CHECK_NOTHROW(validate(paper));
}

TEST_CASE("plots land next to the results") {
  ExperimentSpec spec;
  spec.base = tiny_config();
  spec.sweep = SweepParam::K;
  spec.values = {2, 3};
  spec.trials = 2;
  spec.seed = 11;
  auto rows = run_sweep(spec);

  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "cesbl_plot_test";
  fs::create_directories(dir);
  auto files = emit_plots(rows, dir.string());
  REQUIRE(files.size() == 2);
  for (const auto& f : files) {
    std::ifstream is(f);
    REQUIRE(is.good());
    std::string head(5, '\0');
    is.read(head.data(), 5);
    CHECK(head == "<svg ");
  }
  // a single row is still plottable
  auto single = emit_plots({rows[0]}, dir.string());
  CHECK(single.size() == 2);
  fs::remove_all(dir);
  CHECK_THROWS_AS(emit_plots({}, dir.string()), config_error);
}

TEST_CASE("detection grows with the bin budget") {
  // on this fixed suite the binding constraint is cluster coverage: fewer
  // selected bins truncate the per-user estimates and fail the nmse gate,
  // so sweeping theta2 upward never loses detections
  SystemConfig cfg;
  cfg.M = 16;
  cfg.N_p = 8;
  cfg.L = 12;
  cfg.K = 4;
  cfg.t_m = 1;
  cfg.snr_db = 10.0;
  cfg.channel.M = 16;
  cfg.channel.L_path = 8;

  const double grid[] = {0.98, 0.995, 0.999};
  int detected[3] = {0, 0, 0};
  for (std::uint64_t seed : {301u, 302u, 303u}) {
    TrialArtifacts art = run_trial_verbose(cfg, SolverId::ce_sbl, seed);
    MatC X_est = complex_from_stacked(art.sol.X);
    MatC psi = dft_transform_matrix(cfg.M);
    DetectorConfig dcfg = cfg.detector;
    dcfg.theta1 = effective_theta1(cfg);
    for (int g = 0; g < 3; ++g) {
      dcfg.theta2 = grid[g];
      DetectionResult det = run_detector(X_est, cfg.t_m, dcfg, psi);
      ScoreReport rep =
          match_and_score(art.truth, X_est, det, dcfg, psi, cfg.t_m);
      detected[g] += rep.detected_count;
    }
  }
  CHECK(detected[1] >= detected[0]);
  CHECK(detected[2] >= detected[1]);
}
