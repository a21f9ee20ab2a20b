#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cesbl/capacity.hpp"
#include "cesbl/harness.hpp"
#include "cesbl/verify.hpp"

namespace {

using namespace cesbl;

SystemConfig base_from(const std::string& config_path,
                       const std::string& profile) {
  if (!config_path.empty()) return parse_experiment_file(config_path).base;
  if (profile == "paper") return profile_paper();
  return profile_fast();
}

std::vector<SolverId> parse_solvers(const std::string& csv) {
  std::vector<SolverId> out;
  std::istringstream is(csv);
  std::string tok;
  while (std::getline(is, tok, ','))
    if (!tok.empty()) out.push_back(solver_from_name(tok));
  if (out.empty()) throw config_error("empty solver list");
  return out;
}

int cmd_simulate(const std::string& config_path, const std::string& profile,
                 std::uint64_t seed, const std::string& out_dir,
                 const std::string& solvers_csv) {
  SystemConfig cfg = base_from(config_path, profile);
  cfg.pool_seed = derive_seed(seed, "pilot", 0, 0);
  const SolverId solver = parse_solvers(solvers_csv).front();
  const std::uint64_t trial_seed = derive_seed(seed, "trial", 0, 0);
  const TrialArtifacts art = run_trial_verbose(cfg, solver, trial_seed);

  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);
  {
    std::ofstream os(dir / "ground_truth.txt");
    dump_ground_truth(os, art.truth.users);
  }
  {
    std::ofstream os(dir / "trace.csv");
    dump_trace(os, art.sol);
  }
  {
    std::ofstream os(dir / "detections.txt");
    dump_detections(os, art.det);
  }
  std::printf("solver          %s\n", solver_name(solver));
  std::printf("system          M=%d N_p=%d L=%d K=%d t_m=%d snr_db=%g\n",
              cfg.M, cfg.N_p, cfg.L, cfg.K, cfg.t_m, cfg.snr_db);
  std::printf("noise sigma2    %.17g\n", art.meas.sigma2);
  std::printf("iterations      %d (%s)\n", art.outcome.iterations,
              art.outcome.converged ? "converged" : "not converged");
  std::printf("mu_ad           %.17g\n", art.outcome.score.mu_ad);
  std::printf("nmse_ce_db      %.17g\n", art.outcome.score.nmse_ce_db);
  std::printf("detected/truth  %d/%d, false rows %d\n",
              art.outcome.score.detected_count, art.outcome.score.truth_count,
              art.outcome.score.false_rows);
  std::printf("dumps           %s\n", dir.string().c_str());
  return 0;
}

int cmd_sweep(const std::string& config_path, std::uint64_t seed,
              bool seed_given, const std::string& out,
              const std::string& solvers_csv, int jobs, bool plots) {
  ExperimentSpec spec = parse_experiment_file(config_path);
  if (seed_given) spec.seed = seed;
  if (!solvers_csv.empty()) spec.solvers = parse_solvers(solvers_csv);
  if (!out.empty()) spec.out_path = out;

  std::vector<SweepRow> rows;
  if (spec.out_path.empty()) {
    rows = run_sweep(spec, jobs, &std::cout);
  } else {
    std::ofstream os(spec.out_path);
    if (!os) throw io_error("cannot open '" + spec.out_path + "' for writing");
    rows = run_sweep(spec, jobs, &os);
    std::fprintf(stderr, "wrote %zu rows to %s\n", rows.size(),
                 spec.out_path.c_str());
  }
  if (plots) {
    const std::string dir =
        spec.out_path.empty()
            ? std::string(".")
            : std::filesystem::path(spec.out_path).parent_path().string();
    for (const std::string& p : emit_plots(rows, dir.empty() ? "." : dir))
      std::fprintf(stderr, "wrote %s\n", p.c_str());
  }
  return 0;
}

int cmd_bounds(long l_hat, long m, const std::string& d_csv,
               const std::string& out) {
  std::vector<long> ds;
  std::istringstream is(d_csv);
  std::string tok;
  while (std::getline(is, tok, ','))
    if (!tok.empty()) ds.push_back(std::stol(tok));
  if (ds.empty()) throw config_error("empty D list");
  std::ostringstream table;
  table << "L_hat,M,D,lemma1,theorem1,delta\n";
  for (long d : ds) {
    table << l_hat << ',' << m << ',' << d << ',' << lemma1_bound(l_hat, m)
          << ',' << theorem1_bound(l_hat, m, d) << ','
          << delta_gap(l_hat, m, d) << '\n';
  }
  if (out.empty()) {
    std::cout << table.str();
  } else {
    std::ofstream os(out);
    if (!os) throw io_error("cannot open '" + out + "' for writing");
    os << table.str();
  }
  return 0;
}

int cmd_verify(std::uint64_t seed) {
  const auto results = run_verify_suite(seed);
  int failures = 0;
  for (const CheckResult& r : results) {
    std::printf("[%s] %-40s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str());
    if (!r.pass) ++failures;
  }
  std::printf("%zu checks, %d failed\n", results.size(), failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "asynchronous grant-free access testbed: joint activity detection and "
      "delay-angle channel estimation"};
  app.require_subcommand(1);

  std::string config, profile = "fast";
  std::string sim_out = ".", sweep_out, bounds_out;
  std::string sim_solvers = "ce_sbl,m_sbl", sweep_solvers;
  std::uint64_t seed = 1;
  int jobs = 1;
  bool plots = false;
  long l_hat = 68, m = 64;
  std::string d_list = "1,2,4,8,16,32,64";

  auto* sim = app.add_subcommand("simulate", "run one trial, dump internals");
  sim->add_option("--config", config, "experiment file; base settings used");
  sim->add_option("--profile", profile, "fast or paper scale")
      ->check(CLI::IsMember({"fast", "paper"}));
  sim->add_option("--seed", seed, "root seed");
  sim->add_option("--out", sim_out, "dump directory");
  sim->add_option("--solvers", sim_solvers, "first listed solver runs");

  auto* sw = app.add_subcommand("sweep", "run a Monte-Carlo sweep");
  sw->add_option("--config", config, "experiment file")->required();
  auto* seed_opt = sw->add_option("--seed", seed, "override the file seed");
  sw->add_option("--out", sweep_out,
                 "CSV path (default: file's 'out' or stdout)");
  sw->add_option("--solvers", sweep_solvers, "override the file solver list");
  sw->add_option("--jobs", jobs, "worker threads");
  sw->add_flag("--plots", plots, "write SVG plots next to the CSV");

  auto* bd = app.add_subcommand("bounds", "identifiability bound table");
  bd->add_option("--l-hat", l_hat, "extended pilot length");
  bd->add_option("--m", m, "signal columns");
  bd->add_option("--d", d_list, "comma list of cluster lengths");
  bd->add_option("--out", bounds_out, "CSV path (default stdout)");

  auto* vf = app.add_subcommand("verify", "run the invariant/oracle suite");
  vf->add_option("--seed", seed, "root seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return cmd_simulate(config, profile, seed, sim_out, sim_solvers);
    if (sw->parsed())
      return cmd_sweep(config, seed, seed_opt->count() > 0, sweep_out,
                       sweep_solvers, jobs, plots);
    if (bd->parsed()) return cmd_bounds(l_hat, m, d_list, bounds_out);
    if (vf->parsed()) return cmd_verify(seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
