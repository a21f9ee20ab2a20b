#include "cesbl/verify.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "cesbl/capacity.hpp"
#include "cesbl/harness.hpp"

namespace cesbl {

namespace {

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

struct Suite {
  std::uint64_t seed;
  std::vector<CheckResult> results;

  void run(const std::string& name,
           const std::function<bool(std::string&)>& body) {
    CheckResult r;
    r.name = name;
    try {
      r.pass = body(r.detail);
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    results.push_back(std::move(r));
  }
};

bool check_pool(std::uint64_t seed, std::string& detail) {
  const PilotPool pool = generate_pilot_pool(16, 24, seed);
  double worst = 0.0;
  for (Index j = 0; j < pool.count(); ++j)
    worst = std::max(worst, std::abs(pool.pilots.col(j).norm() - 1.0));
  detail = "max |norm-1| = " + num(worst);
  if (worst > 1e-12) return false;
  const auto path =
      std::filesystem::temp_directory_path() / "cesbl_pool_check.bin";
  save_pool(pool, path.string());
  const PilotPool back = load_pool(path.string());
  std::filesystem::remove(path);
  return back.pilots.rows() == pool.pilots.rows() &&
         (back.pilots - pool.pilots).cwiseAbs().maxCoeff() == 0.0;
}

bool check_extension(std::uint64_t seed, std::string& detail) {
  const PilotPool pool = generate_pilot_pool(9, 5, seed + 1);
  const int t_m = 3;
  const ExtendedPilotMatrix ext = build_extended_matrix(pool, t_m);
  if (ext.l_hat() != 12 || ext.n_hat() != 20) {
    detail = "bad extended shape";
    return false;
  }
  for (Index j = 0; j < ext.n_hat(); ++j) {
    const auto [p, t] = ext.row_map(j);
    if (ext.col_index(p, t) != j) {
      detail = "row_map/col_index mismatch at " + std::to_string(j);
      return false;
    }
    VecC ref = VecC::Zero(ext.l_hat());
    ref.segment(t, pool.length()) = pool.pilots.col(p);
    if ((ext.matrix.col(j) - ref).cwiseAbs().maxCoeff() != 0.0) {
      detail = "column " + std::to_string(j) + " is not a clean shift";
      return false;
    }
  }
  return true;
}

bool check_dft(std::string& detail) {
  const Index M = 32;
  const MatC Psi = dft_transform_matrix(M);
  const double unit = (Psi.adjoint() * Psi - MatC::Identity(M, M))
                          .cwiseAbs()
                          .maxCoeff();
  const double sym = (Psi - Psi.transpose()).cwiseAbs().maxCoeff();
  detail = "unitarity " + num(unit) + ", symmetry " + num(sym);
  return unit < 1e-12 && sym == 0.0;
}

bool check_steering(std::string& detail) {
  const VecC a0 = array_response(0.0, 6, 0.5);
  if ((a0 - VecC::Ones(6)).cwiseAbs().maxCoeff() > 1e-14) {
    detail = "broadside response is not all-ones";
    return false;
  }
  const VecC a90 = array_response(M_PI / 2.0, 4, 0.5);
  for (Index m = 0; m < 4; ++m) {
    const cplx want = (m % 2 == 0) ? cplx(1, 0) : cplx(-1, 0);
    if (std::abs(a90(m) - want) > 1e-12) {
      detail = "endfire entry " + std::to_string(m) + " off";
      return false;
    }
  }
  detail = "modulus spread " +
           num((a90.cwiseAbs() - VecX::Ones(4)).cwiseAbs().maxCoeff());
  return true;
}

bool check_channel_energy(std::uint64_t seed, std::string& detail) {
  ChannelParams p;
  p.M = 16;
  p.L_path = 8;
  Rng rng(derive_seed(seed, "verify_ch", 0, 0));
  const int U = 4000;
  double sum = 0.0, sumsq = 0.0;
  for (int u = 0; u < U; ++u) {
    const UserRealization ur = draw_user(p, 4, 2, rng);
    const double e = ur.channel.squaredNorm();
    sum += e;
    sumsq += e * e;
  }
  const double mean = sum / U;
  const double var = sumsq / U - mean * mean;
  const double se = std::sqrt(var / U);
  const double expect = p.M * p.L_path;  // unit-power paths on a unit-modulus array
  detail = "mean " + num(mean) + " vs " + num(expect) + ", se " + num(se);
  return std::abs(mean - expect) < 4.0 * se;
}

bool check_snr(std::uint64_t seed, std::string& detail) {
  SystemConfig cfg = profile_fast();
  cfg.M = 64;
  cfg.channel.M = 64;
  cfg.N_p = 8;
  cfg.L = 8;
  cfg.K = 3;
  cfg.t_m = 1;
  cfg.snr_db = 10.0;
  cfg.pool_seed = derive_seed(seed, "verify_snr", 0, 0);
  const PilotPool pool = generate_pilot_pool(cfg.L, cfg.N_p, cfg.pool_seed);
  const ExtendedPilotMatrix ext = build_extended_matrix(pool, cfg.t_m);
  ChannelParams params = cfg.channel;
  params.M = cfg.M;
  double noise_sum = 0.0, sigma2 = 0.0;
  long n_entries = 0;
  for (int t = 0; t < 20; ++t) {
    Rng rng(derive_seed(seed, "verify_snr", 1, t));
    auto users = sample_actives(cfg.K, params, cfg.N_p, cfg.t_m, rng);
    const GroundTruth truth = assemble_ground_truth(std::move(users), ext, cfg.M);
    const Measurement meas = synthesize_received(ext, truth, cfg.snr_db, rng);
    const MatC clean = ext.matrix * truth.X_hat;
    const double p_sig = clean.squaredNorm() / (clean.rows() * clean.cols());
    const double want = p_sig * std::pow(10.0, -cfg.snr_db / 10.0);
    if (std::abs(meas.sigma2 - want) > 1e-12 * want) {
      detail = "sigma2 formula off";
      return false;
    }
    noise_sum += (meas.Y_hat - clean).squaredNorm();
    sigma2 += meas.sigma2;
    n_entries += clean.rows() * clean.cols();
  }
  sigma2 /= 20.0;
  const double emp = noise_sum / n_entries;
  const double rel = std::abs(emp - sigma2) / sigma2;
  detail = "empirical/target noise power off by " + num(rel);
  return rel < 4.0 / std::sqrt(static_cast<double>(n_entries));
}

bool check_realify(std::uint64_t seed, std::string& detail) {
  Rng rng(derive_seed(seed, "verify_re", 0, 0));
  MatC S(7, 5), X(5, 3);
  for (Index j = 0; j < 5; ++j)
    for (Index i = 0; i < 7; ++i) S(i, j) = rng.cnormal();
  for (Index j = 0; j < 3; ++j)
    for (Index i = 0; i < 5; ++i) X(i, j) = rng.cnormal();
  const MatC Y = S * X;
  const RealSystem sys = realify(S, Y);
  const MatX Xr = stack_complex(X);
  const double err = (sys.A * Xr - stack_complex(Y)).cwiseAbs().maxCoeff();
  const double rt = (complex_from_stacked(stack_complex(X)) - X)
                        .cwiseAbs()
                        .maxCoeff();
  detail = "realified product error " + num(err);
  return err < 1e-12 && rt == 0.0 && sys.paired && sys.n_logical == 5;
}

bool check_posterior(std::uint64_t seed, std::string& detail) {
  Rng rng(derive_seed(seed, "verify_post", 0, 0));
  double worst = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const Index rows = 10 + 2 * rep, cols = 24 - rep;
    MatX A(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) A(i, j) = rng.normal();
    VecX y(rows), gamma(cols);
    for (Index i = 0; i < rows; ++i) y(i) = rng.normal();
    for (Index j = 0; j < cols; ++j) gamma(j) = 0.1 + rng.uniform();
    const double s2 = 0.05;
    VecX mu, phi;
    posterior_stats(A, y, gamma, s2, mu, phi);
    MatX P = (A.transpose() * A) / s2;
    P.diagonal() += gamma;
    const double res = (P * mu - A.transpose() * y / s2).norm() /
                       (A.transpose() * y / s2).norm();
    const MatX inv = P.inverse();
    const double dphi = (phi - inv.diagonal()).cwiseAbs().maxCoeff();
    worst = std::max({worst, res, dphi});
  }
  detail = "worst residual " + num(worst);
  return worst < 1e-8;
}

// the complex fast path must reproduce the stacked dense recursion exactly
bool check_estep_agreement(std::uint64_t seed, std::string& detail) {
  Rng rng(derive_seed(seed, "verify_estep", 0, 0));
  const Index Lh = 6, Nh = 9, M = 4;
  MatC S(Lh, Nh), X(Nh, M);
  for (Index j = 0; j < Nh; ++j)
    for (Index i = 0; i < Lh; ++i) S(i, j) = rng.cnormal();
  X.setZero();
  for (Index j = 0; j < M; ++j) X(2, j) = rng.cnormal();
  const MatC Y = S * X;
  const RealSystem sys = realify(S, Y);
  SolverConfig cfg;
  cfg.sigma2 = 1e-3;
  cfg.tol = 1e-300;  // force both paths through the same iteration count
  cfg.max_iters = 3;
  const SolverResult fast = ce_sbl(sys, cfg);

  // dense reference: same recursion through posterior_stats only
  const Index n = sys.n_logical;
  MatX gamma = MatX::Ones(n, M);
  VecX alpha = VecX::Ones(n);
  MatX beta = MatX::Ones(n, M);
  MatX mu(2 * n, M), phi(2 * n, M);
  for (int it = 0; it < cfg.max_iters; ++it) {
    for (Index j = 0; j < M; ++j) {
      VecX g(2 * n), cm, cp;
      g.head(n) = gamma.col(j);
      g.tail(n) = gamma.col(j);
      VecX mj, pj;
      posterior_stats(sys.A, sys.Y.col(j), g, cfg.sigma2, mj, pj);
      mu.col(j) = mj;
      phi.col(j) = pj;
    }
    const MatX E = second_moments(mu, phi, n);
    alpha = alpha_from_moments(E.rowwise().mean(), cfg);
    beta = beta_from_moments(coupled_moments(E, cfg.kappa), cfg);
    gamma = combine_gamma(alpha, beta, cfg);
  }
  const double err =
      (fast.X - mu).cwiseAbs().maxCoeff() / mu.cwiseAbs().maxCoeff();
  detail = "max relative deviation " + num(err);
  return err < 1e-9;
}

bool check_jensen(std::uint64_t seed, std::string& detail) {
  Rng rng(derive_seed(seed, "verify_jensen", 0, 0));
  for (int i = 0; i < 20000; ++i) {
    const double alpha = std::exp(rng.uniform(-6, 6));
    const double beta = std::exp(rng.uniform(-6, 6));
    const double lam = rng.uniform(1e-3, 1.0 - 1e-3);
    const JensenGap g = jensen_gap(alpha, beta, lam);
    if (g.approx < g.exact - 1e-12 * g.approx) {
      detail = "dominance broken at alpha=" + num(alpha);
      return false;
    }
    const JensenGap eq = jensen_gap(alpha, alpha * (1.0 - lam) / lam, lam);
    if (std::abs(eq.approx - eq.exact) > 1e-9 * eq.approx) {
      detail = "equality case off at alpha=" + num(alpha);
      return false;
    }
  }
  return true;
}

bool check_noiseless_toy(std::uint64_t seed, std::string& detail) {
  SystemConfig cfg;
  cfg.M = 8;
  cfg.channel.M = 8;
  cfg.N_p = 8;
  cfg.L = 12;
  cfg.K = 2;
  cfg.t_m = 1;
  cfg.snr_db = std::numeric_limits<double>::infinity();
  cfg.channel.delta_deg = 0.0;
  cfg.pool_seed = derive_seed(seed, "verify_toy", 0, 0);
  const TrialOutcome o =
      run_trial(cfg, SolverId::ce_sbl, derive_seed(seed, "verify_toy", 1, 0));
  detail = "mu_ad " + num(o.score.mu_ad) + ", nmse " +
           num(o.score.nmse_ce_db) + " dB, iters " +
           std::to_string(o.iterations);
  return o.score.mu_ad == 1.0 && o.score.nmse_ce_db < -40.0;
}

bool check_detector_partition(std::uint64_t seed, std::string& detail) {
  Rng rng(derive_seed(seed, "verify_det", 0, 0));
  const Index M = 48;
  for (int rep = 0; rep < 50; ++rep) {
    VecC row = VecC::Zero(M);
    const int bumps = 1 + rng.uniform_int(3);
    for (int b = 0; b < bumps; ++b) {
      const Index c = rng.uniform_int(static_cast<int>(M));
      for (Index o = 0; o < 3; ++o)
        row((c + o) % M) += cplx(rng.normal(), rng.normal()) * 3.0;
    }
    for (Index j = 0; j < M; ++j) row(j) += 0.05 * rng.cnormal();
    const int theta3 = 3;
    const auto sel = select_bins(row, 0.98);
    const auto clusters = segment_clusters(row, 0.98, theta3);
    std::set<Index> seen;
    for (const auto& c : clusters)
      for (Index b : c)
        if (!seen.insert(b).second) {
          detail = "bin in two clusters";
          return false;
        }
    if (seen.size() != sel.size()) {
      detail = "partition misses bins";
      return false;
    }
    for (Index b : sel)
      if (seen.count(b) == 0) {
        detail = "selected bin not clustered";
        return false;
      }
    for (const auto& c : clusters)
      for (std::size_t i = 0; i + 1 < c.size(); ++i)
        if (c[i + 1] - c[i] > theta3 &&
            (c.front() + M - c.back()) > theta3) {
          detail = "cluster spans an oversized gap";
          return false;
        }
  }
  return true;
}

bool check_capacity_scan(std::string& detail) {
  // premise region: the decomposition needs at least two blocks, or D = M
  long equalities_off = 0, negatives = 0, halving = 0, loose_bound = 0;
  for (long Lh = 4; Lh <= 64; ++Lh)
    for (long M = 2; M <= std::min<long>(Lh, 64); ++M) {
      std::vector<long> Ds;
      for (long D = 1; D <= M / 2; ++D) Ds.push_back(D);
      Ds.push_back(M);
      for (long D : Ds) {
        const long gap = delta_gap(Lh, M, D);
        if (gap < 0) ++negatives;
        if (gap == 0 && D != M) ++equalities_off;
        if (2 * D <= M &&
            theorem1_bound(Lh, M, 2 * D) > theorem1_bound(Lh, M, D))
          ++halving;
        if (D < M && appendix_gap_lower_bound(Lh, M, D) > gap + 2)
          ++loose_bound;
      }
    }
  // empirical smallest L_hat with a strictly positive gap throughout
  long min_lh = -1;
  for (long Lh = 1; Lh <= 64 && min_lh < 0; ++Lh) {
    bool all_pos = true;
    for (long M = 2; M <= std::min<long>(Lh, 64) && all_pos; ++M)
      for (long D = 1; D <= M / 2 && all_pos; ++D)
        if (delta_gap(Lh, M, D) <= 0) all_pos = false;
    if (all_pos && Lh >= 2) min_lh = Lh;
  }
  detail = "violations neg=" + std::to_string(negatives) + " eq=" +
           std::to_string(equalities_off) + " halving=" +
           std::to_string(halving) + " bound=" + std::to_string(loose_bound) +
           "; smallest all-positive L_hat (two-block region) = " +
           std::to_string(min_lh);
  return negatives == 0 && equalities_off == 0 && halving == 0 &&
         loose_bound == 0;
}

bool check_uniqueness_oracle(std::uint64_t seed, std::string& detail) {
  Rng rng(derive_seed(seed, "verify_oracle", 0, 0));
  for (int rep = 0; rep < 20; ++rep) {
    const auto inst = make_uniqueness_instance(4, 8, 4, 3, rng);
    if (!brute_force_uniqueness(inst, 3)) {
      detail = "rank-saturated planted support not unique, rep " +
               std::to_string(rep);
      return false;
    }
  }
  const auto easy = make_uniqueness_instance(4, 8, 2, 1, rng);
  if (!brute_force_uniqueness(easy, 1)) {
    detail = "single planted row not unique";
    return false;
  }
  const auto full = make_uniqueness_instance(4, 8, 2, 4, rng);
  if (brute_force_uniqueness(full, 4)) {
    detail = "support of size L_hat reported unique";
    return false;
  }
  return true;
}

bool check_trial_determinism(std::uint64_t seed, std::string& detail) {
  SystemConfig cfg = profile_fast();
  cfg.M = 16;
  cfg.channel.M = 16;
  cfg.N_p = 8;
  cfg.L = 10;
  cfg.K = 3;
  cfg.t_m = 1;
  cfg.solver.max_iters = 40;
  cfg.pool_seed = derive_seed(seed, "verify_rep", 0, 0);
  const std::uint64_t ts = derive_seed(seed, "verify_rep", 1, 0);
  const TrialOutcome a = run_trial(cfg, SolverId::ce_sbl, ts);
  const TrialOutcome b = run_trial(cfg, SolverId::ce_sbl, ts);
  detail = "mu_ad " + num(a.score.mu_ad) + ", iters " +
           std::to_string(a.iterations);
  return a.score.mu_ad == b.score.mu_ad &&
         a.score.nmse_ce_db == b.score.nmse_ce_db &&
         a.score.detected_count == b.score.detected_count &&
         a.score.false_rows == b.score.false_rows &&
         a.iterations == b.iterations && a.converged == b.converged;
}

bool check_sweep_csv(std::uint64_t seed, std::string& detail) {
  ExperimentSpec spec;
  spec.base = profile_fast();
  spec.base.M = 16;
  spec.base.channel.M = 16;
  spec.base.N_p = 8;
  spec.base.L = 10;
  spec.base.t_m = 1;
  spec.base.solver.max_iters = 30;
  spec.sweep = SweepParam::K;
  spec.values = {2, 3};
  spec.trials = 2;
  spec.seed = seed;
  const auto rows = run_sweep(spec);
  if (rows.size() != 4) {
    detail = "expected 4 rows, got " + std::to_string(rows.size());
    return false;
  }
  for (const SweepRow& r : rows)
    if (r.mu_ad_mean < 0.0 || r.mu_ad_mean > 1.0) {
      detail = "mu_ad out of range";
      return false;
    }
  const std::string text = csv_to_string(rows);
  const auto nl = text.find('\n');
  if (text.substr(0, nl) != kCsvHeader) {
    detail = "header mismatch";
    return false;
  }
  const auto again = run_sweep(spec);
  if (csv_to_string(again) != text) {
    detail = "rerun differs";
    return false;
  }
  detail = "4 rows, byte-stable rerun";
  return true;
}

}  // namespace

std::vector<CheckResult> run_verify_suite(std::uint64_t seed) {
  Suite s{seed, {}};
  s.run("pilot pool norms and file roundtrip",
        [&](std::string& d) { return check_pool(seed, d); });
  s.run("extended matrix structure",
        [&](std::string& d) { return check_extension(seed, d); });
  s.run("transform unitarity", [&](std::string& d) { return check_dft(d); });
  s.run("steering vector anchors",
        [&](std::string& d) { return check_steering(d); });
  s.run("channel energy calibration",
        [&](std::string& d) { return check_channel_energy(seed, d); });
  s.run("snr calibration", [&](std::string& d) { return check_snr(seed, d); });
  s.run("realified system consistency",
        [&](std::string& d) { return check_realify(seed, d); });
  s.run("posterior normal equations",
        [&](std::string& d) { return check_posterior(seed, d); });
  s.run("complex fast path vs dense recursion",
        [&](std::string& d) { return check_estep_agreement(seed, d); });
  s.run("jensen dominance sampling",
        [&](std::string& d) { return check_jensen(seed, d); });
  s.run("noiseless toy recovery",
        [&](std::string& d) { return check_noiseless_toy(seed, d); });
  s.run("cluster partition properties",
        [&](std::string& d) { return check_detector_partition(seed, d); });
  s.run("capacity bound scan",
        [&](std::string& d) { return check_capacity_scan(d); });
  s.run("uniqueness oracle anchors",
        [&](std::string& d) { return check_uniqueness_oracle(seed, d); });
  s.run("trial determinism",
        [&](std::string& d) { return check_trial_determinism(seed, d); });
  s.run("sweep bookkeeping and csv",
        [&](std::string& d) { return check_sweep_csv(seed, d); });
  return s.results;
}

}  // namespace cesbl
