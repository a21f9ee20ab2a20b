#pragma once

#include <iosfwd>
#include <vector>

#include "cesbl/airlink.hpp"
#include "cesbl/types.hpp"

namespace cesbl {

struct SolverConfig {
  double a = 30.0;       // Gamma shape for the row hyperparameters
  double b = 1e-4;       // Gamma rate for the row hyperparameters
  double c = 0.125;      // Gamma shape for the per-entry hyperparameters
  double d = 1e-4;       // Gamma rate for the per-entry hyperparameters
  double lambda = 0.01;  // row/cluster trade-off in [0, 1]
  double kappa = 0.1;    // neighbour coupling, > 0
  double sigma2 = 1e-2;  // per-entry variance of the stacked real noise
  double tol = 1e-8;     // threshold on ||X_next - X||_F^2
  int max_iters = 500;
};

void validate(const SolverConfig& cfg);

struct IterStat {
  double delta_x;
  double alpha_min, alpha_max;
  double beta_min, beta_max;
};

struct SolverResult {
  MatX X;  // stacked real estimate, A.cols() x M
  std::vector<IterStat> trace;
  int iterations = 0;
  bool converged = false;
};

// Posterior moments of one column: Omega = (A'A / sigma2 + diag(gamma))^-1,
// mu = Omega A' y / sigma2, phi = diag(Omega). gamma holds one precision per
// column of A (already expanded across any real/imag pairing).
void posterior_stats(const MatX& A, const VecX& y, const VecX& gamma,
                     double sigma2, VecX& mu, VecX& phi);

// Logical second moments E[x^2] = mu^2 + phi. When mu has 2 * n_logical rows
// the two rows backing one complex unknown are averaged, so the plain real
// case reduces to the unpaired formulas.
MatX second_moments(const MatX& mu, const MatX& phi, Index n_logical);

// q(i, j) = kappa E(i, j-1) + E(i, j) + kappa E(i, j+1), circular in j.
MatX coupled_moments(const MatX& E, double kappa);

VecX alpha_from_moments(const VecX& v, const SolverConfig& cfg);
MatX beta_from_moments(const MatX& q, const SolverConfig& cfg);

VecX update_alpha(const MatX& mu, const MatX& phi, Index n_logical,
                  const SolverConfig& cfg);
MatX update_beta(const MatX& mu, const MatX& phi, Index n_logical,
                 const SolverConfig& cfg);

// gamma(i, j)^-1 = lambda / alpha(i) + (1 - lambda) / (kappa beta(i, j-1) +
// beta(i, j) + kappa beta(i, j+1)), circular in j.
MatX combine_gamma(const VecX& alpha, const MatX& beta, const SolverConfig& cfg);

struct JensenGap {
  double exact;   // (lambda / alpha + (1 - lambda) / beta_tilde)^-1
  double approx;  // alpha / (4 lambda) + beta_tilde / (4 (1 - lambda))
};

JensenGap jensen_gap(double alpha, double beta_tilde, double lambda);

// Weighted-prior solver: per-column posteriors against gamma, then the
// closed-form alpha/beta/gamma refresh, iterated until ||dX||^2 < tol.
SolverResult ce_sbl(const RealSystem& sys, const SolverConfig& cfg);

// Row-sparse baseline: one prior variance per logical row shared by all
// columns, refreshed as the mean posterior second moment of the row.
SolverResult m_sbl(const RealSystem& sys, const SolverConfig& cfg);

// iteration trace as comma-separated rows
void dump_trace(std::ostream& os, const SolverResult& res);

}  // namespace cesbl
