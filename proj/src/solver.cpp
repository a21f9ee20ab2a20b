#include "cesbl/solver.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace cesbl {

void validate(const SolverConfig& cfg) {
  if (cfg.a <= 0 || cfg.b <= 0 || cfg.c <= 0 || cfg.d <= 0)
    throw config_error("solver: a, b, c, d must be positive");
  if (cfg.lambda < 0.0 || cfg.lambda > 1.0)
    throw config_error("solver: lambda must lie in [0, 1]");
  if (cfg.kappa <= 0.0) throw config_error("solver: kappa must be positive");
  if (cfg.sigma2 <= 0.0) throw config_error("solver: sigma2 must be positive");
  if (cfg.tol <= 0.0) throw config_error("solver: tol must be positive");
  if (cfg.max_iters < 1) throw config_error("solver: max_iters must be >= 1");
}

void posterior_stats(const MatX& A, const VecX& y, const VecX& gamma,
                     double sigma2, VecX& mu, VecX& phi) {
  if (gamma.size() != A.cols() || y.size() != A.rows())
    throw config_error("posterior_stats: dimension mismatch");
  if (sigma2 <= 0.0) throw config_error("posterior_stats: sigma2 must be positive");
  if ((gamma.array() <= 0.0).any())
    throw config_error("posterior_stats: gamma must be positive");
  MatX P = (A.transpose() * A) / sigma2;
  P.diagonal() += gamma;
  Eigen::LLT<MatX> llt(P);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("posterior_stats: factorization failed");
  mu = llt.solve(A.transpose() * y) / sigma2;
  const MatX inv = llt.solve(MatX::Identity(P.rows(), P.cols()));
  phi = inv.diagonal();
}

MatX second_moments(const MatX& mu, const MatX& phi, Index n_logical) {
  if (mu.rows() == n_logical) return mu.array().square().matrix() + phi;
  if (mu.rows() != 2 * n_logical)
    throw config_error("second_moments: rows must be n_logical or 2 n_logical");
  const Index n = n_logical;
  return ((mu.topRows(n).array().square() + phi.topRows(n).array() +
           mu.bottomRows(n).array().square() + phi.bottomRows(n).array()) /
          2.0)
      .matrix();
}

MatX coupled_moments(const MatX& E, double kappa) {
  const Index M = E.cols();
  MatX q(E.rows(), M);
  for (Index j = 0; j < M; ++j) {
    const Index jm = (j + M - 1) % M, jp = (j + 1) % M;
    q.col(j) = kappa * E.col(jm) + E.col(j) + kappa * E.col(jp);
  }
  return q;
}

VecX alpha_from_moments(const VecX& v, const SolverConfig& cfg) {
  if (cfg.lambda <= 0.0)
    throw config_error("alpha update needs lambda > 0");
  return (8.0 * cfg.a + 2.0) /
         (8.0 * cfg.b + v.array() / cfg.lambda);
}

MatX beta_from_moments(const MatX& q, const SolverConfig& cfg) {
  if (cfg.lambda >= 1.0)
    throw config_error("beta update undefined at lambda = 1; use the row-sparse path");
  return 8.0 * cfg.c /
         (8.0 * cfg.d + q.array() / (1.0 - cfg.lambda));
}

VecX update_alpha(const MatX& mu, const MatX& phi, Index n_logical,
                  const SolverConfig& cfg) {
  const MatX E = second_moments(mu, phi, n_logical);
  return alpha_from_moments(E.rowwise().mean(), cfg);
}

MatX update_beta(const MatX& mu, const MatX& phi, Index n_logical,
                 const SolverConfig& cfg) {
  if (cfg.kappa <= 0.0) throw config_error("beta update needs kappa > 0");
  const MatX E = second_moments(mu, phi, n_logical);
  return beta_from_moments(coupled_moments(E, cfg.kappa), cfg);
}

MatX combine_gamma(const VecX& alpha, const MatX& beta, const SolverConfig& cfg) {
  const Index n = beta.rows(), M = beta.cols();
  MatX inv = MatX::Zero(n, M);
  if (cfg.lambda > 0.0)
    inv.colwise() += (cfg.lambda * alpha.array().inverse()).matrix();
  if (cfg.lambda < 1.0) {
    for (Index j = 0; j < M; ++j) {
      const Index jm = (j + M - 1) % M, jp = (j + 1) % M;
      const VecX bt = cfg.kappa * beta.col(jm) + beta.col(j) + cfg.kappa * beta.col(jp);
      inv.col(j) += ((1.0 - cfg.lambda) * bt.array().inverse()).matrix();
    }
  }
  return inv.array().inverse();
}

JensenGap jensen_gap(double alpha, double beta_tilde, double lambda) {
  if (alpha <= 0.0 || beta_tilde <= 0.0 || lambda <= 0.0 || lambda >= 1.0)
    throw config_error("jensen_gap: needs positive inputs and lambda in (0, 1)");
  JensenGap g;
  g.exact = 1.0 / (lambda / alpha + (1.0 - lambda) / beta_tilde);
  g.approx = alpha / (4.0 * lambda) + beta_tilde / (4.0 * (1.0 - lambda));
  return g;
}

namespace {

// Per-column posterior engine. A paired system whose blocks match the
// realified layout exactly is solved in complex arithmetic, which halves the
// flop count; either way the produced moments equal the stacked real ones.
// The Woodbury form is used whenever the measurement side is the short one.
class EStep {
 public:
  EStep(const RealSystem& sys, double sigma2) : sys_(sys), sigma2_(sigma2) {
    const Index n = sys.n_logical;
    if (sys.paired && sys.A.cols() == 2 * n && sys.A.rows() % 2 == 0) {
      const Index L = sys.A.rows() / 2;
      auto TL = sys.A.topLeftCorner(L, n);
      auto TR = sys.A.topRightCorner(L, n);
      auto BL = sys.A.bottomLeftCorner(L, n);
      auto BR = sys.A.bottomRightCorner(L, n);
      if ((TL.array() == BR.array()).all() &&
          (TR.array() == (-BL).array()).all()) {
        complex_ok_ = true;
        S_.resize(L, n);
        S_.real() = TL;
        S_.imag() = BL;
        Yc_.resize(L, sys.Y.cols());
        Yc_.real() = sys.Y.topRows(L);
        Yc_.imag() = sys.Y.bottomRows(L);
        woodbury_ = L <= n;
        if (!woodbury_) StS_ = S_.adjoint() * S_;
      }
    }
    if (!complex_ok_) {
      woodbury_ = sys.A.rows() < sys.A.cols();
      if (!woodbury_) AtA_ = sys.A.transpose() * sys.A;
    }
  }

  // one precision column per measurement column
  void run(const MatX& gamma, MatX& mu, MatX& phi) {
    const Index M = sys_.Y.cols();
    for (Index j = 0; j < M; ++j) {
      if (complex_ok_) {
        column_complex(gamma.col(j), Yc_.col(j));
        const Index n = sys_.n_logical;
        mu.col(j).head(n) = mu_c_.real();
        mu.col(j).tail(n) = mu_c_.imag();
        phi.col(j).head(n) = phi_c_;
        phi.col(j).tail(n) = phi_c_;
      } else {
        column_real(gamma.col(j), sys_.Y.col(j));
        mu.col(j) = mu_r_;
        phi.col(j) = phi_r_;
      }
    }
  }

  // one precision vector shared by every column; factor once
  void run_shared(const VecX& gamma, MatX& mu, MatX& phi) {
    const Index M = sys_.Y.cols();
    if (complex_ok_) {
      const Index n = sys_.n_logical;
      MatC Mu;
      if (woodbury_) {
        const VecX w = gamma.cwiseInverse();
        factor_complex_woodbury(w);
        const MatC U = llt_c_.solve(Yc_);
        Mu = w.cast<cplx>().asDiagonal() * (S_.adjoint() * U);
        woodbury_phi_complex(w);
      } else {
        MatC P = StS_ / sigma2_;
        P.diagonal() += gamma.cast<cplx>();
        llt_c_.compute(P);
        Mu = llt_c_.solve(S_.adjoint() * Yc_) / sigma2_;
        const MatC inv = llt_c_.solve(MatC::Identity(n, n));
        phi_c_ = inv.diagonal().real().cwiseMax(0.0);
      }
      mu.topRows(n) = Mu.real();
      mu.bottomRows(n) = Mu.imag();
      for (Index j = 0; j < M; ++j) {
        phi.col(j).head(n) = phi_c_;
        phi.col(j).tail(n) = phi_c_;
      }
    } else {
      const Index n = sys_.A.cols();
      if (woodbury_) {
        const VecX w = gamma.cwiseInverse();
        factor_real_woodbury(w);
        const MatX U = llt_r_.solve(sys_.Y);
        mu = ((sys_.A.transpose() * U).array().colwise() * w.array()).matrix();
        woodbury_phi_real(w);
      } else {
        MatX P = AtA_ / sigma2_;
        P.diagonal() += gamma;
        llt_r_.compute(P);
        mu = llt_r_.solve(sys_.A.transpose() * sys_.Y) / sigma2_;
        const MatX inv = llt_r_.solve(MatX::Identity(n, n));
        phi_r_ = inv.diagonal().cwiseMax(0.0);
      }
      for (Index j = 0; j < M; ++j) phi.col(j) = phi_r_;
    }
  }

 private:
  void factor_complex_woodbury(const VecX& w) {
    const Index L = S_.rows();
    T0_c_ = S_ * w.cwiseSqrt().asDiagonal();
    B_c_ = MatC::Zero(L, L);
    B_c_.diagonal().setConstant(sigma2_);
    B_c_.selfadjointView<Eigen::Lower>().rankUpdate(T0_c_);
    llt_c_.compute(B_c_);
  }

  void woodbury_phi_complex(const VecX& w) {
    const MatC T = llt_c_.matrixL().solve(T0_c_);
    phi_c_ = (w.array() *
              (1.0 - T.colwise().squaredNorm().transpose().array()))
                 .cwiseMax(0.0);
  }

  void factor_real_woodbury(const VecX& w) {
    const Index R = sys_.A.rows();
    T0_r_ = sys_.A * w.cwiseSqrt().asDiagonal();
    B_r_ = MatX::Zero(R, R);
    B_r_.diagonal().setConstant(sigma2_);
    B_r_.selfadjointView<Eigen::Lower>().rankUpdate(T0_r_);
    llt_r_.compute(B_r_);
  }

  void woodbury_phi_real(const VecX& w) {
    const MatX T = llt_r_.matrixL().solve(T0_r_);
    phi_r_ = (w.array() *
              (1.0 - T.colwise().squaredNorm().transpose().array()))
                 .cwiseMax(0.0);
  }

  void column_complex(const VecX& gamma, const VecC& y) {
    const Index n = S_.cols();
    if (woodbury_) {
      const VecX w = gamma.cwiseInverse();
      factor_complex_woodbury(w);
      const VecC u = llt_c_.solve(y);
      mu_c_ = ((S_.adjoint() * u).array() * w.array()).matrix();
      woodbury_phi_complex(w);
    } else {
      MatC P = StS_ / sigma2_;
      P.diagonal() += gamma.cast<cplx>();
      llt_c_.compute(P);
      mu_c_ = llt_c_.solve(S_.adjoint() * y) / sigma2_;
      const MatC inv = llt_c_.solve(MatC::Identity(n, n));
      phi_c_ = inv.diagonal().real().cwiseMax(0.0);
    }
  }

  void column_real(const VecX& gamma, const VecX& y) {
    if (woodbury_) {
      const VecX w = gamma.cwiseInverse();
      factor_real_woodbury(w);
      const VecX u = llt_r_.solve(y);
      mu_r_ = ((sys_.A.transpose() * u).array() * w.array()).matrix();
      woodbury_phi_real(w);
    } else {
      posterior_stats(sys_.A, y, gamma, sigma2_, mu_r_, phi_r_);
    }
  }

  const RealSystem& sys_;
  double sigma2_;
  bool complex_ok_ = false;
  bool woodbury_ = false;
  MatC S_, Yc_, StS_, T0_c_, B_c_;
  MatX AtA_, T0_r_, B_r_;
  Eigen::LLT<MatC> llt_c_;
  Eigen::LLT<MatX> llt_r_;
  VecC mu_c_;
  VecX phi_c_, mu_r_, phi_r_;
};

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

}  // namespace

SolverResult ce_sbl(const RealSystem& sys, const SolverConfig& cfg) {
  validate(cfg);
  const Index n = sys.n_logical, M = sys.Y.cols(), rows = sys.A.cols();
  VecX alpha = VecX::Ones(n);
  MatX beta = MatX::Ones(n, M);
  MatX gamma = MatX::Ones(n, M);
  MatX mu = MatX::Zero(rows, M), phi = MatX::Zero(rows, M);
  MatX x_prev = MatX::Zero(rows, M);
  SolverResult res;
  EStep estep(sys, cfg.sigma2);
  for (int it = 0; it < cfg.max_iters; ++it) {
    estep.run(gamma, mu, phi);
    res.iterations = it + 1;
    const double delta = (mu - x_prev).squaredNorm();
    res.trace.push_back({delta, alpha.minCoeff(), alpha.maxCoeff(),
                         beta.minCoeff(), beta.maxCoeff()});
    if (delta < cfg.tol) {
      res.converged = true;
      break;
    }
    x_prev = mu;
    const MatX E = second_moments(mu, phi, n);
    if (cfg.lambda > 0.0) alpha = alpha_from_moments(E.rowwise().mean(), cfg);
    if (cfg.lambda < 1.0) beta = beta_from_moments(coupled_moments(E, cfg.kappa), cfg);
    gamma = combine_gamma(alpha, beta, cfg);
  }
  res.X = std::move(mu);
  return res;
}

SolverResult m_sbl(const RealSystem& sys, const SolverConfig& cfg) {
  validate(cfg);
  const Index n = sys.n_logical, M = sys.Y.cols(), rows = sys.A.cols();
  VecX gvar = VecX::Ones(n);  // prior variances, one per logical row
  MatX mu = MatX::Zero(rows, M), phi = MatX::Zero(rows, M);
  MatX x_prev = MatX::Zero(rows, M);
  SolverResult res;
  EStep estep(sys, cfg.sigma2);
  for (int it = 0; it < cfg.max_iters; ++it) {
    estep.run_shared(gvar.cwiseInverse(), mu, phi);
    res.iterations = it + 1;
    const double delta = (mu - x_prev).squaredNorm();
    res.trace.push_back({delta, gvar.minCoeff(), gvar.maxCoeff(), kNan, kNan});
    if (delta < cfg.tol) {
      res.converged = true;
      break;
    }
    x_prev = mu;
    gvar = second_moments(mu, phi, n).rowwise().mean();
  }
  res.X = std::move(mu);
  return res;
}

void dump_trace(std::ostream& os, const SolverResult& res) {
  os << "iter,delta_x,alpha_min,alpha_max,beta_min,beta_max\n";
  char buf[192];
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    const IterStat& s = res.trace[i];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  i + 1, s.delta_x, s.alpha_min, s.alpha_max, s.beta_min,
                  s.beta_max);
    os << buf;
  }
}

}  // namespace cesbl
