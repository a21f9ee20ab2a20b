#include "cesbl/airlink.hpp"

#include <cmath>

namespace cesbl {

MatC dft_transform_matrix(Index M) {
  if (M < 1) throw config_error("dft_transform_matrix: M must be >= 1");
  MatC psi(M, M);
  const double scale = 1.0 / std::sqrt(static_cast<double>(M));
  for (Index m = 0; m < M; ++m)
    for (Index n = 0; n < M; ++n) {
      // reduce m*n mod M first so the angle stays small and exact
      const double ph = -2.0 * std::numbers::pi * static_cast<double>((m * n) % M) / static_cast<double>(M);
      psi(m, n) = scale * cplx(std::cos(ph), std::sin(ph));
    }
  return psi;
}

GroundTruth assemble_ground_truth(std::vector<UserRealization> users,
                                  const ExtendedPilotMatrix& ext, int M) {
  if (users.empty()) throw config_error("assemble_ground_truth: no users");
  GroundTruth truth;
  truth.D_hat = MatC::Zero(ext.n_hat(), M);
  for (const auto& u : users) {
    const Index row = ext.col_index(u.pilot_index, u.frame_delay);
    truth.D_hat.row(row) += u.channel.transpose();
    truth.support_rows.insert(row);
  }
  truth.X_hat = truth.D_hat * dft_transform_matrix(M);
  truth.users = std::move(users);
  return truth;
}

Measurement synthesize_received(const ExtendedPilotMatrix& ext,
                                const GroundTruth& truth, double snr_db,
                                Rng& rng) {
  Measurement meas;
  meas.snr_db = snr_db;
  MatC clean = ext.matrix * truth.X_hat;
  const double p_sig = clean.squaredNorm() / static_cast<double>(clean.size());
  if (p_sig <= 0.0)
    throw config_error("synthesize_received: signal is identically zero");
  if (std::isinf(snr_db)) {
    meas.sigma2 = 0.0;
    meas.Y_hat = std::move(clean);
    return meas;
  }
  meas.sigma2 = p_sig * std::pow(10.0, -snr_db / 10.0);
  const double amp = std::sqrt(meas.sigma2);
  meas.Y_hat = std::move(clean);
  for (Index j = 0; j < meas.Y_hat.cols(); ++j)
    for (Index i = 0; i < meas.Y_hat.rows(); ++i)
      meas.Y_hat(i, j) += amp * rng.cnormal();
  return meas;
}

RealSystem realify(const MatC& S, const MatC& Y) {
  if (S.rows() != Y.rows()) throw config_error("realify: row mismatch");
  RealSystem sys;
  const Index L = S.rows(), N = S.cols(), M = Y.cols();
  sys.A.resize(2 * L, 2 * N);
  sys.A.topLeftCorner(L, N) = S.real();
  sys.A.topRightCorner(L, N) = -S.imag();
  sys.A.bottomLeftCorner(L, N) = S.imag();
  sys.A.bottomRightCorner(L, N) = S.real();
  sys.Y.resize(2 * L, M);
  sys.Y.topRows(L) = Y.real();
  sys.Y.bottomRows(L) = Y.imag();
  sys.n_logical = N;
  sys.paired = true;
  return sys;
}

RealSystem make_real_system(MatX A, MatX Y) {
  if (A.rows() != Y.rows()) throw config_error("make_real_system: row mismatch");
  RealSystem sys;
  sys.n_logical = A.cols();
  sys.A = std::move(A);
  sys.Y = std::move(Y);
  sys.paired = false;
  return sys;
}

MatC complex_from_stacked(const MatX& X) {
  if (X.rows() % 2 != 0) throw config_error("complex_from_stacked: odd row count");
  const Index n = X.rows() / 2;
  MatC out(n, X.cols());
  out.real() = X.topRows(n);
  out.imag() = X.bottomRows(n);
  return out;
}

MatX stack_complex(const MatC& X) {
  MatX out(2 * X.rows(), X.cols());
  out.topRows(X.rows()) = X.real();
  out.bottomRows(X.rows()) = X.imag();
  return out;
}

}  // namespace cesbl
