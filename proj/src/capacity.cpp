#include "cesbl/capacity.hpp"

#include <Eigen/QR>
#include <algorithm>

namespace cesbl {

long lemma1_bound(long L_hat, long M_meas) {
  if (L_hat < 1 || M_meas < 1 || M_meas > L_hat)
    throw config_error("lemma1_bound: needs 1 <= M_meas <= L_hat");
  return (L_hat + M_meas + 1) / 2 - 1;
}

long theorem1_bound(long L_hat, long M_cols, long D) {
  if (L_hat < 1 || M_cols < 1 || D < 1 || D > M_cols)
    throw config_error("theorem1_bound: needs 1 <= D <= M_cols");
  return (M_cols / D) * ((L_hat + D + 1) / 2 - 1);
}

long delta_gap(long L_hat, long M_cols, long D) {
  return theorem1_bound(L_hat, M_cols, D) - lemma1_bound(L_hat, M_cols);
}

double appendix_gap_lower_bound(long L_hat, long M_cols, long D) {
  if (L_hat < 1 || M_cols < 1 || D < 1 || D > M_cols)
    throw config_error("appendix_gap_lower_bound: needs 1 <= D <= M_cols");
  const double Lh = static_cast<double>(L_hat);
  const double M = static_cast<double>(M_cols);
  const double Dd = static_cast<double>(D);
  return M / (2.0 * Dd) * (Lh - 2.0) - Lh - Dd / 2.0 + 1.0;
}

UniquenessInstance make_uniqueness_instance(Index L_hat, Index N, Index M_meas,
                                            Index r, Rng& rng) {
  if (L_hat < 1 || N < 1 || M_meas < 1)
    throw config_error("make_uniqueness_instance: dimensions must be positive");
  if (r < 1 || r > N)
    throw config_error("make_uniqueness_instance: needs 1 <= r <= N");
  UniquenessInstance inst;
  inst.A.resize(L_hat, N);
  for (Index j = 0; j < N; ++j)
    for (Index i = 0; i < L_hat; ++i) inst.A(i, j) = rng.normal();
  // partial Fisher-Yates for the planted rows
  std::vector<Index> pool(N);
  for (Index i = 0; i < N; ++i) pool[i] = i;
  for (Index i = 0; i < r; ++i) {
    const Index j = i + static_cast<Index>(rng.uniform_int(N - i));
    std::swap(pool[i], pool[j]);
  }
  inst.support.assign(pool.begin(), pool.begin() + r);
  std::sort(inst.support.begin(), inst.support.end());
  inst.X = MatX::Zero(N, M_meas);
  for (Index s : inst.support)
    for (Index j = 0; j < M_meas; ++j) inst.X(s, j) = rng.normal();
  inst.Y = inst.A * inst.X;
  return inst;
}

namespace {

std::uint64_t choose_capped(std::uint64_t n, std::uint64_t k,
                            std::uint64_t cap) {
  if (k > n) return 0;
  std::uint64_t c = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    c = c * (n - k + i) / i;  // exact: product of i consecutives divisible
    if (c > cap) return cap + 1;
  }
  return c;
}

}  // namespace

bool brute_force_uniqueness(const UniquenessInstance& inst, Index r_max,
                            double tol_rel, std::uint64_t comb_cap) {
  const Index N = inst.A.cols();
  if (r_max < 1 || r_max > N)
    throw config_error("brute_force_uniqueness: needs 1 <= r_max <= N");
  std::uint64_t total = 0;
  for (Index k = 1; k <= r_max; ++k) {
    total += choose_capped(N, k, comb_cap);
    if (total > comb_cap)
      throw budget_error("brute_force_uniqueness: support count over cap");
  }
  const double y_norm = inst.Y.norm();
  const double x_norm = inst.X.norm();
  const double fit_tol = tol_rel * std::max(y_norm, 1e-300);
  std::vector<Index> comb;
  MatX As, Xs, Xfull;
  for (Index k = 1; k <= r_max; ++k) {
    comb.resize(k);
    for (Index i = 0; i < k; ++i) comb[i] = i;
    while (true) {
      As.resize(inst.A.rows(), k);
      for (Index i = 0; i < k; ++i) As.col(i) = inst.A.col(comb[i]);
      Eigen::ColPivHouseholderQR<MatX> qr(As);
      Xs = qr.solve(inst.Y);
      if ((As * Xs - inst.Y).norm() <= fit_tol) {
        Xfull = MatX::Zero(N, inst.Y.cols());
        for (Index i = 0; i < k; ++i) Xfull.row(comb[i]) = Xs.row(i);
        if ((Xfull - inst.X).norm() > 1e-6 * std::max(x_norm, 1e-300))
          return false;  // a genuinely different exact fit
      }
      // next combination
      Index pos = k - 1;
      while (pos >= 0 && comb[pos] == N - k + pos) --pos;
      if (pos < 0) break;
      ++comb[pos];
      for (Index i = pos + 1; i < k; ++i) comb[i] = comb[i - 1] + 1;
    }
  }
  return true;
}

std::vector<std::pair<Index, Index>> column_blocks(Index M_cols, Index D) {
  if (D < 1 || D > M_cols) throw config_error("column_blocks: needs 1 <= D <= M_cols");
  std::vector<std::pair<Index, Index>> blocks;
  for (Index s = 0; s + D <= M_cols; s += D) blocks.emplace_back(s, D);
  return blocks;
}

}  // namespace cesbl
