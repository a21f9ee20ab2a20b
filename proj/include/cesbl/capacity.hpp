#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cesbl/types.hpp"

namespace cesbl {

// ceil((L_hat + M_meas)/2) - 1; requires 1 <= M_meas <= L_hat
long lemma1_bound(long L_hat, long M_meas);

// floor(M_cols/D) * (ceil((L_hat + D)/2) - 1); requires 1 <= D <= M_cols
long theorem1_bound(long L_hat, long M_cols, long D);

// theorem1_bound - lemma1_bound with M_meas = M_cols (so M_cols <= L_hat)
long delta_gap(long L_hat, long M_cols, long D);

// algebraic lower bound on delta_gap from the floor/ceiling relaxation,
// (M/(2D))(L_hat-2) - L_hat - D/2 + 1; holds up to integer slack and can go
// negative when M/D is small
double appendix_gap_lower_bound(long L_hat, long M_cols, long D);

struct UniquenessInstance {
  MatX A;  // L_hat x N, real Gaussian
  MatX X;  // planted N x M_meas, row-sparse
  MatX Y;  // A * X, noiseless
  std::vector<Index> support;  // planted rows, ascending
};

UniquenessInstance make_uniqueness_instance(Index L_hat, Index N, Index M_meas,
                                            Index r, Rng& rng);

// Enumerates every row support of size <= r_max and least-squares fits it to
// Y. True iff every exact fit reproduces the planted solution. Throws
// budget_error when the support count exceeds comb_cap.
bool brute_force_uniqueness(const UniquenessInstance& inst, Index r_max,
                            double tol_rel = 1e-8,
                            std::uint64_t comb_cap = 2000000);

// (start, width) for the floor(M_cols/D) width-D column groups used by the
// block decomposition argument; trailing remainder columns are not covered
std::vector<std::pair<Index, Index>> column_blocks(Index M_cols, Index D);

}  // namespace cesbl
