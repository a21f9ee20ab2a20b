#pragma once

#include <set>
#include <vector>

#include "cesbl/channel.hpp"
#include "cesbl/pilot.hpp"
#include "cesbl/types.hpp"

namespace cesbl {

struct GroundTruth {
  std::vector<UserRealization> users;
  MatC D_hat;  // N_hat x M, antenna domain
  MatC X_hat;  // N_hat x M, delay-angle domain, X_hat = D_hat * Psi
  std::set<Index> support_rows;
};

struct Measurement {
  MatC Y_hat;          // L_hat x M
  double sigma2 = 0.0; // per complex entry; 0 when snr_db is infinite
  double snr_db = 0.0;
};

// Stacked real view of the complex system. Rows i and i + n_logical of the
// unknown are the real and imaginary parts of complex unknown i when paired.
struct RealSystem {
  MatX A;  // [[Re S, -Im S], [Im S, Re S]] when paired
  MatX Y;
  Index n_logical = 0;
  bool paired = false;
};

// Unitary DFT: entry (m, n) = exp(-i 2 pi m n / M) / sqrt(M).
MatC dft_transform_matrix(Index M);

GroundTruth assemble_ground_truth(std::vector<UserRealization> users,
                                  const ExtendedPilotMatrix& ext, int M);

// Y = S * X_hat + noise. sigma2 = P_sig * 10^(-snr_db/10) with P_sig the mean
// per-entry power of S * X_hat; snr_db = +inf gives a noiseless measurement.
Measurement synthesize_received(const ExtendedPilotMatrix& ext,
                                const GroundTruth& truth, double snr_db,
                                Rng& rng);

RealSystem realify(const MatC& S, const MatC& Y);

// wrap an arbitrary real system (no real/imag pairing)
RealSystem make_real_system(MatX A, MatX Y);

MatC complex_from_stacked(const MatX& X);  // top half + i * bottom half
MatX stack_complex(const MatC& X);

}  // namespace cesbl
