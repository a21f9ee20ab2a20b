#pragma once

#include <string>
#include <utility>

#include "cesbl/types.hpp"

namespace cesbl {

// Common pilot pool shared by all users. Columns are unit-norm.
struct PilotPool {
  MatC pilots;  // L x N_p
  std::uint64_t seed = 0;

  Index length() const { return pilots.rows(); }
  Index count() const { return pilots.cols(); }
};

// Sensing matrix holding every zero-padded delay shift of every pilot.
// Columns are ordered pilot-major: column j = pilot * (t_m + 1) + delay.
struct ExtendedPilotMatrix {
  MatC matrix;  // L_hat x N_hat, L_hat = L + t_m, N_hat = N_p * (t_m + 1)
  int t_m = 0;

  Index l_hat() const { return matrix.rows(); }
  Index n_hat() const { return matrix.cols(); }

  std::pair<int, int> row_map(Index j) const;  // j -> (pilot, delay)
  Index col_index(int pilot, int delay) const {
    return static_cast<Index>(pilot) * (t_m + 1) + delay;
  }
};

PilotPool generate_pilot_pool(Index L, Index N_p, std::uint64_t seed);

// [t zeros; s; (t_m - t) zeros]
VecC extend_pilot(const VecC& s, int t, int t_m);

ExtendedPilotMatrix build_extended_matrix(const PilotPool& pool, int t_m);

// Binary snapshot: 8-byte magic, u32 L, u32 N_p, then little-endian doubles
// as (re, im) pairs in column-major order.
void save_pool(const PilotPool& pool, const std::string& path);
PilotPool load_pool(const std::string& path);

}  // namespace cesbl
