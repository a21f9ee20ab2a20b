#pragma once

#include <iosfwd>
#include <vector>

#include "cesbl/types.hpp"

namespace cesbl {

struct ChannelParams {
  int M = 64;                          // ULA antenna count
  int L_path = 16;                     // paths per user
  double delta_deg = 15.0;             // maximum angular spread, degrees
  double L_cp = 64.0;                  // cyclic prefix length, symbols
  double bandwidth_hz = 1.4e6;
  double antenna_spacing_ratio = 0.5;  // d / lambda
};

void validate(const ChannelParams& p);

struct PathComponent {
  cplx gain;         // CN(0,1)
  double angle;      // physical AOA, radians
  double tap_delay;  // seconds, uniform on [0, L_cp / B)
};

struct UserRealization {
  int pilot_index = 0;
  int frame_delay = 0;        // symbols in [0, t_m]
  double center_angle = 0.0;  // radians
  std::vector<PathComponent> paths;
  VecC channel;  // length M
};

// ULA steering vector: entry m = exp(-i 2 pi m (d/lambda) sin(angle)).
VecC array_response(double angle, Index M, double spacing_ratio);

UserRealization draw_user(const ChannelParams& p, int N_p, int t_m, Rng& rng);

std::vector<UserRealization> sample_actives(int K, const ChannelParams& p,
                                            int N_p, int t_m, Rng& rng);

// One user per line: pilot, delay, center angle, channel as re/im pairs.
void dump_ground_truth(std::ostream& os, const std::vector<UserRealization>& users);

}  // namespace cesbl
