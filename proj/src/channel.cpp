#include "cesbl/channel.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace cesbl {

void validate(const ChannelParams& p) {
  if (p.M < 1) throw config_error("channel: M must be >= 1");
  if (p.L_path < 1) throw config_error("channel: L_path must be >= 1");
  if (p.delta_deg < 0.0 || p.delta_deg >= 90.0)
    throw config_error("channel: delta_deg must lie in [0, 90)");
  if (p.antenna_spacing_ratio <= 0.0)
    throw config_error("channel: antenna spacing ratio must be positive");
  if (p.L_cp < 0.0 || p.bandwidth_hz <= 0.0)
    throw config_error("channel: L_cp must be >= 0 and bandwidth positive");
}

VecC array_response(double angle, Index M, double spacing_ratio) {
  VecC a(M);
  const double step = -2.0 * std::numbers::pi * spacing_ratio * std::sin(angle);
  for (Index m = 0; m < M; ++m) {
    const double ph = step * static_cast<double>(m);
    a(m) = cplx(std::cos(ph), std::sin(ph));
  }
  return a;
}

UserRealization draw_user(const ChannelParams& p, int N_p, int t_m, Rng& rng) {
  UserRealization u;
  u.pilot_index = rng.uniform_int(N_p);
  u.frame_delay = rng.uniform_int(t_m + 1);
  const double half_pi = std::numbers::pi / 2.0;
  const double delta = p.delta_deg * std::numbers::pi / 180.0;
  u.center_angle = rng.uniform(-half_pi + delta, half_pi - delta);
  u.paths.resize(p.L_path);
  u.channel = VecC::Zero(p.M);
  const double tap_max = p.L_cp / p.bandwidth_hz;
  for (auto& path : u.paths) {
    path.angle = rng.uniform(u.center_angle - delta, u.center_angle + delta);
    path.gain = rng.cnormal();
    path.tap_delay = rng.uniform(0.0, tap_max);
    const double ph = std::numbers::pi * path.tap_delay * p.bandwidth_hz;
    const cplx rot(std::cos(ph), std::sin(ph));
    u.channel += path.gain * rot * array_response(path.angle, p.M, p.antenna_spacing_ratio);
  }
  return u;
}

std::vector<UserRealization> sample_actives(int K, const ChannelParams& p,
                                            int N_p, int t_m, Rng& rng) {
  if (K < 1) throw config_error("sample_actives: K must be >= 1");
  validate(p);
  std::vector<UserRealization> users;
  users.reserve(K);
  for (int k = 0; k < K; ++k) users.push_back(draw_user(p, N_p, t_m, rng));
  return users;
}

void dump_ground_truth(std::ostream& os, const std::vector<UserRealization>& users) {
  char buf[64];
  for (const auto& u : users) {
    os << u.pilot_index << ' ' << u.frame_delay;
    std::snprintf(buf, sizeof(buf), " %.17g", u.center_angle);
    os << buf;
    for (Index m = 0; m < u.channel.size(); ++m) {
      std::snprintf(buf, sizeof(buf), " %.17g %.17g", u.channel(m).real(),
                    u.channel(m).imag());
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace cesbl
