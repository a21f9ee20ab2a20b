#include "cesbl/pilot.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace cesbl {

static_assert(std::endian::native == std::endian::little,
              "pool files are little-endian; big-endian hosts need byte swaps");

std::pair<int, int> ExtendedPilotMatrix::row_map(Index j) const {
  if (j < 0 || j >= n_hat()) throw config_error("row_map: index out of range");
  const int stride = t_m + 1;
  return {static_cast<int>(j / stride), static_cast<int>(j % stride)};
}

PilotPool generate_pilot_pool(Index L, Index N_p, std::uint64_t seed) {
  if (L < 1 || N_p < 1) throw config_error("pilot pool needs L >= 1 and N_p >= 1");
  PilotPool pool;
  pool.seed = seed;
  pool.pilots.resize(L, N_p);
  Rng rng(seed);
  for (Index j = 0; j < N_p; ++j) {
    for (Index i = 0; i < L; ++i) pool.pilots(i, j) = rng.cnormal();
    pool.pilots.col(j).normalize();
  }
  return pool;
}

VecC extend_pilot(const VecC& s, int t, int t_m) {
  if (t < 0 || t > t_m) throw config_error("extend_pilot: delay outside [0, t_m]");
  VecC out = VecC::Zero(s.size() + t_m);
  out.segment(t, s.size()) = s;
  return out;
}

ExtendedPilotMatrix build_extended_matrix(const PilotPool& pool, int t_m) {
  if (t_m < 0) throw config_error("build_extended_matrix: t_m must be >= 0");
  ExtendedPilotMatrix ext;
  ext.t_m = t_m;
  const Index L = pool.length(), N_p = pool.count();
  ext.matrix = MatC::Zero(L + t_m, N_p * (t_m + 1));
  for (Index i = 0; i < N_p; ++i)
    for (int t = 0; t <= t_m; ++t)
      ext.matrix.col(i * (t_m + 1) + t).segment(t, L) = pool.pilots.col(i);
  return ext;
}

namespace {
constexpr char kPoolMagic[8] = {'C', 'E', 'P', 'O', 'O', 'L', '0', '1'};
}

void save_pool(const PilotPool& pool, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open for writing: " + path);
  f.write(kPoolMagic, sizeof(kPoolMagic));
  const std::uint32_t L = static_cast<std::uint32_t>(pool.length());
  const std::uint32_t N_p = static_cast<std::uint32_t>(pool.count());
  f.write(reinterpret_cast<const char*>(&L), 4);
  f.write(reinterpret_cast<const char*>(&N_p), 4);
  for (Index j = 0; j < pool.count(); ++j)
    for (Index i = 0; i < pool.length(); ++i) {
      const double re = pool.pilots(i, j).real(), im = pool.pilots(i, j).imag();
      f.write(reinterpret_cast<const char*>(&re), 8);
      f.write(reinterpret_cast<const char*>(&im), 8);
    }
  if (!f) throw io_error("write failed: " + path);
}

PilotPool load_pool(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open for reading: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kPoolMagic, 8) != 0)
    throw io_error("not a pilot pool file: " + path);
  std::uint32_t L = 0, N_p = 0;
  f.read(reinterpret_cast<char*>(&L), 4);
  f.read(reinterpret_cast<char*>(&N_p), 4);
  if (!f || L < 1 || N_p < 1) throw io_error("corrupt pool header: " + path);
  PilotPool pool;
  pool.pilots.resize(L, N_p);
  for (std::uint32_t j = 0; j < N_p; ++j)
    for (std::uint32_t i = 0; i < L; ++i) {
      double re = 0, im = 0;
      f.read(reinterpret_cast<char*>(&re), 8);
      f.read(reinterpret_cast<char*>(&im), 8);
      pool.pilots(i, j) = cplx(re, im);
    }
  if (!f) throw io_error("truncated pool file: " + path);
  return pool;
}

}  // namespace cesbl
