#include "cesbl/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <tuple>

namespace cesbl {

namespace {
constexpr double kPrefixSlack = 1.0 - 1e-12;
}

double theta1_for_snr(double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return 1.0;
  return 1.0 / (1.0 + std::pow(10.0, -snr_db / 10.0));
}

void validate(const DetectorConfig& cfg) {
  if (!(cfg.theta1 > 0.0) || cfg.theta1 > 1.0)
    throw config_error("detector: theta1 must lie in (0, 1]");
  if (!(cfg.theta2 > 0.0) || cfg.theta2 > 1.0)
    throw config_error("detector: theta2 must lie in (0, 1]");
  if (cfg.theta3 < 1) throw config_error("detector: theta3 must be >= 1");
  if (!std::isfinite(cfg.user_nmse_gate_db))
    throw config_error("detector: user_nmse_gate_db must be finite");
}

namespace {

// indices of `power` in descending value, ties to the lower index, truncated
// to the minimal prefix reaching frac * total
std::vector<Index> energy_prefix(const VecX& power, double frac) {
  const double total = power.sum();
  std::vector<Index> order(power.size());
  for (Index i = 0; i < power.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (power(a) != power(b)) return power(a) > power(b);
    return a < b;
  });
  std::vector<Index> out;
  if (total <= 0.0) return out;
  const double target = frac * total * kPrefixSlack;
  double cum = 0.0;
  for (Index i : order) {
    if (power(i) <= 0.0) break;
    out.push_back(i);
    cum += power(i);
    if (cum >= target) break;
  }
  return out;
}

}  // namespace

std::vector<Index> detect_rows(const MatC& X_est, double theta1) {
  if (!(theta1 > 0.0) || theta1 > 1.0)
    throw config_error("detect_rows: theta1 must lie in (0, 1]");
  const VecX energy = X_est.rowwise().squaredNorm();
  return energy_prefix(energy, theta1);
}

std::vector<Index> select_bins(const VecC& row, double theta2) {
  std::vector<Index> sel = energy_prefix(row.cwiseAbs2(), theta2);
  std::sort(sel.begin(), sel.end());
  return sel;
}

std::vector<std::vector<Index>> segment_clusters(const VecC& row, double theta2,
                                                 int theta3) {
  const Index M = row.size();
  std::vector<Index> sel = select_bins(row, theta2);
  std::vector<std::vector<Index>> clusters;
  const Index k = static_cast<Index>(sel.size());
  if (k == 0) return clusters;
  if (k == 1) {
    clusters.push_back({sel[0]});
    return clusters;
  }
  // circular gaps between consecutive selected bins; gaps[i] follows sel[i]
  std::vector<Index> cuts;
  for (Index i = 0; i < k; ++i) {
    const Index gap =
        (i + 1 < k) ? sel[i + 1] - sel[i] : sel[0] + M - sel[k - 1];
    if (gap > theta3) cuts.push_back(i);
  }
  if (cuts.empty()) {
    clusters.push_back(sel);  // whole circle is one cluster
    return clusters;
  }
  for (std::size_t c = 0; c < cuts.size(); ++c) {
    const Index start = (cuts[(c + cuts.size() - 1) % cuts.size()] + 1) % k;
    const Index stop = cuts[c];  // inclusive
    std::vector<Index> bins;
    for (Index i = start;; i = (i + 1) % k) {
      bins.push_back(sel[i]);
      if (i == stop) break;
    }
    std::sort(bins.begin(), bins.end());
    clusters.push_back(std::move(bins));
  }
  std::sort(clusters.begin(), clusters.end(),
            [](const std::vector<Index>& a, const std::vector<Index>& b) {
              return a.front() < b.front();
            });
  return clusters;
}

std::vector<std::pair<std::vector<Index>, VecC>> recover_user_channels(
    Index row_index, const VecC& row,
    const std::vector<std::vector<Index>>& clusters, const MatC& Psi) {
  if (row_index < 0) throw config_error("recover_user_channels: bad row index");
  if (Psi.rows() != row.size() || Psi.cols() != row.size())
    throw config_error("recover_user_channels: Psi and row disagree");
  for (const auto& bins : clusters)
    for (Index b : bins)
      if (b < 0 || b >= row.size())
        throw config_error("recover_user_channels: bin out of range");
  std::vector<std::pair<std::vector<Index>, VecC>> out;
  out.reserve(clusters.size());
  // each user keeps the whole row except the competing clusters; the
  // sub-threshold tail stays so one lone cluster reproduces the full row
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    VecC masked = row;
    for (std::size_t o = 0; o < clusters.size(); ++o) {
      if (o == c) continue;
      for (Index b : clusters[o]) masked(b) = cplx(0, 0);
    }
    out.emplace_back(clusters[c], Psi.adjoint() * masked);
  }
  return out;
}

std::pair<int, int> extract_identity(Index row_index, int t_m, Index n_hat) {
  if (row_index < 0 || t_m < 0)
    throw config_error("extract_identity: negative input");
  if (n_hat >= 0 && row_index >= n_hat)
    throw config_error("extract_identity: row index out of range");
  const int span = t_m + 1;
  return {static_cast<int>(row_index / span),
          static_cast<int>(row_index % span)};
}

DetectionResult run_detector(const MatC& X_est, int t_m,
                             const DetectorConfig& cfg, const MatC& Psi) {
  validate(cfg);
  if (t_m < 0) throw config_error("run_detector: t_m must be >= 0");
  if (Psi.rows() != X_est.cols() || Psi.cols() != X_est.cols())
    throw config_error("run_detector: Psi must be M x M");
  if (X_est.rows() % (t_m + 1) != 0)
    throw config_error("run_detector: row count not a multiple of t_m + 1");
  DetectionResult out;
  out.rows = detect_rows(X_est, cfg.theta1);
  for (Index r : out.rows) {
    const VecC row = X_est.row(r).transpose();
    const auto clusters = segment_clusters(row, cfg.theta2, cfg.theta3);
    const auto recs = recover_user_channels(r, row, clusters, Psi);
    const auto [pilot, delay] = extract_identity(r, t_m, X_est.rows());
    for (const auto& [bins, est] : recs) {
      DetectedUser u;
      u.pilot_index = pilot;
      u.delay = delay;
      u.cluster_bins = bins;
      u.channel_estimate = est;
      u.row_index = r;
      out.users.push_back(std::move(u));
    }
  }
  return out;
}

double ratio_db(double num, double den) {
  if (den <= 0.0) return num <= 0.0 ? -200.0 : 200.0;
  if (num <= 0.0) return -200.0;
  return std::max(-200.0, 10.0 * std::log10(num / den));
}

ScoreReport match_and_score(const GroundTruth& truth, const MatC& X_est,
                            DetectionResult& det, const DetectorConfig& cfg,
                            const MatC& Psi, int t_m) {
  validate(cfg);
  if (truth.users.empty()) throw config_error("match_and_score: empty truth");
  if (t_m < 0) throw config_error("match_and_score: t_m must be >= 0");
  if (X_est.rows() != truth.X_hat.rows() || X_est.cols() != truth.X_hat.cols())
    throw config_error("match_and_score: estimate shape differs from truth");

  ScoreReport rep;
  rep.truth_count = static_cast<int>(truth.users.size());
  rep.nmse_ce_db =
      ratio_db((X_est - truth.X_hat).squaredNorm(), X_est.squaredNorm());

  const int span = t_m + 1;
  const std::size_t n_truth = truth.users.size();
  std::vector<Index> truth_row(n_truth);
  std::vector<std::vector<Index>> truth_bins(n_truth);
  for (std::size_t u = 0; u < n_truth; ++u) {
    const UserRealization& tu = truth.users[u];
    truth_row[u] = static_cast<Index>(tu.pilot_index) * span + tu.frame_delay;
    // the user's own angular signature, independent of who shares the row
    const VecC x_u = Psi * tu.channel;  // Psi symmetric: (h^T Psi)^T
    truth_bins[u] = select_bins(x_u, cfg.theta2);
  }

  // candidate pairings: same row, at least one shared bin
  struct Cand {
    Index overlap;
    Index min_bin;
    std::size_t truth_idx;
    std::size_t det_idx;
  };
  std::vector<Cand> cands;
  for (std::size_t u = 0; u < n_truth; ++u) {
    for (std::size_t d = 0; d < det.users.size(); ++d) {
      if (det.users[d].row_index != truth_row[u]) continue;
      const auto& bins = det.users[d].cluster_bins;
      Index overlap = 0;
      for (Index b : truth_bins[u])
        if (std::binary_search(bins.begin(), bins.end(), b)) ++overlap;
      if (overlap > 0) cands.push_back({overlap, bins.front(), u, d});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.min_bin != b.min_bin) return a.min_bin < b.min_bin;
    if (a.truth_idx != b.truth_idx) return a.truth_idx < b.truth_idx;
    return a.det_idx < b.det_idx;
  });

  std::vector<bool> truth_used(n_truth, false);
  std::vector<bool> det_used(det.users.size(), false);
  for (const Cand& c : cands) {
    if (truth_used[c.truth_idx] || det_used[c.det_idx]) continue;
    truth_used[c.truth_idx] = true;
    det_used[c.det_idx] = true;
    DetectedUser& du = det.users[c.det_idx];
    du.matched_truth = static_cast<int>(c.truth_idx);
    const VecC& est = du.channel_estimate;
    const VecC& act = truth.users[c.truth_idx].channel;
    du.nmse_db = ratio_db((est - act).squaredNorm(), est.squaredNorm());
    if (du.nmse_db <= cfg.user_nmse_gate_db) ++rep.detected_count;
  }

  for (Index r : det.rows)
    if (truth.support_rows.count(r) == 0) ++rep.false_rows;
  rep.mu_ad = static_cast<double>(rep.detected_count) / rep.truth_count;
  return rep;
}

void dump_detections(std::ostream& os, const DetectionResult& det) {
  char buf[96];
  for (const DetectedUser& u : det.users) {
    os << "pilot=" << u.pilot_index << " delay=" << u.delay << " bins=";
    for (std::size_t i = 0; i < u.cluster_bins.size(); ++i) {
      if (i) os << ';';
      os << u.cluster_bins[i];
    }
    std::snprintf(buf, sizeof(buf), " nmse_db=%.17g matched=%d\n", u.nmse_db,
                  u.matched_truth);
    os << buf;
  }
}

}  // namespace cesbl
