#pragma once

#include <iosfwd>
#include <limits>
#include <utility>
#include <vector>

#include "cesbl/airlink.hpp"
#include "cesbl/types.hpp"

namespace cesbl {

struct DetectorConfig {
  double theta1 = 0.96934656996828439;  // matches theta1_for_snr(15)
  double theta2 = 0.98;
  int theta3 = 3;
  double user_nmse_gate_db = -15.0;
};

// 1 / (1 + 10^(-snr/10)); tends to 1 as snr -> inf (noiseless keeps all mass)
double theta1_for_snr(double snr_db);

void validate(const DetectorConfig& cfg);

// Minimal prefix of rows, in descending row-energy order, whose cumulative
// energy reaches theta1 * total (with a 1e-12 relative slack so theta1 = 1
// is usable on noiseless runs). Zero rows are never returned.
std::vector<Index> detect_rows(const MatC& X_est, double theta1);

// Minimal bin set (by descending power, ties to the lower index) reaching
// theta2 * row power. Sorted ascending.
std::vector<Index> select_bins(const VecC& row, double theta2);

// Partition the selected bins into circular clusters: a gap of more than
// theta3 bins between consecutive selected bins (wrap included) starts a new
// cluster. Clusters are ordered by their smallest member.
std::vector<std::vector<Index>> segment_clusters(const VecC& row, double theta2,
                                                 int theta3);

// For each cluster, zero the other clusters' bins of the row (keeping the
// sub-threshold tail) and apply Psi^H.
std::vector<std::pair<std::vector<Index>, VecC>> recover_user_channels(
    Index row_index, const VecC& row,
    const std::vector<std::vector<Index>>& clusters, const MatC& Psi);

// delay = row mod (t_m+1), pilot = row div (t_m+1); n_hat >= 0 enables the
// upper range check.
std::pair<int, int> extract_identity(Index row_index, int t_m,
                                     Index n_hat = -1);

struct DetectedUser {
  int pilot_index = -1;
  int delay = -1;
  std::vector<Index> cluster_bins;  // ascending
  VecC channel_estimate;
  int matched_truth = -1;  // index into truth users, -1 when unmatched
  double nmse_db = std::numeric_limits<double>::quiet_NaN();
  Index row_index = -1;
};

struct DetectionResult {
  std::vector<Index> rows;  // theta1 prefix, energy order
  std::vector<DetectedUser> users;
};

DetectionResult run_detector(const MatC& X_est, int t_m,
                             const DetectorConfig& cfg, const MatC& Psi);

struct ScoreReport {
  double mu_ad = 0.0;
  double nmse_ce_db = 0.0;
  int detected_count = 0;
  int truth_count = 0;
  int false_rows = 0;
};

// dB value of num/den with the reporting conventions used throughout:
// floored at -200; den = 0 maps to -200 when num = 0, else +200.
double ratio_db(double num, double den);

// A truth user is detected iff some cluster on its (pilot, delay) row is
// paired with it by greedy maximal-bin-overlap assignment and the paired
// estimate passes the NMSE gate. Fills matched_truth / nmse_db on det.users.
ScoreReport match_and_score(const GroundTruth& truth, const MatC& X_est,
                            DetectionResult& det, const DetectorConfig& cfg,
                            const MatC& Psi, int t_m);

void dump_detections(std::ostream& os, const DetectionResult& det);

}  // namespace cesbl
