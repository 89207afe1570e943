#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "robust_erm/asymptotics.hpp"
#include "robust_erm/blocks.hpp"
#include "robust_erm/datagen.hpp"
#include "robust_erm/estimators.hpp"
#include "robust_erm/models.hpp"
#include "robust_erm/smooth_loss.hpp"

namespace robust_erm {

enum class EstimatorKind { direct, minmax_1, minmax_2, plain, u_stat };
const char* to_string(EstimatorKind k);
/// Throws ConfigError listing the valid names.
EstimatorKind estimator_from_string(const std::string& name);

/// Deterministic 64-bit child seed for (master, index, stream).
std::uint64_t child_seed(std::uint64_t master, std::uint64_t index, std::uint64_t stream = 0);

struct ExperimentConfig {
  ModelPtr model;
  Index N = 2000;
  Index k = 20;
  DeltaPolicy delta = DeltaPolicy::mad_scaled();
  EstimatorKind kind = EstimatorKind::direct;
  ContaminationSpec contamination;
  Index R = 100;
  std::uint64_t master_seed = 0;
  SolverConfig solver;
  SmoothHuberOptions loss_options{1e-3, 96, true};
  /// Worker threads; 0 means one per hardware thread.
  int threads = 1;
  /// Every replication uses this seed instead of its own child seed.
  std::optional<std::uint64_t> forced_child_seed;

  /// Throws ConfigError on invalid settings, including R * N > 1e8.
  void validate() const;
};

/// Outcome of one replication.
struct Replication {
  Vector theta_hat;
  double delta = 0.0;
  EstimateStatus status = EstimateStatus::converged;
  int iterations = 0;
};

struct ReplicationSet {
  /// Row r holds sqrt(n k) (theta_hat - theta0) for replication index[r].
  Matrix errors;
  std::vector<Index> index;
  std::vector<Replication> runs;
  EstimatorKind kind = EstimatorKind::direct;

  // Configuration snapshot.
  std::string model_id;
  Index N = 0, k = 0, n = 0;
  Index samples_used = 0;  // n k, or N for the plain estimator
  std::string delta_policy;
  ContaminationSpec contamination;
  std::uint64_t master_seed = 0;
  Index requested = 0;  // R
  Index failures = 0;
  Index not_converged = 0;
  std::vector<std::string> failure_messages;
};

/// R independent replications; replication i draws its data from
/// child_seed(master, i). Failures (numerical errors or degenerate weights)
/// are excluded and counted; more than 5% of them throws NumericalError.
ReplicationSet replicate(const ExperimentConfig& config);

/// Estimate on one data set with the configuration's estimator, block count
/// and Delta policy; Delta is resolved once at the pilot estimate.
Replication estimate_once(const ExperimentConfig& config, const SampleMatrix& data, const ScaleLoss& loss);

struct NormalityReport {
  std::vector<double> ks_stats;
  std::vector<double> ks_pvalues;
  double cov_rel_error = 0.0;
  double mean_norm = 0.0;
  Matrix empirical_covariance;
};

/// Per-coordinate KS tests of errors standardized by the theoretical
/// standard deviations, plus the relative operator-norm covariance error.
NormalityReport ks_normality(const ReplicationSet& set, const AsymptoticCovariance& theory);

struct BlockCountPolicy {
  enum class Kind { fixed, kappa_rule };
  Kind kind = Kind::fixed;
  Index k = 20;       // fixed count, and the clean default of the rule
  double tau = 1.0;   // moment order used by the rule
};

struct BreakdownConfig {
  ExperimentConfig base;  // kind and contamination.outliers are overridden
  BlockCountPolicy k_policy;
  std::vector<EstimatorKind> kinds;
  std::vector<double> kappas;
};

struct BreakdownRow {
  EstimatorKind kind = EstimatorKind::direct;
  double kappa = 0.0;
  Index outliers = 0;
  Index k = 0;
  double median_abs_error = 0.0;  // median of ||theta_hat - theta0||
  Index failures = 0;
};

/// Median estimation error per (estimator, kappa). Every kappa reuses the
/// same master seed, so the clean part of each data set is shared.
std::vector<BreakdownRow> breakdown_curve(const BreakdownConfig& config);

struct ConcentrationConfig {
  ModelPtr model;
  Vector theta;
  std::vector<Index> N_grid{2000};
  Index k = 20;
  std::vector<double> s_values{5, 10, 20};
  Index R = 1000;
  std::uint64_t seed = 0;
  DeltaPolicy delta = DeltaPolicy::mad_scaled();
  /// Level used to calibrate the constant on the pilot run.
  double calibration_s = 5.0;
};

struct ConcentrationRow {
  Index N = 0;
  double s = 0.0;
  double threshold = 0.0;          // C (sqrt(s/N) + k/N), robust proxy
  double frequency = 0.0;          // P(|L_hat - L| > threshold)
  double plain_threshold = 0.0;    // same calibration for the sample mean of the loss
  double plain_frequency = 0.0;
  double bound = 0.0;              // 1/s
  double standard_error = 0.0;     // sqrt(bound (1 - bound) / R)
};

/// Exceedance frequencies of |L_hat(theta) - L(theta)| over thresholds whose
/// constant is calibrated on an independent pilot run, next to the same
/// profile for the plain empirical risk.
std::vector<ConcentrationRow> concentration_check(const ConcentrationConfig& config);

/// One row per kept replication: replication index and error coordinates.
void write_replications_csv(const ReplicationSet& set, std::ostream& out);
void write_breakdown_csv(const std::vector<BreakdownRow>& rows, std::ostream& out);
/// Histogram of one error coordinate with the N(0, variance) density overlaid.
void write_histogram_svg(const ReplicationSet& set, Index coordinate, double variance, std::ostream& out);

/// Shortest round-trip decimal form of a double.
std::string format_double(double x);

}  // namespace robust_erm
