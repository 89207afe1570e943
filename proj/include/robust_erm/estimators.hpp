#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "robust_erm/blocks.hpp"
#include "robust_erm/models.hpp"
#include "robust_erm/robust_proxy.hpp"
#include "robust_erm/smooth_loss.hpp"

namespace robust_erm {

struct SolverConfig {
  double step_init = 1.0;
  double backtrack_factor = 0.5;
  double grad_tol = 1e-8;
  int max_iter = 500;
  int gda_inner_steps = 5;
  /// Extra starts at theta_init plus Gaussian jitter.
  int restarts = 2;
  double jitter = 0.1;
  std::uint64_t seed = 0;
  double root_tol = kDefaultRootTol;

  /// Throws ConfigError on non-positive fields or backtrack_factor outside (0, 1).
  void validate() const;
};

enum class EstimateStatus { converged, max_iter, degenerate_weights };
const char* to_string(EstimateStatus s);

struct EstimateResult {
  Vector theta_hat;
  int iterations = 0;
  double grad_norm = 0.0;
  double objective = 0.0;
  /// Normalized weights rho''_j / sum rho'' at the exit iterate; all zero
  /// when every block is saturated.
  std::vector<double> weights;
  EstimateStatus status = EstimateStatus::max_iter;
};

/// Implicit gradient of the proxy: the rho''-weighted convex combination of
/// block gradients at the proxy root. Throws DegenerateWeightsError when
/// every weight vanishes.
Vector robust_gradient(const Vector& theta, const SampleMatrix& data, const RiskModel& model,
                       const BlockScheme& scheme, const ScaleLoss& loss,
                       double root_tol = kDefaultRootTol);

/// Gradient descent with backtracking on theta -> robust proxy, restarted
/// from jittered copies of theta_init; the lowest objective wins.
EstimateResult minimize_robust(const SampleMatrix& data, const RiskModel& model,
                               const BlockScheme& scheme, const ScaleLoss& loss,
                               const SolverConfig& config, const Vector& theta_init);

/// The same descent on the permutation-invariant proxy over all size-n
/// subsets (N <= 12).
EstimateResult minimize_u_statistic(const SampleMatrix& data, const RiskModel& model, Index n,
                                    double delta, const ScaleLoss& loss,
                                    const SolverConfig& config, const Vector& theta_init);

/// Saddle point of the difference proxy by alternating descent in theta and
/// gda_inner_steps ascent steps in theta'; theta' starts at theta_init.
/// The first result carries the min player, the second the max player;
/// both report the proxy value at the final pair.
std::pair<EstimateResult, EstimateResult> minmax_estimate(const SampleMatrix& data,
                                                          const RiskModel& model,
                                                          const BlockScheme& scheme,
                                                          const ScaleLoss& loss,
                                                          const SolverConfig& config,
                                                          const Vector& theta_init);

/// Gradient descent on the empirical risk over all rows.
EstimateResult plain_erm(const SampleMatrix& data, const RiskModel& model,
                         const SolverConfig& config, const Vector& theta_init);

}  // namespace robust_erm
