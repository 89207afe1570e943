#pragma once

#include <span>
#include <vector>

#include "robust_erm/blocks.hpp"
#include "robust_erm/models.hpp"
#include "robust_erm/smooth_loss.hpp"
#include "robust_erm/types.hpp"

namespace robust_erm {

/// Root z* of the estimating function f(z) = sum_j rho'(s (m_j - z)).
///
/// `residual` is f(z*) / (s k), which is bounded by |z* - root| because
/// rho'' <= 1; convergence means |residual| <= tol.
struct ProxyResult {
  double value = 0.0;
  int iterations = 0;
  double residual = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
};

inline constexpr double kDefaultRootTol = 1e-12;

/// M-estimator of location of `means` with argument scale s = sqrt(n)/Delta_n.
///
/// Safeguarded Newton on the bracket [min m, max m]; bisection whenever the
/// Newton step leaves the bracket. When the root set is an interval the
/// midpoint is returned. Throws DataError for non-finite means and
/// ConfigError for an empty input, tol <= 0 or scale <= 0.
ProxyResult robust_mean(std::span<const double> means, double scale, const ScaleLoss& loss,
                        double tol = kDefaultRootTol);

ProxyResult robust_mean(std::span<const double> block_means, const BlockScheme& scheme,
                        const ScaleLoss& loss, double tol = kDefaultRootTol);

/// sqrt(n) / Delta_n.
inline double argument_scale(Index block_size, double delta) {
  return std::sqrt(static_cast<double>(block_size)) / delta;
}

/// Mean of loss(theta, .) over each group.
std::vector<double> group_loss_means(const RiskModel& model, const SampleMatrix& data,
                                     const GroupView& groups, const Vector& theta);

/// Mean of loss(theta, .) - loss(theta_prime, .) over each group.
std::vector<double> group_diff_means(const RiskModel& model, const SampleMatrix& data,
                                     const GroupView& groups, const Vector& theta,
                                     const Vector& theta_prime);

/// Column j is the mean gradient of loss(theta, .) over group j.
Matrix group_gradient_means(const RiskModel& model, const SampleMatrix& data,
                            const GroupView& groups, const Vector& theta);

/// rho''(s (m_j - z)) for every group.
std::vector<double> curvature_weights(std::span<const double> means, double z, double scale,
                                      const ScaleLoss& loss);

/// Robust proxy of the risk at theta. Throws ConfigError unless the data
/// covers every block index.
ProxyResult robust_risk(const Vector& theta, const SampleMatrix& data, const RiskModel& model,
                        const BlockScheme& scheme, const ScaleLoss& loss,
                        double tol = kDefaultRootTol);

/// Robust proxy of the risk difference L(theta) - L(theta_prime).
ProxyResult robust_diff(const Vector& theta, const Vector& theta_prime, const SampleMatrix& data,
                        const RiskModel& model, const BlockScheme& scheme, const ScaleLoss& loss,
                        double tol = kDefaultRootTol);

/// Permutation-invariant proxy over all size-n subsets of at most 12 samples.
/// The per-sample losses are sorted before enumeration, so the result does
/// not depend on the row order of `data`.
double u_statistic_proxy(const Vector& theta, const SampleMatrix& data, Index n,
                         const RiskModel& model, const ScaleLoss& loss, double delta,
                         double tol = kDefaultRootTol);

}  // namespace robust_erm
