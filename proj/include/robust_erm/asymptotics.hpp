#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "robust_erm/models.hpp"
#include "robust_erm/smooth_loss.hpp"
#include "robust_erm/types.hpp"

namespace robust_erm {

/// Limit Delta_inf of the proxy scale; +inf is a distinct state, not a large float.
class ScaleLimit {
 public:
  static ScaleLimit infinite() { return ScaleLimit(); }
  /// Throws ConfigError unless 0 < value < inf.
  static ScaleLimit finite(double value);

  bool is_infinite() const { return infinite_; }
  /// Throws std::logic_error when infinite.
  double value() const;
  std::string describe() const;

 private:
  ScaleLimit() = default;
  bool infinite_ = true;
  double value_ = 0.0;
};

enum class CovarianceKind { D2, A2, V2 };
enum class CovarianceMethod { exact, quadrature, monte_carlo };
const char* to_string(CovarianceKind k);
const char* to_string(CovarianceMethod m);

struct AsymptoticCovariance {
  Matrix matrix;
  CovarianceKind kind = CovarianceKind::D2;
  ScaleLimit delta_inf = ScaleLimit::infinite();
  CovarianceMethod method = CovarianceMethod::exact;
  /// Entrywise standard errors; empty unless method == monte_carlo.
  Matrix standard_errors;
};

/// Covariance of the limiting pair (Z2, Z1) of normalized block gradients
/// and block losses.
struct JointGaussianSpec {
  Matrix sigma22;  // E[grad l grad l^T]
  Vector gamma;    // Cov(grad l, l)
  double var_z1 = 1.0;

  /// The (d+1) x (d+1) block matrix with Z1 last.
  Matrix joint() const;
  /// Throws SpecError unless the joint matrix is PSD and var_z1 > 0.
  void validate() const;
};

JointGaussianSpec joint_spec(const RiskModel& model);

/// H^-1 Sigma H^-1. Throws ConfigError when the Hessian is not SPD.
AsymptoticCovariance d_squared(const RiskModel& model);

/// Sign of the Gamma Gamma^T cross term in A^2.
///
/// `linearized` is what the first-order expansion of rho'' around the true
/// risk produces and matches simulated direct estimators; `opposite`
/// carries the opposite sign.
enum class CrossTermSign { opposite, linearized };

struct ASquaredOptions {
  Index nodes = 128;
  CrossTermSign cross_sign = CrossTermSign::linearized;
};

/// Asymptotic covariance of the rho''-weighted gradient.
///
/// Conditioning on Z1 reduces every expectation to one dimension:
/// Z2 | Z1 ~ N(gamma Z1 / v, sigma22 - gamma gamma^T / v). The integrals in
/// Z1 use Gauss-Legendre on the pieces of [-12 sd, 12 sd] cut where
/// Z1 / Delta_inf crosses +-1 and +-2. Delta_inf = +inf returns sigma22.
AsymptoticCovariance a_squared(const JointGaussianSpec& spec, const ScaleLoss& loss,
                               const ScaleLimit& delta_inf, const ASquaredOptions& options = {});

/// The same expression with every expectation replaced by a sample average
/// over `draws` joint Gaussian draws; standard errors from 100 batches.
AsymptoticCovariance a_squared_monte_carlo(const JointGaussianSpec& spec, const ScaleLoss& loss,
                                           const ScaleLimit& delta_inf, std::int64_t draws,
                                           std::uint64_t seed,
                                           CrossTermSign cross_sign = CrossTermSign::linearized);

/// H^-1 A^2 H^-1 for the model's population facts.
AsymptoticCovariance v_squared(const RiskModel& model, const ScaleLoss& loss,
                               const ScaleLimit& delta_inf, const ASquaredOptions& options = {});

/// E rho''(Z1/Delta)^2 / (E rho''(Z1/Delta))^2 for Z1 ~ N(0, var_z1): the
/// variance inflation of the direct estimator when gamma = 0.
double inflation_factor(const ScaleLoss& loss, double var_z1, const ScaleLimit& delta_inf,
                        Index nodes = 128);

struct SteinResult {
  double lhs = 0.0;  // E f(Z1) Z2
  double rhs = 0.0;  // gamma E f'(Z1)
  double abs_diff = 0.0;
};

/// Both sides of Stein's identity for (Z1, Z2) with covariance
/// [[var1, gamma], [gamma, var2]]: the left side by a tensor rule in (Z1, W)
/// with Z2 = (gamma/var1) Z1 + c W, the right side by a one-dimensional rule.
/// `breakpoints` are points of Z1 where f or f' lose smoothness.
SteinResult stein_check(const std::function<double(double)>& f,
                        const std::function<double(double)>& f_prime, double gamma, double var1,
                        double var2, Index nodes = 128, std::vector<double> breakpoints = {});

}  // namespace robust_erm
