#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "robust_erm/noise.hpp"
#include "robust_erm/types.hpp"

namespace robust_erm {

/// Population quantities of a risk model at its minimizer theta0.
struct PopulationFacts {
  Vector theta0;
  Matrix hessian;       // Hessian of the risk at theta0
  Matrix sigma;         // E[grad l grad l^T] at theta0
  Vector gamma;         // E[(l - L) grad l] at theta0
  double var_ell = 0;   // Var l(theta0, X); +inf when it does not exist
  double moment_order = 1.0;  // tau with E|l|^(2+tau) finite
};

/// Parametric loss family l(theta, x) with a sampler and known ground truth.
///
/// Models are immutable; sampling draws from a generator owned by the caller.
class RiskModel {
 public:
  virtual ~RiskModel() = default;

  virtual std::string id() const = 0;
  Index dim() const { return facts_.theta0.size(); }
  /// Number of columns of a sample matrix for this model.
  virtual Index sample_width() const = 0;
  virtual std::vector<std::string> column_names() const;

  virtual double loss(const Vector& theta, Observation x) const = 0;
  /// out += weight * grad_theta l(theta, x)
  virtual void add_grad_loss(const Vector& theta, Observation x, double weight,
                             Eigen::Ref<Vector> out) const = 0;
  Vector grad_loss(const Vector& theta, Observation x) const;

  /// Parameters at which the loss is defined.
  virtual bool admissible(const Vector& theta) const { return theta.allFinite(); }
  /// Population risk L(theta) = E l(theta, X).
  virtual double risk(const Vector& theta) const = 0;

  virtual SampleMatrix sample(Index N, std::mt19937_64& rng) const = 0;
  /// Cheap robust starting point computed from data.
  virtual Vector pilot(const SampleMatrix& data) const = 0;
  /// Observation around which adversarial outliers are placed.
  virtual Vector reference_observation() const = 0;

  const PopulationFacts& population() const { return facts_; }

 protected:
  PopulationFacts facts_;
};

using ModelPtr = std::shared_ptr<const RiskModel>;

/// l(theta, x) = |x - theta|^2 / 2 with x = mu + iid noise per coordinate.
ModelPtr location_model(Index d, const Vector& mu, const NoiseSpec& noise);
/// Gaussian special case: Hessian I, Sigma = sigma^2 I, Gamma = 0,
/// Var l = d sigma^4 / 2.
ModelPtr gaussian_location(Index d, const Vector& mu, double sigma);

/// l(theta, (z, y)) = (y - <theta, z>)^2 with z ~ N(0, cov_z) and
/// y = <theta_star, z> + noise. Rows are stored as z_1..z_d, y.
ModelPtr linear_regression(Index d, const Vector& theta_star, const Matrix& cov_z,
                           const NoiseSpec& noise);

/// Negative log-likelihood l(theta, x) = theta x - log theta of the
/// exponential rate, x ~ Exp(lambda0). Gamma = 1/lambda0 is nonzero.
ModelPtr exponential_rate(double lambda0);

}  // namespace robust_erm
