#pragma once

#include <string>
#include <vector>

#include "robust_erm/quadrature.hpp"

namespace robust_erm {

/// Scale function rho used by the block M-estimator of the risk.
///
/// Implementations must be convex and even with rho'(z) = z on |z| <= 1,
/// rho' constant for z >= 2, z - rho'(z) nondecreasing and five bounded
/// derivatives. SmoothHuber is the shipped implementation; other functions
/// can be checked against the contract with verify_loss_contract().
class ScaleLoss {
 public:
  virtual ~ScaleLoss() = default;

  virtual double value(double z) const = 0;
  /// Derivative of order 1..5.
  virtual double deriv(double z, int order) const = 0;
  /// Limit of rho'(z) as z -> +inf.
  virtual double saturation() const = 0;
  virtual std::string name() const = 0;
};

/// Huber function with threshold 3/2.
double huber(double y);
/// Derivative of huber(): clamp(y, -3/2, 3/2).
double huber_d1(double y);

/// Unnormalized bump exp(-4 / (1 - 4x^2)) on |x| < 1/2 and its derivatives
/// of order 0..4 (closed form through the partial fractions of the exponent).
double bump_unnormalized(double x, int order = 0);

struct SmoothHuberOptions {
  /// Spacing of the lookup table on the transition region 1 <= |z| <= 2.
  double grid_step = 1e-3;
  /// Gauss-Legendre nodes per integration subinterval.
  int quadrature_order = 96;
  /// Serve rho, rho', rho'' from cubic Hermite interpolation of the table.
  bool use_table = false;
};

/// Smoothed Huber loss rho = H * psi, where psi is the normalized bump.
///
/// On |z| <= 1 and |z| >= 2 the convolution has closed forms (quadratic and
/// affine respectively) which are returned exactly. On the transition band
/// rho, rho' and rho'' are integrals of H and H' against psi and psi',
/// evaluated by Gauss-Legendre on either side of the Huber kink; orders 3..5
/// are -psi, -psi', -psi'' shifted by 3/2.
///
/// Immutable after construction.
class SmoothHuber final : public ScaleLoss {
 public:
  explicit SmoothHuber(const SmoothHuberOptions& options = {});

  double value(double z) const override;
  double deriv(double z, int order) const override;
  double saturation() const override { return 1.5; }
  std::string name() const override { return "smoothed-huber"; }

  /// Bump normalizer C such that C * int exp(-4/(1-4x^2)) dx = 1.
  double bump_normalizer() const { return normalizer_; }
  /// Normalized bump psi^(order)(x), order 0..4.
  double bump(double x, int order = 0) const;
  /// Value of rho(0) = int x^2/2 psi(x) dx.
  double value_at_zero() const { return rho0_; }

  const SmoothHuberOptions& options() const { return options_; }
  /// A copy of this loss with the lookup table switched on or off.
  SmoothHuber with_table(bool enabled) const;

 private:
  // Exact evaluation for z in (1, 2); order 0 is rho itself.
  double transition_exact(double z, int order) const;
  double transition_table(double z, int order) const;
  void build_table();

  SmoothHuberOptions options_;
  QuadratureRule<double> unit_rule_;  // on [-1, 1]
  double normalizer_ = 0.0;
  double rho0_ = 0.0;
  // table_[order][i] = rho^(order)(1 + i * grid_step), order 0..3
  std::vector<std::vector<double>> table_;
};

/// Build the smoothed Huber loss; throws ConfigError unless grid_step > 0
/// and quadrature_order >= 16.
SmoothHuber build_smoothed_huber(double grid_step, int quadrature_order,
                                 bool use_table = false);

/// rho(z); throws DomainError for non-finite z.
double rho(const ScaleLoss& loss, double z);
/// rho^(order)(z) for order in 1..5; throws DomainError otherwise.
double rho_deriv(const ScaleLoss& loss, double z, int order);

/// One named check of the scale-loss contract.
struct ContractCheck {
  std::string name;
  double max_violation = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_violation <= tolerance; }
};

struct ContractReport {
  std::vector<ContractCheck> checks;
  double seconds = 0.0;
  bool passed() const;
  const ContractCheck* first_failure() const;
};

struct ContractGrid {
  double lo = -10.0;
  double hi = 10.0;
  int points = 10000;
  int fd_points = 100;
  double fd_step = 1e-4;
  double plateau_tol = 1e-10;
  double fd_tol = 1e-5;
};

/// Evaluate the loss invariants on a dense grid: plateaus of rho', bounds on
/// rho' and rho'', evenness, monotonicity of z - rho'(z) and central
/// finite-difference consistency of rho..rho^(5).
ContractReport verify_loss_contract(const ScaleLoss& loss, const ContractGrid& grid = {});

}  // namespace robust_erm
