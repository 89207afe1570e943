#pragma once

#include <random>
#include <string>

namespace robust_erm {

/// Centered, symmetric noise law used by the samplers.
struct NoiseSpec {
  enum class Family { gaussian, student_t, pareto_symmetric };

  Family family = Family::gaussian;
  /// sigma for gaussian, degrees of freedom for student_t, tail index for
  /// pareto_symmetric.
  double parameter = 1.0;

  static NoiseSpec gaussian(double sigma) { return {Family::gaussian, sigma}; }
  static NoiseSpec student_t(double dof) { return {Family::student_t, dof}; }
  static NoiseSpec pareto_symmetric(double alpha) { return {Family::pareto_symmetric, alpha}; }

  /// Throws ConfigError unless the variance exists (dof > 2, alpha > 2,
  /// sigma >= 0).
  void validate() const;

  double draw(std::mt19937_64& rng) const;
  double variance() const;
  /// E[e^4], +inf when it does not exist.
  double fourth_moment() const;
  /// Supremum of the orders p with E|e|^p finite (+inf for gaussian).
  double moment_bound() const;
  /// tau in [0, 1] with E|e|^(2+tau) finite, capped at 1.
  double moment_order() const;

  std::string describe() const;
};

}  // namespace robust_erm
