#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>

#include "robust_erm/errors.hpp"
#include "robust_erm/types.hpp"

namespace robust_erm {

/// Nodes and weights of an interpolatory quadrature rule.
template <typename Scalar>
struct QuadratureRule {
  VectorX<Scalar> nodes;
  VectorX<Scalar> weights;

  Index size() const { return nodes.size(); }

  /// Sum of w_i f(x_i).
  template <typename F>
  Scalar integrate(F&& f) const {
    Scalar acc(0);
    for (Index i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
  }
};

namespace detail {

// Orthonormal three-term recurrence x p_j = b_{j+1} p_{j+1} + b_j p_{j-1}
// (zero diagonal, symmetric weight). `offdiag(j)` returns b_j for j >= 1 and
// `p0` is the constant orthonormal polynomial.
//
// Nodes come from the eigenvalues of the Jacobi matrix (Golub-Welsch) and are
// polished by Newton on p_n; weights use the Christoffel form
// w = 1 / sum_j p_j(x)^2, which stays accurate where eigenvector components
// underflow.
template <typename Scalar, typename OffDiag>
QuadratureRule<Scalar> symmetric_gauss_rule(Index n, Scalar p0, OffDiag offdiag) {
  if (n < 1) throw ConfigError("quadrature order must be at least 1");
  MatrixX<Scalar> jacobi = MatrixX<Scalar>::Zero(n, n);
  for (Index j = 1; j < n; ++j) {
    jacobi(j, j - 1) = offdiag(j);
    jacobi(j - 1, j) = offdiag(j);
  }
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> solver(jacobi, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("Jacobi eigensolver failed");

  QuadratureRule<Scalar> rule;
  rule.nodes = solver.eigenvalues();
  rule.weights.resize(n);
  for (Index i = 0; i < n; ++i) {
    Scalar x = rule.nodes[i];
    Scalar sum_sq(0);
    for (int pass = 0; pass < 3; ++pass) {
      // Evaluate p_0..p_n and p_n' at x.
      Scalar p_prev(0), p = p0, dp_prev(0), dp(0);
      sum_sq = p * p;
      for (Index j = 0; j < n; ++j) {
        const Scalar b_next = offdiag(j + 1);
        const Scalar b_cur = j > 0 ? offdiag(j) : Scalar(0);
        const Scalar p_next = (x * p - b_cur * p_prev) / b_next;
        const Scalar dp_next = (p + x * dp - b_cur * dp_prev) / b_next;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
        if (j + 1 < n) sum_sq += p * p;
      }
      if (pass < 2 && dp != Scalar(0)) x -= p / dp;
    }
    rule.nodes[i] = x;
    rule.weights[i] = Scalar(1) / sum_sq;
  }
  return rule;
}

}  // namespace detail

/// Gauss-Legendre rule with `n` nodes mapped onto [a, b].
template <typename Scalar = double>
QuadratureRule<Scalar> gauss_legendre(Index n, Scalar a = Scalar(-1), Scalar b = Scalar(1)) {
  using std::sqrt;
  auto rule = detail::symmetric_gauss_rule<Scalar>(
      n, Scalar(1) / sqrt(Scalar(2)), [](Index j) {
        const Scalar jj(static_cast<Scalar>(j));
        return jj / sqrt(Scalar(4) * jj * jj - Scalar(1));
      });
  const Scalar half = (b - a) / Scalar(2);
  const Scalar mid = (a + b) / Scalar(2);
  rule.nodes = (rule.nodes.array() * half + mid).matrix();
  rule.weights *= half;
  return rule;
}

/// Gauss-Hermite rule for expectations under the standard normal law:
/// E f(Z) ~ sum_i w_i f(x_i), with the weights summing to one.
template <typename Scalar = double>
QuadratureRule<Scalar> gauss_hermite_normal(Index n) {
  using std::sqrt;
  return detail::symmetric_gauss_rule<Scalar>(
      n, Scalar(1), [](Index j) { return sqrt(static_cast<Scalar>(j)); });
}

/// Rule for E f(Z), Z ~ N(0, sigma^2): Gauss-Legendre with `n` nodes on each
/// piece of [-12 sigma, 12 sigma] cut at the `breakpoints` inside it. Suited
/// to integrands that are smooth between known breakpoints.
template <typename Scalar = double>
QuadratureRule<Scalar> piecewise_normal_rule(Scalar sigma, std::vector<Scalar> breakpoints, Index n) {
  using std::abs;
  using std::exp;
  using std::sqrt;
  if (!(sigma > Scalar(0))) throw ConfigError("normal rule needs sigma > 0");
  const Scalar limit = Scalar(12) * sigma;
  std::erase_if(breakpoints, [&](const Scalar& b) { return !(abs(b) < limit); });
  breakpoints.push_back(-limit);
  breakpoints.push_back(limit);
  std::sort(breakpoints.begin(), breakpoints.end());
  breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());

  const auto unit = gauss_legendre<Scalar>(n);
  const Scalar norm = Scalar(1) / (sigma * sqrt(Scalar(2) * std::numbers::pi_v<Scalar>));
  const Index pieces = static_cast<Index>(breakpoints.size()) - 1;
  QuadratureRule<Scalar> rule;
  rule.nodes.resize(pieces * n);
  rule.weights.resize(pieces * n);
  for (Index p = 0; p < pieces; ++p) {
    const Scalar a = breakpoints[static_cast<std::size_t>(p)];
    const Scalar b = breakpoints[static_cast<std::size_t>(p + 1)];
    const Scalar half = (b - a) / Scalar(2), mid = (a + b) / Scalar(2);
    for (Index i = 0; i < n; ++i) {
      const Scalar z = mid + half * unit.nodes[i];
      rule.nodes[p * n + i] = z;
      rule.weights[p * n + i] = half * unit.weights[i] * norm * exp(-z * z / (Scalar(2) * sigma * sigma));
    }
  }
  return rule;
}

}  // namespace robust_erm
