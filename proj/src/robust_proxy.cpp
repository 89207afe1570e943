#include "robust_erm/robust_proxy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "robust_erm/errors.hpp"

namespace robust_erm {

namespace {

constexpr int kMaxRootIterations = 400;

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct Estimating {
  std::span<const double> means;
  double scale;
  const ScaleLoss& loss;

  double f(double z) const {
    double acc = 0.0;
    for (double m : means) acc += loss.deriv(scale * (m - z), 1);
    return acc;
  }
  // f and -f'/scale = sum rho''.
  std::pair<double, double> f_and_slope(double z) const {
    double acc = 0.0, curv = 0.0;
    for (double m : means) {
      const double u = scale * (m - z);
      acc += loss.deriv(u, 1);
      curv += loss.deriv(u, 2);
    }
    return {acc, curv};
  }
};

void require_covers(const SampleMatrix& data, const GroupView& groups) {
  const auto members = groups.members;
  if (members.empty()) return;
  const Index top = *std::max_element(members.begin(), members.end());
  if (top >= data.rows()) {
    throw ConfigError("data has " + std::to_string(data.rows()) +
                      " rows but the block scheme needs " + std::to_string(top + 1));
  }
}

}  // namespace

ProxyResult robust_mean(std::span<const double> means, double scale, const ScaleLoss& loss,
                        double tol) {
  if (means.empty()) throw ConfigError("robust_mean needs at least one block mean");
  if (!(tol > 0.0)) throw ConfigError("root tolerance must be positive");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("argument scale must be positive");
  for (double m : means) {
    if (!std::isfinite(m)) throw DataError("non-finite block mean");
  }
  const auto [mn, mx] = std::minmax_element(means.begin(), means.end());
  ProxyResult out;
  out.bracket_lo = *mn;
  out.bracket_hi = *mx;
  if (*mn == *mx) {
    out.value = *mn;
    return out;
  }

  const Estimating eq{means, scale, loss};
  const double norm = scale * static_cast<double>(means.size());
  double lo = *mn, hi = *mx;
  // f(lo) >= 0 >= f(hi) holds by monotonicity; check it anyway.
  if (eq.f(lo) < 0.0 || eq.f(hi) > 0.0) throw NumericalError("estimating equation bracket has no sign change");

  double z = std::clamp(median_of({means.begin(), means.end()}), lo, hi);
  double fz = 0.0;
  int it = 0;
  while (true) {
    if (++it > kMaxRootIterations) throw NumericalError("robust_mean did not converge");
    const auto [f, curv] = eq.f_and_slope(z);
    fz = f;
    if (f == 0.0) break;
    if (f > 0.0) {
      lo = z;
    } else {
      hi = z;
    }
    const double step = curv > 0.0 ? f / (scale * curv) : 0.0;
    // Near the root the Newton step estimates |z - root|; hi - lo bounds it.
    if (hi - lo <= tol || (curv > 0.0 && std::abs(step) <= 0.01 * tol)) break;
    const double newton = z + step;
    const double next = (curv > 0.0 && newton > lo && newton < hi) ? newton : 0.5 * (lo + hi);
    if (next == z) break;  // adjacent doubles
    z = next;
  }

  if (fz == 0.0) {
    // The root set may be an interval where every block is saturated.
    const auto [f0, curv0] = eq.f_and_slope(z);
    if (f0 == 0.0 && curv0 == 0.0) {
      // rho' is exactly saturated only for |u| >= 2, so the root set is
      // [max below + 2/s, min above - 2/s]. Its edges are located in closed
      // form: rho' reaches 3/2 in floating point well before |u| = 2.
      double below = -INFINITY, above = INFINITY;
      for (double m : means) {
        if (m < z) below = std::max(below, m);
        if (m > z) above = std::min(above, m);
      }
      const double left = below + 2.0 / scale, right = above - 2.0 / scale;
      if (left <= right && std::isfinite(left) && std::isfinite(right)) {
        z = 0.5 * (left + right);
        fz = eq.f(z);
      }
    }
  }
  out.value = z;
  out.iterations = it;
  out.residual = fz / norm;
  return out;
}

ProxyResult robust_mean(std::span<const double> block_means, const BlockScheme& scheme,
                        const ScaleLoss& loss, double tol) {
  return robust_mean(block_means, argument_scale(scheme.block_size(), scheme.delta_n()), loss, tol);
}

std::vector<double> group_loss_means(const RiskModel& model, const SampleMatrix& data,
                                     const GroupView& groups, const Vector& theta) {
  require_covers(data, groups);
  const Index k = groups.count();
  std::vector<double> means(static_cast<std::size_t>(k));
  const double inv = 1.0 / static_cast<double>(groups.group_size);
  for (Index j = 0; j < k; ++j) {
    double acc = 0.0;
    for (Index i : groups.group(j)) acc += model.loss(theta, data.row(i).transpose());
    means[static_cast<std::size_t>(j)] = acc * inv;
  }
  return means;
}

std::vector<double> group_diff_means(const RiskModel& model, const SampleMatrix& data,
                                     const GroupView& groups, const Vector& theta,
                                     const Vector& theta_prime) {
  require_covers(data, groups);
  const Index k = groups.count();
  std::vector<double> means(static_cast<std::size_t>(k));
  const double inv = 1.0 / static_cast<double>(groups.group_size);
  for (Index j = 0; j < k; ++j) {
    double acc = 0.0;
    for (Index i : groups.group(j)) {
      const auto x = data.row(i).transpose();
      acc += model.loss(theta, x) - model.loss(theta_prime, x);
    }
    means[static_cast<std::size_t>(j)] = acc * inv;
  }
  return means;
}

Matrix group_gradient_means(const RiskModel& model, const SampleMatrix& data,
                            const GroupView& groups, const Vector& theta) {
  require_covers(data, groups);
  const Index k = groups.count();
  Matrix grads = Matrix::Zero(model.dim(), k);
  const double inv = 1.0 / static_cast<double>(groups.group_size);
  for (Index j = 0; j < k; ++j) {
    for (Index i : groups.group(j)) model.add_grad_loss(theta, data.row(i).transpose(), inv, grads.col(j));
  }
  return grads;
}

std::vector<double> curvature_weights(std::span<const double> means, double z, double scale,
                                      const ScaleLoss& loss) {
  std::vector<double> w(means.size());
  for (std::size_t j = 0; j < means.size(); ++j) w[j] = loss.deriv(scale * (means[j] - z), 2);
  return w;
}

ProxyResult robust_risk(const Vector& theta, const SampleMatrix& data, const RiskModel& model,
                        const BlockScheme& scheme, const ScaleLoss& loss, double tol) {
  const auto means = group_loss_means(model, data, scheme.groups(), theta);
  return robust_mean(means, scheme, loss, tol);
}

ProxyResult robust_diff(const Vector& theta, const Vector& theta_prime, const SampleMatrix& data,
                        const RiskModel& model, const BlockScheme& scheme, const ScaleLoss& loss,
                        double tol) {
  const auto means = group_diff_means(model, data, scheme.groups(), theta, theta_prime);
  return robust_mean(means, scheme, loss, tol);
}

double u_statistic_proxy(const Vector& theta, const SampleMatrix& data, Index n,
                         const RiskModel& model, const ScaleLoss& loss, double delta, double tol) {
  const Index N = data.rows();
  const SubsetFamily family(N, n);
  if (!(delta > 0.0)) throw ConfigError("Delta_n must be positive");
  std::vector<double> losses(static_cast<std::size_t>(N));
  for (Index i = 0; i < N; ++i) losses[static_cast<std::size_t>(i)] = model.loss(theta, data.row(i).transpose());
  std::sort(losses.begin(), losses.end());

  const GroupView groups = family.groups();
  std::vector<double> means(static_cast<std::size_t>(groups.count()));
  for (Index j = 0; j < groups.count(); ++j) {
    double acc = 0.0;
    for (Index i : groups.group(j)) acc += losses[static_cast<std::size_t>(i)];
    means[static_cast<std::size_t>(j)] = acc / static_cast<double>(n);
  }
  return robust_mean(means, argument_scale(n, delta), loss, tol).value;
}

}  // namespace robust_erm
