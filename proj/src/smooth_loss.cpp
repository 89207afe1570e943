#include "robust_erm/smooth_loss.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "robust_erm/errors.hpp"

namespace robust_erm {

namespace {

constexpr double kKnee = 1.5;  // Huber threshold

// Number of panels used once, at construction, for the normalizing integral.
constexpr int kNormalizerPanels = 64;

void require_order(int order, int lo, int hi) {
  if (order < lo || order > hi) {
    throw DomainError("derivative order " + std::to_string(order) + " outside " +
                      std::to_string(lo) + ".." + std::to_string(hi));
  }
}

}  // namespace

double huber(double y) {
  const double a = std::abs(y);
  return a <= kKnee ? 0.5 * y * y : kKnee * (a - 0.75);
}

double huber_d1(double y) { return std::clamp(y, -kKnee, kKnee); }

double bump_unnormalized(double x, int order) {
  require_order(order, 0, 4);
  if (!(std::abs(x) < 0.5)) return 0.0;
  const double u1 = 1.0 - 2.0 * x;
  const double u2 = 1.0 + 2.0 * x;
  // exponent g(x) = -4 / (1 - 4x^2) = -2 (1/u1 + 1/u2)
  const double g = -2.0 * (1.0 / u1 + 1.0 / u2);
  if (g < -740.0) return 0.0;
  const double e = std::exp(g);
  if (order == 0) return e;

  // g^(m) = -2 m! 2^m (u1^-(m+1) + (-1)^m u2^-(m+1))
  double gd[5] = {g, 0, 0, 0, 0};
  double fact = 1.0, pow2 = 1.0;
  for (int m = 1; m <= order; ++m) {
    fact *= m;
    pow2 *= 2.0;
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    gd[m] = -2.0 * fact * pow2 * (std::pow(u1, -(m + 1)) + sign * std::pow(u2, -(m + 1)));
  }
  const double g1 = gd[1], g2 = gd[2], g3 = gd[3], g4 = gd[4];
  switch (order) {
    case 1:
      return e * g1;
    case 2:
      return e * (g2 + g1 * g1);
    case 3:
      return e * (g3 + 3.0 * g1 * g2 + g1 * g1 * g1);
    default:
      return e * (g4 + 4.0 * g1 * g3 + 3.0 * g2 * g2 + 6.0 * g1 * g1 * g2 + g1 * g1 * g1 * g1);
  }
}

SmoothHuber::SmoothHuber(const SmoothHuberOptions& options) : options_(options) {
  if (!(options_.grid_step > 0.0) || !std::isfinite(options_.grid_step) || options_.grid_step > 0.5) {
    throw ConfigError("grid_step must lie in (0, 0.5]");
  }
  if (options_.quadrature_order < 16) throw ConfigError("quadrature_order must be at least 16");
  unit_rule_ = gauss_legendre<double>(options_.quadrature_order);

  const double panel = 1.0 / kNormalizerPanels;
  double mass = 0.0, second = 0.0;
  for (int p = 0; p < kNormalizerPanels; ++p) {
    const double a = -0.5 + p * panel;
    const double mid = a + 0.5 * panel;
    for (Index i = 0; i < unit_rule_.size(); ++i) {
      const double x = mid + 0.5 * panel * unit_rule_.nodes[i];
      const double w = 0.5 * panel * unit_rule_.weights[i];
      const double b = bump_unnormalized(x);
      mass += w * b;
      second += w * b * 0.5 * x * x;
    }
  }
  normalizer_ = 1.0 / mass;
  rho0_ = second / mass;
  build_table();
}

SmoothHuber SmoothHuber::with_table(bool enabled) const {
  SmoothHuber copy = *this;
  copy.options_.use_table = enabled;
  return copy;
}

double SmoothHuber::bump(double x, int order) const {
  return normalizer_ * bump_unnormalized(x, order);
}

double SmoothHuber::transition_exact(double z, int order) const {
  // z in (1, 2): the kink of H' at z - x = 3/2 sits at x = a inside the
  // support of psi. Left of it H'(z - x) = 3/2, right of it H'(z - x) = z - x.
  const double a = z - kKnee;
  auto integrate = [&](double lo, double hi, auto&& f) {
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    double acc = 0.0;
    for (Index i = 0; i < unit_rule_.size(); ++i) {
      acc += unit_rule_.weights[i] * f(mid + half * unit_rule_.nodes[i]);
    }
    return half * acc;
  };
  if (order == 0) {
    const double left = integrate(-0.5, a, [&](double x) {
      return kKnee * (z - x - 0.75) * bump_unnormalized(x);
    });
    const double right = integrate(a, 0.5, [&](double x) {
      const double y = z - x;
      return 0.5 * y * y * bump_unnormalized(x);
    });
    return normalizer_ * (left + right);
  }
  const int k = order - 1;
  const double left = integrate(-0.5, a, [&](double x) { return kKnee * bump_unnormalized(x, k); });
  const double right = integrate(a, 0.5, [&](double x) { return (z - x) * bump_unnormalized(x, k); });
  return normalizer_ * (left + right);
}

void SmoothHuber::build_table() {
  const int cells = std::max(1, static_cast<int>(std::lround(1.0 / options_.grid_step)));
  table_.assign(4, std::vector<double>(cells + 1));
  const double h = 1.0 / cells;
  for (int i = 0; i <= cells; ++i) {
    const double z = 1.0 + i * h;
    for (int order = 0; order <= 3; ++order) {
      double v;
      if (i == 0) {
        v = order == 0 ? rho0_ + 0.5 : (order <= 2 ? 1.0 : 0.0);
      } else if (i == cells) {
        v = order == 0 ? kKnee * (2.0 - 0.75) : (order == 1 ? kKnee : 0.0);
      } else {
        v = transition_exact(z, order);
      }
      table_[order][i] = v;
    }
  }
}

double SmoothHuber::transition_table(double z, int order) const {
  const int cells = static_cast<int>(table_[0].size()) - 1;
  const double h = 1.0 / cells;
  const double t = (z - 1.0) / h;
  const int i = std::clamp(static_cast<int>(t), 0, cells - 1);
  const double s = t - i;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  const auto& f = table_[order];
  const auto& df = table_[order + 1];
  return h00 * f[i] + h10 * h * df[i] + h01 * f[i + 1] + h11 * h * df[i + 1];
}

double SmoothHuber::value(double z) const {
  const double a = std::abs(z);
  if (a <= 1.0) return rho0_ + 0.5 * z * z;
  if (a >= 2.0) return kKnee * (a - 0.75);
  return options_.use_table ? transition_table(a, 0) : transition_exact(a, 0);
}

double SmoothHuber::deriv(double z, int order) const {
  require_order(order, 1, 5);
  const double a = std::abs(z);
  // rho^(k)(-z) = (-1)^k rho^(k)(z)
  const double parity = (z < 0.0 && order % 2 == 1) ? -1.0 : 1.0;
  if (a <= 1.0) {
    if (order == 1) return z;
    return order == 2 ? 1.0 : 0.0;
  }
  if (a >= 2.0) return order == 1 ? parity * kKnee : 0.0;
  // H''' is a pair of point masses at -3/2 and 3/2, so on the band
  // rho^(k)(z) = -psi^(k-3)(z - 3/2) for k >= 3.
  if (order >= 3) return -parity * bump(a - kKnee, order - 3);
  const double v = (options_.use_table && order <= 2) ? transition_table(a, order)
                                                      : transition_exact(a, order);
  return parity * v;
}

SmoothHuber build_smoothed_huber(double grid_step, int quadrature_order, bool use_table) {
  SmoothHuberOptions options;
  options.grid_step = grid_step;
  options.quadrature_order = quadrature_order;
  options.use_table = use_table;
  return SmoothHuber(options);
}

double rho(const ScaleLoss& loss, double z) {
  if (!std::isfinite(z)) throw DomainError("rho: non-finite argument");
  return loss.value(z);
}

double rho_deriv(const ScaleLoss& loss, double z, int order) {
  require_order(order, 1, 5);
  if (!std::isfinite(z)) throw DomainError("rho_deriv: non-finite argument");
  return loss.deriv(z, order);
}

bool ContractReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const ContractCheck& c) { return c.passed(); });
}

const ContractCheck* ContractReport::first_failure() const {
  for (const auto& c : checks) {
    if (!c.passed()) return &c;
  }
  return nullptr;
}

ContractReport verify_loss_contract(const ScaleLoss& loss, const ContractGrid& grid) {
  const auto start = std::chrono::steady_clock::now();
  if (grid.points < 2 || !(grid.hi > grid.lo)) throw ConfigError("invalid contract grid");

  const double sat = loss.saturation();
  ContractCheck identity{"rho'(z) = z on |z| <= 1", 0.0, grid.plateau_tol};
  ContractCheck saturated{"rho'(z) = const on |z| >= 2", 0.0, grid.plateau_tol};
  ContractCheck bounded{"|rho'| <= saturation", 0.0, 1e-12};
  ContractCheck curvature{"rho'' in [0, 1]", 0.0, 1e-12};
  ContractCheck curvature_plateau{"rho'' = 1 on |z| <= 1, 0 on |z| >= 2", 0.0, grid.plateau_tol};
  ContractCheck even{"rho(z) = rho(-z)", 0.0, 1e-12};
  ContractCheck monotone{"z - rho'(z) nondecreasing", 0.0, 1e-12};

  double prev_gap = 0.0;
  const double step = (grid.hi - grid.lo) / (grid.points - 1);
  for (int i = 0; i < grid.points; ++i) {
    const double z = grid.lo + i * step;
    const double d1 = loss.deriv(z, 1);
    const double d2 = loss.deriv(z, 2);
    const double a = std::abs(z);
    if (a <= 1.0) {
      identity.max_violation = std::max(identity.max_violation, std::abs(d1 - z));
      curvature_plateau.max_violation = std::max(curvature_plateau.max_violation, std::abs(d2 - 1.0));
    }
    if (a >= 2.0) {
      saturated.max_violation = std::max(saturated.max_violation, std::abs(std::abs(d1) - sat));
      curvature_plateau.max_violation = std::max(curvature_plateau.max_violation, std::abs(d2));
    }
    bounded.max_violation = std::max(bounded.max_violation, std::abs(d1) - sat);
    curvature.max_violation = std::max({curvature.max_violation, -d2, d2 - 1.0});
    even.max_violation = std::max(even.max_violation, std::abs(loss.value(z) - loss.value(-z)));
    const double gap = z - d1;
    if (i > 0) monotone.max_violation = std::max(monotone.max_violation, prev_gap - gap);
    prev_gap = gap;
  }

  ContractReport report;
  report.checks = {identity, saturated, bounded, curvature, curvature_plateau, even, monotone};

  // Central differences across the transition band where the derivatives vary.
  const double fd_lo = -2.5, fd_hi = 2.5;
  for (int k = 0; k <= 4; ++k) {
    ContractCheck fd{"finite-difference rho^(" + std::to_string(k) + ") -> rho^(" +
                         std::to_string(k + 1) + ")",
                     0.0, grid.fd_tol};
    auto f = [&](double z) { return k == 0 ? loss.value(z) : loss.deriv(z, k); };
    for (int i = 0; i < grid.fd_points; ++i) {
      const double z = fd_lo + (fd_hi - fd_lo) * (i + 0.5) / grid.fd_points;
      const double central = (f(z + grid.fd_step) - f(z - grid.fd_step)) / (2.0 * grid.fd_step);
      fd.max_violation = std::max(fd.max_violation, std::abs(central - loss.deriv(z, k + 1)));
    }
    report.checks.push_back(fd);
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace robust_erm
