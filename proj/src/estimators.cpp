#include "robust_erm/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "robust_erm/errors.hpp"

namespace robust_erm {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;

struct Eval {
  double value = 0.0;
  Vector grad;
  std::vector<double> weights;
  bool degenerate = false;
};

Vector empirical_gradient(const RiskModel& model, const SampleMatrix& data, const Vector& theta) {
  Vector g = Vector::Zero(model.dim());
  const double inv = 1.0 / static_cast<double>(data.rows());
  for (Index i = 0; i < data.rows(); ++i) model.add_grad_loss(theta, data.row(i).transpose(), inv, g);
  return g;
}

// Normalizes rho'' weights in place; returns their sum.
double normalize(std::vector<double>& w) {
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  if (sum > 0.0) {
    for (double& x : w) x /= sum;
  }
  return sum;
}

// sum_j w_j * mean gradient over group j, skipping zero weights.
Vector weighted_group_gradient(const RiskModel& model, const SampleMatrix& data, const GroupView& groups,
                               const Vector& theta, const std::vector<double>& w) {
  Vector g = Vector::Zero(model.dim());
  const double inv = 1.0 / static_cast<double>(groups.group_size);
  for (Index j = 0; j < groups.count(); ++j) {
    const double wj = w[static_cast<std::size_t>(j)];
    if (wj == 0.0) continue;
    for (Index i : groups.group(j)) model.add_grad_loss(theta, data.row(i).transpose(), wj * inv, g);
  }
  return g;
}

// theta -> robust proxy over a family of equal-size groups.
class GroupProxy {
 public:
  GroupProxy(const RiskModel& model, const SampleMatrix& data, GroupView groups, double scale,
             const ScaleLoss& loss, double tol)
      : model_(model), data_(data), groups_(groups), scale_(scale), loss_(loss), tol_(tol) {}

  Eval operator()(const Vector& theta) const {
    Eval e;
    const auto means = group_loss_means(model_, data_, groups_, theta);
    e.value = robust_mean(means, scale_, loss_, tol_).value;
    e.weights = curvature_weights(means, e.value, scale_, loss_);
    if (normalize(e.weights) > 0.0) {
      e.grad = weighted_group_gradient(model_, data_, groups_, theta, e.weights);
    } else {
      e.degenerate = true;
      e.grad = empirical_gradient(model_, data_, theta);
    }
    return e;
  }

 private:
  const RiskModel& model_;
  const SampleMatrix& data_;
  GroupView groups_;
  double scale_;
  const ScaleLoss& loss_;
  double tol_;
};

class EmpiricalRisk {
 public:
  EmpiricalRisk(const RiskModel& model, const SampleMatrix& data) : model_(model), data_(data) {}

  Eval operator()(const Vector& theta) const {
    Eval e;
    double acc = 0.0;
    for (Index i = 0; i < data_.rows(); ++i) acc += model_.loss(theta, data_.row(i).transpose());
    e.value = acc / static_cast<double>(data_.rows());
    e.grad = empirical_gradient(model_, data_, theta);
    return e;
  }

 private:
  const RiskModel& model_;
  const SampleMatrix& data_;
};

// Armijo test with a fallback for steps whose decrease is below the
// resolution of the objective: accept when the value does not rise beyond
// that resolution and the gradient shrinks.
bool accept_step(const Eval& cur, const Eval& cand, double t, double gg, double sign) {
  if (!std::isfinite(cand.value)) return false;
  const double f0 = sign * cur.value, f1 = sign * cand.value;
  if (f1 <= f0 - kArmijo * t * gg) return true;
  const double resolution = 1e-11 * std::max(1.0, std::abs(cur.value));
  return t * gg <= resolution && f1 <= f0 + resolution && cand.grad.squaredNorm() < gg;
}

void require_start(const RiskModel& model, const Vector& theta) {
  if (theta.size() != model.dim()) throw ConfigError("theta_init has the wrong dimension");
  if (!theta.allFinite()) throw ConfigError("theta_init must be finite");
  if (!model.admissible(theta)) throw ConfigError("theta_init is outside the model's parameter domain");
}

template <typename Objective>
EstimateResult descend(const Objective& objective, const RiskModel& model, const SolverConfig& cfg,
                       Vector theta) {
  EstimateResult res;
  Eval cur = objective(theta);
  if (!std::isfinite(cur.value)) throw NumericalError("non-finite objective at the starting point");
  double t = cfg.step_init;
  Vector prev_theta, prev_grad;
  int it = 0;
  bool stalled = false;
  for (; it < cfg.max_iter; ++it) {
    const double gg = cur.grad.squaredNorm();
    if (!cur.degenerate && std::sqrt(gg) <= cfg.grad_tol) break;
    if (prev_theta.size() > 0 && !cur.degenerate) {
      const Vector s = theta - prev_theta;
      const Vector y = cur.grad - prev_grad;
      const double sy = s.dot(y);
      if (sy > 0.0) t = std::clamp(s.squaredNorm() / sy, 1e-12, 1e12);
    }
    bool accepted = false;
    for (int bt = 0; bt < kMaxBacktracks; ++bt, t *= cfg.backtrack_factor) {
      const Vector cand_theta = theta - t * cur.grad;
      if (!model.admissible(cand_theta)) continue;
      Eval cand = objective(cand_theta);
      if (!accept_step(cur, cand, t, gg, 1.0)) continue;
      prev_theta = std::move(theta);
      prev_grad = std::move(cur.grad);
      theta = cand_theta;
      cur = std::move(cand);
      accepted = true;
      break;
    }
    if (!accepted) {
      stalled = true;
      break;
    }
  }
  res.theta_hat = theta;
  res.iterations = it;
  res.grad_norm = cur.grad.norm();
  res.objective = cur.value;
  res.weights = cur.weights;
  if (cur.degenerate) {
    res.status = EstimateStatus::degenerate_weights;
  } else if (!stalled && res.grad_norm <= cfg.grad_tol) {
    res.status = EstimateStatus::converged;
  } else {
    res.status = EstimateStatus::max_iter;
  }
  return res;
}

template <typename Objective>
EstimateResult multistart(const Objective& objective, const RiskModel& model, const SolverConfig& cfg,
                          const Vector& theta_init) {
  cfg.validate();
  require_start(model, theta_init);
  EstimateResult best = descend(objective, model, cfg, theta_init);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  const double spread =
      cfg.jitter * std::max(1.0, theta_init.norm() / std::sqrt(static_cast<double>(theta_init.size())));
  for (int r = 0; r < cfg.restarts; ++r) {
    Vector start = theta_init;
    for (int attempt = 0; attempt < 20; ++attempt) {
      start = theta_init;
      for (Index c = 0; c < start.size(); ++c) start[c] += spread * normal(rng);
      if (model.admissible(start)) break;
    }
    if (!model.admissible(start)) continue;
    EstimateResult res = descend(objective, model, cfg, start);
    const bool better_status =
        res.status == EstimateStatus::converged && best.status != EstimateStatus::converged;
    const bool worse_status =
        best.status == EstimateStatus::converged && res.status != EstimateStatus::converged;
    if (better_status || (!worse_status && res.objective < best.objective)) best = std::move(res);
  }
  return best;
}

struct PairEval {
  double value = 0.0;
  Vector grad_theta;
  Vector grad_prime;  // ascent direction for the max player
  std::vector<double> weights;
  bool degenerate = false;
};

class DiffProxy {
 public:
  DiffProxy(const RiskModel& model, const SampleMatrix& data, GroupView groups, double scale,
            const ScaleLoss& loss, double tol)
      : model_(model), data_(data), groups_(groups), scale_(scale), loss_(loss), tol_(tol) {}

  PairEval operator()(const Vector& theta, const Vector& theta_prime) const {
    PairEval e;
    const auto means = group_diff_means(model_, data_, groups_, theta, theta_prime);
    e.value = robust_mean(means, scale_, loss_, tol_).value;
    e.weights = curvature_weights(means, e.value, scale_, loss_);
    if (normalize(e.weights) > 0.0) {
      e.grad_theta = weighted_group_gradient(model_, data_, groups_, theta, e.weights);
      e.grad_prime = -weighted_group_gradient(model_, data_, groups_, theta_prime, e.weights);
    } else {
      e.degenerate = true;
      e.grad_theta = empirical_gradient(model_, data_, theta);
      e.grad_prime = -empirical_gradient(model_, data_, theta_prime);
    }
    return e;
  }

 private:
  const RiskModel& model_;
  const SampleMatrix& data_;
  GroupView groups_;
  double scale_;
  const ScaleLoss& loss_;
  double tol_;
};

// One backtracking step for one player; `ascent` selects the max player.
bool gda_step(const DiffProxy& proxy, const RiskModel& model, Vector& theta, Vector& theta_prime,
              PairEval& cur, double& t, double factor, bool ascent) {
  const Vector& dir = ascent ? cur.grad_prime : cur.grad_theta;
  const double gg = dir.squaredNorm();
  const double sign = ascent ? -1.0 : 1.0;
  for (int bt = 0; bt < kMaxBacktracks; ++bt, t *= factor) {
    const Vector cand = ascent ? Vector(theta_prime + t * dir) : Vector(theta - t * dir);
    if (!model.admissible(cand)) continue;
    PairEval next = ascent ? proxy(theta, cand) : proxy(cand, theta_prime);
    Eval a{cur.value, ascent ? cur.grad_prime : cur.grad_theta, {}, false};
    Eval b{next.value, ascent ? next.grad_prime : next.grad_theta, {}, false};
    if (!accept_step(a, b, t, gg, sign)) continue;
    (ascent ? theta_prime : theta) = cand;
    cur = std::move(next);
    t = std::min(2.0 * t, 1e12);
    return true;
  }
  return false;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(step_init > 0.0)) throw ConfigError("step_init must be positive");
  if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) {
    throw ConfigError("backtrack_factor must lie in (0, 1)");
  }
  if (!(grad_tol > 0.0)) throw ConfigError("grad_tol must be positive");
  if (max_iter < 1) throw ConfigError("max_iter must be positive");
  if (gda_inner_steps < 1) throw ConfigError("gda_inner_steps must be positive");
  if (restarts < 0) throw ConfigError("restarts must be non-negative");
  if (!(jitter >= 0.0)) throw ConfigError("jitter must be non-negative");
  if (!(root_tol > 0.0)) throw ConfigError("root_tol must be positive");
}

const char* to_string(EstimateStatus s) {
  switch (s) {
    case EstimateStatus::converged:
      return "converged";
    case EstimateStatus::max_iter:
      return "max_iter";
    default:
      return "degenerate_weights";
  }
}

Vector robust_gradient(const Vector& theta, const SampleMatrix& data, const RiskModel& model,
                       const BlockScheme& scheme, const ScaleLoss& loss, double root_tol) {
  const double scale = argument_scale(scheme.block_size(), scheme.delta_n());
  const auto means = group_loss_means(model, data, scheme.groups(), theta);
  const double z = robust_mean(means, scale, loss, root_tol).value;
  auto w = curvature_weights(means, z, scale, loss);
  if (!(normalize(w) > 0.0)) throw DegenerateWeightsError("all block weights rho'' vanish");
  return weighted_group_gradient(model, data, scheme.groups(), theta, w);
}

EstimateResult minimize_robust(const SampleMatrix& data, const RiskModel& model,
                               const BlockScheme& scheme, const ScaleLoss& loss,
                               const SolverConfig& config, const Vector& theta_init) {
  const GroupProxy proxy(model, data, scheme.groups(),
                         argument_scale(scheme.block_size(), scheme.delta_n()), loss, config.root_tol);
  return multistart(proxy, model, config, theta_init);
}

EstimateResult minimize_u_statistic(const SampleMatrix& data, const RiskModel& model, Index n,
                                    double delta, const ScaleLoss& loss,
                                    const SolverConfig& config, const Vector& theta_init) {
  if (!(delta > 0.0)) throw ConfigError("Delta_n must be positive");
  const SubsetFamily family(data.rows(), n);
  const GroupProxy proxy(model, data, family.groups(), argument_scale(n, delta), loss, config.root_tol);
  return multistart(proxy, model, config, theta_init);
}

std::pair<EstimateResult, EstimateResult> minmax_estimate(const SampleMatrix& data,
                                                          const RiskModel& model,
                                                          const BlockScheme& scheme,
                                                          const ScaleLoss& loss,
                                                          const SolverConfig& config,
                                                          const Vector& theta_init) {
  config.validate();
  require_start(model, theta_init);
  const DiffProxy proxy(model, data, scheme.groups(),
                        argument_scale(scheme.block_size(), scheme.delta_n()), loss, config.root_tol);
  Vector theta = theta_init, theta_prime = theta_init;
  PairEval cur = proxy(theta, theta_prime);
  double t_min = config.step_init, t_max = config.step_init;
  int it = 0;
  bool converged = false;
  for (; it < config.max_iter; ++it) {
    for (int s = 0; s < config.gda_inner_steps; ++s) {
      if (cur.grad_prime.norm() <= config.grad_tol) break;
      if (!gda_step(proxy, model, theta, theta_prime, cur, t_max, config.backtrack_factor, true)) break;
    }
    if (!cur.degenerate && cur.grad_theta.norm() <= config.grad_tol &&
        cur.grad_prime.norm() <= config.grad_tol) {
      converged = true;
      break;
    }
    const bool moved = gda_step(proxy, model, theta, theta_prime, cur, t_min, config.backtrack_factor, false);
    if (!moved && cur.grad_theta.norm() > config.grad_tol) {
      // Give the max player another round before declaring a stall.
      t_min = config.step_init;
    }
  }
  EstimateStatus status = converged ? EstimateStatus::converged : EstimateStatus::max_iter;
  if (cur.degenerate) status = EstimateStatus::degenerate_weights;

  EstimateResult first, second;
  first.theta_hat = theta;
  second.theta_hat = theta_prime;
  first.iterations = second.iterations = it;
  first.grad_norm = cur.grad_theta.norm();
  second.grad_norm = cur.grad_prime.norm();
  first.objective = second.objective = cur.value;
  first.weights = second.weights = cur.weights;
  first.status = second.status = status;
  return {std::move(first), std::move(second)};
}

EstimateResult plain_erm(const SampleMatrix& data, const RiskModel& model, const SolverConfig& config,
                         const Vector& theta_init) {
  if (data.rows() < 1) throw ConfigError("plain_erm needs at least one observation");
  config.validate();
  require_start(model, theta_init);
  return descend(EmpiricalRisk(model, data), model, config, theta_init);
}

}  // namespace robust_erm
