#include "robust_erm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>

#include "robust_erm/errors.hpp"
#include "robust_erm/robust_proxy.hpp"
#include "robust_erm/stats.hpp"

namespace robust_erm {

namespace {

constexpr double kMaxWork = 1e8;  // R * N guard

template <typename Job>
void parallel_for(Index count, int threads, Job job) {
  int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = static_cast<int>(std::min<Index>(workers, std::max<Index>(count, 1)));
  if (workers <= 1) {
    for (Index i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<Index> next{0};
  std::vector<std::jthread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (Index i = next++; i < count; i = next++) job(i);
    });
  }
}

SampleMatrix draw_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  SampleMatrix data = sample_clean(*cfg.model, cfg.N, seed);
  if (cfg.contamination.outliers > 0) {
    data = contaminate(data, *cfg.model, cfg.contamination, child_seed(seed, 0, 1)).data;
  }
  return data;
}

std::string describe(const DeltaPolicy& p) {
  return p.kind == DeltaPolicy::Kind::constant ? "constant:" + format_double(p.value)
                                               : "mad_scaled:floor=" + format_double(p.floor);
}

double upper_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const auto pos = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(pos, 1, v.size()) - 1];
}

}  // namespace

const char* to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::direct:
      return "direct";
    case EstimatorKind::minmax_1:
      return "minmax_1";
    case EstimatorKind::minmax_2:
      return "minmax_2";
    case EstimatorKind::plain:
      return "plain";
    default:
      return "u_stat";
  }
}

EstimatorKind estimator_from_string(const std::string& name) {
  for (auto k : {EstimatorKind::direct, EstimatorKind::minmax_1, EstimatorKind::minmax_2,
                 EstimatorKind::plain, EstimatorKind::u_stat}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown estimator '" + name + "'; expected one of direct, minmax_1, minmax_2, plain, u_stat");
}

std::uint64_t child_seed(std::uint64_t master, std::uint64_t index, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

void ExperimentConfig::validate() const {
  if (!model) throw ConfigError("experiment needs a model");
  if (R < 2) throw ConfigError("replications must be at least 2");
  if (N < 2) throw ConfigError("sample size must be at least 2");
  if (k < 1 || 2 * k > N) {
    throw ConfigError("block count k=" + std::to_string(k) + " must satisfy 1 <= k <= N/2 (N=" +
                      std::to_string(N) + ")");
  }
  if (static_cast<double>(R) * static_cast<double>(N) > kMaxWork) {
    throw ConfigError("resource guard: R * N = " + std::to_string(R * N) + " exceeds 1e8");
  }
  if (contamination.outliers < 0 || contamination.outliers >= N) {
    throw ConfigError("outlier count must satisfy 0 <= O < N");
  }
  if (kind == EstimatorKind::u_stat && N > SubsetFamily::max_sample_count()) {
    throw ConfigError("u_stat enumerates all subsets and supports N <= 12");
  }
  solver.validate();
}

Replication estimate_once(const ExperimentConfig& cfg, const SampleMatrix& data, const ScaleLoss& loss) {
  const RiskModel& model = *cfg.model;
  Replication rep;
  const Vector pilot = model.pilot(data);
  if (cfg.kind == EstimatorKind::plain) {
    const auto r = plain_erm(data, model, cfg.solver, pilot);
    rep.theta_hat = r.theta_hat;
    rep.status = r.status;
    rep.iterations = r.iterations;
    return rep;
  }
  BlockScheme scheme = make_blocks(data.rows(), cfg.k);
  const auto means = group_loss_means(model, data, scheme.groups(), pilot);
  rep.delta = resolve_delta(cfg.delta, means, scheme.block_size());
  scheme = scheme.with_delta(rep.delta);
  EstimateResult r;
  switch (cfg.kind) {
    case EstimatorKind::direct:
      r = minimize_robust(data, model, scheme, loss, cfg.solver, pilot);
      break;
    case EstimatorKind::minmax_1:
      r = minmax_estimate(data, model, scheme, loss, cfg.solver, pilot).first;
      break;
    case EstimatorKind::minmax_2:
      r = minmax_estimate(data, model, scheme, loss, cfg.solver, pilot).second;
      break;
    default:
      r = minimize_u_statistic(data, model, scheme.block_size(), rep.delta, loss, cfg.solver, pilot);
      break;
  }
  rep.theta_hat = r.theta_hat;
  rep.status = r.status;
  rep.iterations = r.iterations;
  return rep;
}

ReplicationSet replicate(const ExperimentConfig& cfg) {
  cfg.validate();
  const SmoothHuber loss(cfg.loss_options);
  const Index R = cfg.R;
  std::vector<std::optional<Replication>> results(static_cast<std::size_t>(R));
  std::vector<std::string> messages(static_cast<std::size_t>(R));

  parallel_for(R, cfg.threads, [&](Index i) {
    const std::uint64_t seed = cfg.forced_child_seed ? *cfg.forced_child_seed
                                                     : child_seed(cfg.master_seed, static_cast<std::uint64_t>(i));
    ExperimentConfig local = cfg;
    local.solver.seed = child_seed(seed, 0, 2);
    try {
      const SampleMatrix data = draw_data(local, seed);
      Replication rep = estimate_once(local, data, loss);
      if (rep.status == EstimateStatus::degenerate_weights) {
        messages[static_cast<std::size_t>(i)] = "degenerate weights";
      } else if (!rep.theta_hat.allFinite()) {
        messages[static_cast<std::size_t>(i)] = "non-finite estimate";
      } else {
        results[static_cast<std::size_t>(i)] = std::move(rep);
      }
    } catch (const NumericalError& e) {
      messages[static_cast<std::size_t>(i)] = e.what();
    }
  });

  ReplicationSet set;
  set.kind = cfg.kind;
  set.model_id = cfg.model->id();
  set.N = cfg.N;
  set.k = cfg.k;
  set.n = cfg.N / cfg.k;
  set.samples_used = cfg.kind == EstimatorKind::plain ? cfg.N : set.n * cfg.k;
  set.delta_policy = describe(cfg.delta);
  set.contamination = cfg.contamination;
  set.master_seed = cfg.master_seed;
  set.requested = R;

  const Vector& theta0 = cfg.model->population().theta0;
  const double root_n = std::sqrt(static_cast<double>(set.samples_used));
  std::vector<Index> kept;
  for (Index i = 0; i < R; ++i) {
    if (results[static_cast<std::size_t>(i)]) {
      kept.push_back(i);
    } else {
      ++set.failures;
      set.failure_messages.push_back("replication " + std::to_string(i) + ": " +
                                     messages[static_cast<std::size_t>(i)]);
    }
  }
  set.errors.resize(static_cast<Index>(kept.size()), theta0.size());
  for (std::size_t r = 0; r < kept.size(); ++r) {
    Replication& rep = *results[static_cast<std::size_t>(kept[r])];
    set.errors.row(static_cast<Index>(r)) = (root_n * (rep.theta_hat - theta0)).transpose();
    if (rep.status != EstimateStatus::converged) ++set.not_converged;
    set.runs.push_back(std::move(rep));
  }
  set.index = std::move(kept);
  if (static_cast<double>(set.failures) > 0.05 * static_cast<double>(R)) {
    throw NumericalError(std::to_string(set.failures) + " of " + std::to_string(R) +
                         " replications failed (limit 5%)");
  }
  return set;
}

NormalityReport ks_normality(const ReplicationSet& set, const AsymptoticCovariance& theory) {
  const Index d = set.errors.cols();
  if (theory.matrix.rows() != d || theory.matrix.cols() != d) {
    throw ConfigError("theoretical covariance dimension does not match the errors");
  }
  if (set.errors.rows() < 2) throw ConfigError("normality report needs at least two replications");
  NormalityReport rep;
  for (Index c = 0; c < d; ++c) {
    const double var = theory.matrix(c, c);
    if (!(var > 0.0)) throw ConfigError("theoretical variance of coordinate " + std::to_string(c + 1) + " is zero");
    std::vector<double> z(static_cast<std::size_t>(set.errors.rows()));
    for (Index r = 0; r < set.errors.rows(); ++r) z[static_cast<std::size_t>(r)] = set.errors(r, c) / std::sqrt(var);
    const double stat = ks_statistic(z);
    rep.ks_stats.push_back(stat);
    rep.ks_pvalues.push_back(ks_pvalue(stat, set.errors.rows()));
  }
  rep.empirical_covariance = sample_covariance(set.errors);
  rep.cov_rel_error =
      operator_norm_sym(rep.empirical_covariance - theory.matrix) / operator_norm_sym(theory.matrix);
  rep.mean_norm = set.errors.colwise().mean().norm();
  return rep;
}

std::vector<BreakdownRow> breakdown_curve(const BreakdownConfig& config) {
  if (config.kinds.empty() || config.kappas.empty()) throw ConfigError("breakdown needs estimators and kappas");
  for (double kappa : config.kappas) {
    if (!(kappa >= 0.0 && kappa <= 0.4)) throw ConfigError("kappa must lie in [0, 0.4]");
  }
  std::vector<BreakdownRow> rows;
  const Vector& theta0 = config.base.model->population().theta0;
  for (EstimatorKind kind : config.kinds) {
    for (double kappa : config.kappas) {
      ExperimentConfig cfg = config.base;
      cfg.kind = kind;
      cfg.contamination = config.base.contamination.with_fraction(kappa, cfg.N);
      cfg.k = config.k_policy.kind == BlockCountPolicy::Kind::fixed
                  ? config.k_policy.k
                  : block_count_for_contamination(cfg.N, cfg.contamination.outliers, config.k_policy.tau,
                                                  config.k_policy.k);
      const ReplicationSet set = replicate(cfg);
      std::vector<double> err;
      for (const auto& run : set.runs) err.push_back((run.theta_hat - theta0).norm());
      rows.push_back({kind, kappa, cfg.contamination.outliers, cfg.k, median(err), set.failures});
    }
  }
  return rows;
}

std::vector<ConcentrationRow> concentration_check(const ConcentrationConfig& config) {
  if (!config.model) throw ConfigError("concentration check needs a model");
  if (config.R < 2) throw ConfigError("replications must be at least 2");
  if (config.theta.size() != config.model->dim()) throw ConfigError("theta has the wrong dimension");
  for (double s : config.s_values) {
    if (!(s >= 1.0)) throw ConfigError("s must be at least 1");
  }
  const SmoothHuber loss(SmoothHuberOptions{1e-3, 96, true});
  const double truth = config.model->risk(config.theta);
  std::vector<ConcentrationRow> rows;
  for (std::size_t g = 0; g < config.N_grid.size(); ++g) {
    const Index N = config.N_grid[g];
    if (config.k < 1 || 2 * config.k > N) throw ConfigError("k must satisfy 1 <= k <= N/2");
    if (static_cast<double>(2 * config.R) * static_cast<double>(N) > kMaxWork) {
      throw ConfigError("resource guard: 2 R N exceeds 1e8");
    }
    const BlockScheme base = make_blocks(N, config.k);
    // Errors of the robust proxy and of the plain mean of the loss over the used samples.
    auto run = [&](std::uint64_t stream) {
      std::vector<double> robust(static_cast<std::size_t>(config.R)), plain(static_cast<std::size_t>(config.R));
      for (Index i = 0; i < config.R; ++i) {
        const SampleMatrix data =
            sample_clean(*config.model, N, child_seed(config.seed, static_cast<std::uint64_t>(i), stream));
        const auto means = group_loss_means(*config.model, data, base.groups(), config.theta);
        const double delta = resolve_delta(config.delta, means, base.block_size());
        const double value = robust_mean(means, base.with_delta(delta), loss).value;
        double avg = 0.0;
        for (double m : means) avg += m;
        avg /= static_cast<double>(means.size());
        robust[static_cast<std::size_t>(i)] = std::abs(value - truth);
        plain[static_cast<std::size_t>(i)] = std::abs(avg - truth);
      }
      return std::pair{robust, plain};
    };
    auto rate = [&](double s) {
      return std::sqrt(s / static_cast<double>(N)) + static_cast<double>(config.k) / static_cast<double>(N);
    };
    const auto [pilot_robust, pilot_plain] = run(10 + 2 * g);
    const double q = 1.0 - 1.0 / config.calibration_s;
    const double c_robust = upper_quantile(pilot_robust, q) / rate(config.calibration_s);
    const double c_plain = upper_quantile(pilot_plain, q) / rate(config.calibration_s);
    const auto [fresh_robust, fresh_plain] = run(11 + 2 * g);
    for (double s : config.s_values) {
      ConcentrationRow row;
      row.N = N;
      row.s = s;
      row.threshold = c_robust * rate(s);
      row.plain_threshold = c_plain * rate(s);
      const auto count = [](const std::vector<double>& v, double t) {
        return static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) { return x > t; })) /
               static_cast<double>(v.size());
      };
      row.frequency = count(fresh_robust, row.threshold);
      row.plain_frequency = count(fresh_plain, row.plain_threshold);
      row.bound = 1.0 / s;
      row.standard_error = std::sqrt(row.bound * (1.0 - row.bound) / static_cast<double>(config.R));
      rows.push_back(row);
    }
  }
  return rows;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_replications_csv(const ReplicationSet& set, std::ostream& out) {
  out << "replication";
  for (Index c = 0; c < set.errors.cols(); ++c) out << ",error_" << (c + 1);
  out << '\n';
  for (Index r = 0; r < set.errors.rows(); ++r) {
    out << set.index[static_cast<std::size_t>(r)];
    for (Index c = 0; c < set.errors.cols(); ++c) out << ',' << format_double(set.errors(r, c));
    out << '\n';
  }
}

void write_breakdown_csv(const std::vector<BreakdownRow>& rows, std::ostream& out) {
  out << "estimator,kappa,outliers,k,median_abs_error,failures\n";
  for (const auto& r : rows) {
    out << to_string(r.kind) << ',' << format_double(r.kappa) << ',' << r.outliers << ',' << r.k << ','
        << format_double(r.median_abs_error) << ',' << r.failures << '\n';
  }
}

void write_histogram_svg(const ReplicationSet& set, Index coordinate, double variance, std::ostream& out) {
  if (coordinate < 0 || coordinate >= set.errors.cols()) throw ConfigError("coordinate out of range");
  if (!(variance > 0.0)) throw ConfigError("histogram needs a positive reference variance");
  constexpr int kBins = 40;
  constexpr double kWidth = 600, kHeight = 300;
  const double sd = std::sqrt(variance);
  const double lo = -4 * sd, hi = 4 * sd, bin = (hi - lo) / kBins;
  std::vector<double> counts(kBins, 0.0);
  for (Index r = 0; r < set.errors.rows(); ++r) {
    const int b = static_cast<int>(std::floor((set.errors(r, coordinate) - lo) / bin));
    if (b >= 0 && b < kBins) counts[static_cast<std::size_t>(b)] += 1.0;
  }
  const double total = static_cast<double>(set.errors.rows());
  const double peak = 1.0 / (sd * std::sqrt(2 * std::numbers::pi));
  double top = peak;
  for (double& c : counts) {
    c /= total * bin;
    top = std::max(top, c);
  }
  const auto px = [&](double x) { return (x - lo) / (hi - lo) * kWidth; };
  const auto py = [&](double y) { return kHeight - y / (1.1 * top) * kHeight; };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
  for (int b = 0; b < kBins; ++b) {
    const double x = px(lo + b * bin), y = py(counts[static_cast<std::size_t>(b)]);
    out << "<rect x=\"" << format_double(x) << "\" y=\"" << format_double(y) << "\" width=\""
        << format_double(kWidth / kBins) << "\" height=\"" << format_double(kHeight - y)
        << "\" fill=\"#9ab\" stroke=\"#fff\"/>\n";
  }
  out << "<polyline fill=\"none\" stroke=\"#c33\" points=\"";
  for (int i = 0; i <= 200; ++i) {
    const double x = lo + (hi - lo) * i / 200.0;
    out << format_double(px(x)) << ',' << format_double(py(peak * std::exp(-0.5 * x * x / variance))) << ' ';
  }
  out << "\"/>\n</svg>\n";
}

}  // namespace robust_erm
