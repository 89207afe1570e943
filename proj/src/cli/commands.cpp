#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "robust_erm/asymptotics.hpp"
#include "robust_erm/cli.hpp"
#include "robust_erm/datagen.hpp"
#include "robust_erm/errors.hpp"
#include "robust_erm/estimators.hpp"
#include "robust_erm/harness.hpp"
#include "robust_erm/robust_proxy.hpp"
#include "robust_erm/smooth_loss.hpp"
#include "robust_erm/stats.hpp"

namespace robust_erm::cli {

namespace {

using nlohmann::ordered_json;

DeltaPolicy delta_policy(const RunConfig& c) {
  if (c.delta == "mad") return DeltaPolicy::mad_scaled();
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(c.delta, &used);
    if (used != c.delta.size()) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw ConfigError("delta must be 'mad' or a positive number, got '" + c.delta + "'");
  }
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("delta must be positive");
  return DeltaPolicy::constant(v);
}

SolverConfig solver_config(const RunConfig& c) {
  SolverConfig s;
  s.max_iter = c.max_iter;
  s.grad_tol = c.grad_tol;
  s.restarts = c.restarts;
  s.validate();
  return s;
}

ContaminationSpec contamination_template(const RunConfig& c) {
  ContaminationSpec s;
  if (c.strategy == "fixed_point") {
    s = ContaminationSpec::fixed_point(0, c.outlier_location);
  } else if (c.strategy == "amplify") {
    s = ContaminationSpec::amplify(0, 1e3);
  } else if (c.strategy == "adaptive") {
    s = ContaminationSpec::adaptive(0, c.outlier_location);
  } else {
    throw ConfigError("unknown strategy '" + c.strategy + "'; expected fixed_point, amplify or adaptive");
  }
  return s;
}

void check_kappa(double kappa) {
  if (!(kappa >= 0.0 && kappa <= 0.4)) throw ConfigError("kappa must lie in [0, 0.4]");
}

Index block_count(const RunConfig& c, Index N, Index outliers) {
  if (c.k_rule == "fixed") return c.k;
  if (c.k_rule == "kappa") return block_count_for_contamination(N, outliers, c.tau, c.k);
  throw ConfigError("k_rule must be 'fixed' or 'kappa'");
}

ordered_json to_json(const Vector& v) {
  ordered_json a = ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

ordered_json to_json(const Matrix& m) {
  ordered_json a = ordered_json::array();
  for (Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Vector(m.row(r).transpose())));
  return a;
}

ordered_json describe_result(const EstimateResult& r) {
  ordered_json j;
  j["theta_hat"] = to_json(r.theta_hat);
  j["status"] = to_string(r.status);
  j["iterations"] = r.iterations;
  j["grad_norm"] = r.grad_norm;
  j["objective"] = r.objective;
  j["weights"] = r.weights;
  return j;
}

std::vector<EstimatorKind> parse_kinds(const std::vector<std::string>& names) {
  std::vector<EstimatorKind> kinds;
  for (const auto& name : names) {
    if (name == "minmax") {
      kinds.push_back(EstimatorKind::minmax_1);
      kinds.push_back(EstimatorKind::minmax_2);
    } else {
      kinds.push_back(estimator_from_string(name));
    }
  }
  if (kinds.empty()) throw ConfigError("no estimator selected");
  return kinds;
}

// Loss with rho' shifted on the transition band, standing in for a corrupted table.
class BrokenTableLoss final : public ScaleLoss {
 public:
  double value(double z) const override { return inner_.value(z); }
  double deriv(double z, int order) const override {
    const double d = inner_.deriv(z, order);
    const double a = std::abs(z);
    return (order == 1 && a > 1.0 && a < 2.0) ? d + std::copysign(1e-3, z) : d;
  }
  double saturation() const override { return inner_.saturation(); }
  std::string name() const override { return "smoothed-huber-broken-table"; }

 private:
  SmoothHuber inner_{SmoothHuberOptions{1e-3, 96, true}};
};

}  // namespace

int cmd_estimate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  check_kappa(c.kappa);
  SampleMatrix data;
  ModelPtr model;
  if (!c.data.empty()) {
    data = read_samples_csv_file(c.data);
    model = make_model(c, data.cols());
    if (data.cols() != model->sample_width()) {
      throw ConfigError("data has " + std::to_string(data.cols()) + " columns but model " + model->id() + " expects " +
                        std::to_string(model->sample_width()));
    }
  } else {
    model = make_model(c);
    const std::uint64_t seed = c.seed.value_or(0);
    data = sample_clean(*model, c.N, seed);
    const auto spec = contamination_template(c).with_fraction(c.kappa, c.N);
    if (spec.outliers > 0) data = contaminate(data, *model, spec, child_seed(seed, 0, 1)).data;
  }
  const Index N = data.rows();
  const auto kinds = parse_kinds(c.estimators);
  const SmoothHuber loss;
  SolverConfig solver = solver_config(c);
  solver.seed = c.seed.value_or(0);

  const Vector pilot = model->pilot(data);
  BlockScheme scheme = make_blocks(N, block_count(c, N, std::llround(c.kappa * static_cast<double>(N))));
  const double delta =
      resolve_delta(delta_policy(c), group_loss_means(*model, data, scheme.groups(), pilot), scheme.block_size());
  scheme = scheme.with_delta(delta);

  ordered_json j;
  j["model"] = model->id();
  j["N"] = N;
  j["k"] = scheme.block_count();
  j["n"] = scheme.block_size();
  j["delta"] = delta;
  const EstimatorKind kind = kinds.front();
  j["estimator"] = to_string(kind);
  EstimateResult main;
  switch (kind) {
    case EstimatorKind::direct:
      main = minimize_robust(data, *model, scheme, loss, solver, pilot);
      j.update(describe_result(main));
      break;
    case EstimatorKind::minmax_1:
    case EstimatorKind::minmax_2: {
      auto [first, second] = minmax_estimate(data, *model, scheme, loss, solver, pilot);
      main = kind == EstimatorKind::minmax_1 ? first : second;
      j.update(describe_result(main));
      j["theta_hat_min"] = to_json(first.theta_hat);
      j["theta_hat_max"] = to_json(second.theta_hat);
      break;
    }
    case EstimatorKind::plain:
      main = plain_erm(data, *model, solver, pilot);
      j.update(describe_result(main));
      break;
    default:
      main = minimize_u_statistic(data, *model, scheme.block_size(), delta, loss, solver, pilot);
      j.update(describe_result(main));
      break;
  }
  j["proxy_value"] = robust_risk(main.theta_hat, data, *model, scheme, loss).value;
  out << j.dump(2) << '\n';
  if (main.status != EstimateStatus::converged) {
    err << "estimator did not converge: status " << to_string(main.status) << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_simulate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (!c.seed) throw ConfigError("simulate requires --seed for reproducibility");
  check_kappa(c.kappa);
  for (double kappa : c.kappas) check_kappa(kappa);
  const ModelPtr model = make_model(c);
  const auto kinds = parse_kinds(c.estimators);
  const SmoothHuber loss;

  ExperimentConfig base;
  base.model = model;
  base.N = c.N;
  base.delta = delta_policy(c);
  base.contamination = contamination_template(c).with_fraction(c.kappa, c.N);
  base.k = block_count(c, c.N, base.contamination.outliers);
  base.R = c.replications;
  base.master_seed = *c.seed;
  base.solver = solver_config(c);
  base.threads = c.threads;
  base.validate();  // resource guard before any work
  if (c.threads < 0) throw ConfigError("threads must be non-negative");

  const std::filesystem::path dir(c.out_dir);
  std::filesystem::create_directories(dir);

  ordered_json summary;
  ordered_json snap;
  snap["model"] = model->id();
  snap["N"] = c.N;
  snap["k"] = base.k;
  snap["n"] = c.N / base.k;
  snap["delta"] = c.delta;
  snap["estimators"] = c.estimators;
  snap["kappa"] = c.kappa;
  snap["outliers"] = base.contamination.outliers;
  snap["strategy"] = c.strategy;
  snap["replications"] = c.replications;
  snap["seed"] = *c.seed;
  summary["config"] = snap;

  bool passed = true;
  ordered_json runs = ordered_json::array();
  for (EstimatorKind kind : kinds) {
    ExperimentConfig cfg = base;
    cfg.kind = kind;
    const ReplicationSet set = replicate(cfg);
    ordered_json r;
    r["estimator"] = to_string(kind);
    r["kept"] = set.errors.rows();
    r["failures"] = set.failures;
    r["not_converged"] = set.not_converged;

    std::optional<AsymptoticCovariance> theory;
    if (kind == EstimatorKind::direct) {
      std::vector<double> deltas;
      for (const auto& run : set.runs) deltas.push_back(run.delta);
      const double delta_inf = base.delta.kind == DeltaPolicy::Kind::constant ? base.delta.value : median(deltas);
      theory = v_squared(*model, loss, ScaleLimit::finite(delta_inf));
      r["delta_inf"] = delta_inf;
    } else if (kind != EstimatorKind::u_stat) {
      theory = d_squared(*model);
    }
    {
      std::ofstream csv(dir / ("replications_" + std::string(to_string(kind)) + ".csv"));
      write_replications_csv(set, csv);
    }
    if (theory) {
      const NormalityReport rep = ks_normality(set, *theory);
      r["theory_kind"] = to_string(theory->kind);
      r["theory"] = to_json(theory->matrix);
      r["empirical_covariance"] = to_json(rep.empirical_covariance);
      r["cov_rel_error"] = rep.cov_rel_error;
      r["ks_stats"] = rep.ks_stats;
      r["ks_pvalues"] = rep.ks_pvalues;
      r["mean_norm"] = rep.mean_norm;
      if (base.contamination.outliers == 0) {
        bool ok = rep.cov_rel_error <= c.max_cov_rel_error;
        for (double p : rep.ks_pvalues) ok = ok && p >= c.min_ks_pvalue;
        r["passed"] = ok;
        passed = passed && ok;
      }
      std::ofstream svg(dir / ("histogram_" + std::string(to_string(kind)) + ".svg"));
      write_histogram_svg(set, 0, theory->matrix(0, 0), svg);
      out << to_string(kind) << ": cov_rel_error " << format_double(rep.cov_rel_error) << ", min KS p-value "
          << format_double(*std::min_element(rep.ks_pvalues.begin(), rep.ks_pvalues.end())) << '\n';
    }
    runs.push_back(r);
  }
  summary["runs"] = runs;

  if (!c.kappas.empty()) {
    BreakdownConfig bc;
    bc.base = base;
    bc.k_policy.kind = c.k_rule == "kappa" ? BlockCountPolicy::Kind::kappa_rule : BlockCountPolicy::Kind::fixed;
    bc.k_policy.k = c.k;
    bc.k_policy.tau = c.tau;
    bc.kinds = kinds;
    bc.kappas = c.kappas;
    const auto rows = breakdown_curve(bc);
    std::ofstream csv(dir / "breakdown.csv");
    write_breakdown_csv(rows, csv);
    ordered_json b = ordered_json::array();
    for (const auto& row : rows) {
      b.push_back({{"estimator", to_string(row.kind)},
                   {"kappa", row.kappa},
                   {"outliers", row.outliers},
                   {"k", row.k},
                   {"median_abs_error", row.median_abs_error},
                   {"failures", row.failures}});
    }
    summary["breakdown"] = b;
  }
  summary["passed"] = passed;
  std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
  if (!passed) {
    err << "acceptance thresholds not met; see " << (dir / "summary.json").string() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_verify_loss(const std::string& fault, std::ostream& out, std::ostream& err) {
  std::unique_ptr<ScaleLoss> loss;
  if (fault.empty()) {
    loss = std::make_unique<SmoothHuber>();
  } else if (fault == "broken-table") {
    loss = std::make_unique<BrokenTableLoss>();
  } else {
    throw ConfigError("unknown fault '" + fault + "'");
  }
  const ContractReport report = verify_loss_contract(*loss);
  for (const auto& check : report.checks) {
    out << (check.passed() ? "PASS  " : "FAIL  ") << check.name << "  max violation " << format_double(check.max_violation)
        << " (tolerance " << format_double(check.tolerance) << ")\n";
  }
  out << "checked in " << format_double(std::round(report.seconds * 1000.0) / 1000.0) << " s\n";
  if (const ContractCheck* bad = report.first_failure()) {
    err << "violated invariant: " << bad->name << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust empirical risk minimization: estimation, simulation and loss verification"};
  app.require_subcommand(1);
  std::string config_path;
  std::map<std::string, std::string> flags;
  std::vector<std::string> extra;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value experiment file");
    auto opt = [&](const std::string& flag, const std::string& key, const std::string& help) {
      sub->add_option_function<std::string>(flag, [&flags, key](const std::string& v) { flags[key] = v; }, help);
    };
    opt("--model", "model", "model name");
    opt("--data", "data", "input CSV with a header row");
    opt("--k", "k", "number of blocks");
    opt("--samples", "N", "sample size N for generated data");
    opt("--delta", "delta", "'mad' or a positive constant");
    opt("--estimator", "estimator", "comma-separated: direct, minmax, minmax_1, minmax_2, plain, u_stat");
    opt("--kappa", "kappa", "contamination fraction");
    opt("--kappas", "kappas", "comma-separated contamination fractions for the breakdown curve");
    opt("--replications", "replications", "Monte Carlo replications");
    opt("--seed", "seed", "master seed");
    opt("--threads", "threads", "worker threads (0 = all cores)");
    opt("--out-dir", "out_dir", "directory for artifacts");
    sub->add_option("--set", extra, "override any config field as key=value");
  };

  CLI::App* estimate = app.add_subcommand("estimate", "estimate theta on one data set");
  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo experiment with artifacts");
  CLI::App* verify = app.add_subcommand("verify-loss", "check the scale-loss invariants");
  add_common(estimate);
  add_common(simulate);
  std::string fault;
  verify->add_option("--inject-fault", fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (verify->parsed()) return cmd_verify_loss(fault, out, err);
    RunConfig config = config_path.empty() ? RunConfig{} : load_config_file(config_path);
    for (const auto& [key, value] : flags) set_field(config, key, value);
    for (const auto& kv : extra) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      set_field(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (estimate->parsed()) return cmd_estimate(config, out, err);
    return cmd_simulate(config, out, err);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SpecError& e) {
    err << "specification error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "file error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace robust_erm::cli
