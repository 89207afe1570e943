// Runs the ten acceptance criteria and prints one PASS/FAIL line each.
// Exit status is 0 iff the failing criteria are exactly those listed in
// --expect-fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "oracle_search.hpp"
#include "robust_erm/asymptotics.hpp"
#include "robust_erm/cli.hpp"
#include "robust_erm/harness.hpp"
#include "robust_erm/robust_proxy.hpp"
#include "robust_erm/stats.hpp"

using namespace robust_erm;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

ExperimentConfig clean_location_setup(EstimatorKind kind) {
  ExperimentConfig c;
  c.model = gaussian_location(2, Vector::Zero(2), 1.0);
  c.kind = kind;
  c.N = 2000;
  c.k = 20;
  c.R = 2000;
  c.master_seed = 20240601;
  return c;
}

void loss_contract(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = verify_loss_contract(SmoothHuber());
  const double seconds = elapsed(t0);
  v.detail << report.checks.size() << " checks in " << format_double(std::round(seconds * 100) / 100) << " s";
  for (const auto& c : report.checks) {
    if (!c.passed()) {
      v.require(false, c.name + " max violation " + format_double(c.max_violation) + " > " +
                           format_double(c.tolerance));
    }
  }
  v.require(seconds < 5.0, "runtime < 5 s");
}

void proxy_oracle(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  const SmoothHuber loss;
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> count(1, 7), block(1, 100);
  std::uniform_real_distribution<double> mean(-1e3, 1e3), delta(0.5, 5.0);
  // A flat minimum has a whole interval of grid minimizers; the distance to
  // that set is checked, and the gap to its midpoint is reported.
  double worst = 0.0, worst_mid = 0.0;
  int flat = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> means(static_cast<std::size_t>(count(rng)));
    for (double& m : means) m = mean(rng);
    const double s = argument_scale(block(rng), delta(rng));
    const double z = robust_mean(means, s, loss).value;
    const auto set = testing::grid_argmin_set(means, s, loss);
    if (set.right - set.left > 1e-3) ++flat;
    worst = std::max(worst, set.distance(z));
    worst_mid = std::max(worst_mid, std::abs(z - set.midpoint()));
  }
  v.detail << "robust_mean max distance to grid argmin " << format_double(worst) << " (" << flat
           << " flat minima, max midpoint gap " << format_double(worst_mid) << ")";
  v.require(worst <= 1e-5, "robust_mean within 1e-5");

  const auto model = gaussian_location(1, Vector::Zero(1), 1.0);
  std::normal_distribution<double> normal(0.0, 2.0);
  double worst_u = 0.0;
  for (int t = 0; t < 20; ++t) {
    SampleMatrix data(6, 1);
    for (Index i = 0; i < 6; ++i) data(i, 0) = normal(rng);
    const Vector theta = Vector::Constant(1, normal(rng));
    std::vector<double> pair_means;
    for (Index i = 0; i < 6; ++i) {
      for (Index j = i + 1; j < 6; ++j) {
        pair_means.push_back(0.5 * (model->loss(theta, data.row(i).transpose()) +
                                    model->loss(theta, data.row(j).transpose())));
      }
    }
    const double u = u_statistic_proxy(theta, data, 2, *model, loss, 1.0);
    worst_u = std::max(worst_u, std::abs(u - testing::grid_argmin(pair_means, argument_scale(2, 1.0), loss)));
  }
  const double seconds = elapsed(t0);
  v.detail << ", U-statistic max error " << format_double(worst_u) << ", "
           << format_double(std::round(seconds * 100) / 100) << " s";
  v.require(worst_u <= 1e-5, "U-statistic within 1e-5");
  v.require(seconds < 30.0, "runtime < 30 s");
}

void implicit_gradient(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  const SmoothHuber loss;
  const std::vector<ModelPtr> models{
      gaussian_location(2, Vector::Zero(2), 1.0),
      linear_regression(2, Vector::Ones(2), Matrix::Identity(2, 2), NoiseSpec::gaussian(1.0)), exponential_rate(1.0)};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> shift(-0.3, 0.3);
  double worst = 0.0;
  for (const auto& m : models) {
    const SampleMatrix x = sample_clean(*m, 1000, 31);
    const auto scheme = make_blocks(1000, 20).with_delta(1.0);
    for (int t = 0; t < 20; ++t) {
      Vector theta = m->population().theta0;
      for (Index i = 0; i < theta.size(); ++i) theta[i] += shift(rng);
      const Vector g = robust_gradient(theta, x, *m, scheme, loss);
      for (Index i = 0; i < theta.size(); ++i) {
        const double h = 1e-5;
        Vector a = theta, b = theta;
        a[i] += h;
        b[i] -= h;
        const double fd =
            (robust_risk(a, x, *m, scheme, loss).value - robust_risk(b, x, *m, scheme, loss).value) / (2 * h);
        worst = std::max(worst, std::abs(fd - g[i]));
      }
    }
  }
  const double seconds = elapsed(t0);
  v.detail << "max component error " << format_double(worst) << " over 3 models x 20 points, "
           << format_double(std::round(seconds * 100) / 100) << " s";
  v.require(worst <= 1e-4, "error <= 1e-4");
  v.require(seconds < 60.0, "runtime < 60 s");
}

// Shared between criteria 4 and 5: the min-max empirical covariance.
Matrix minmax_covariance;

void minmax_normality(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto config = clean_location_setup(EstimatorKind::minmax_1);
  const auto set = replicate(config);
  const auto report = ks_normality(set, d_squared(*config.model));
  minmax_covariance = report.empirical_covariance;
  const double seconds = elapsed(t0);
  const double min_p = *std::min_element(report.ks_pvalues.begin(), report.ks_pvalues.end());
  v.detail << "cov_rel_error " << format_double(report.cov_rel_error) << ", min KS p " << format_double(min_p)
           << ", " << set.errors.rows() << " replications, " << format_double(std::round(seconds * 10) / 10) << " s";
  v.require(report.cov_rel_error <= 0.15, "cov_rel_error <= 0.15");
  v.require(min_p >= 1e-3, "KS p-values >= 0.001");
  v.require(seconds < 600.0, "runtime < 10 min");
}

void variance_inflation(Verdict& v) {
  auto config = clean_location_setup(EstimatorKind::direct);
  config.delta = DeltaPolicy::constant(1.0);
  const auto set = replicate(config);
  const SmoothHuber loss(config.loss_options);
  const auto theory = v_squared(*config.model, loss, ScaleLimit::finite(1.0));
  const auto report = ks_normality(set, theory);
  const double factor = inflation_factor(loss, joint_spec(*config.model).var_z1, ScaleLimit::finite(1.0));
  v.detail << "cov_rel_error vs V2 " << format_double(report.cov_rel_error);
  v.require(report.cov_rel_error <= 0.15, "variance within 15% of V2");
  if (minmax_covariance.size() == 0) {
    v.require(false, "needs the min-max covariance of criterion 4");
    return;
  }
  const double ratio = report.empirical_covariance.trace() / minmax_covariance.trace();
  v.detail << ", ratio " << format_double(ratio) << " vs factor " << format_double(factor);
  v.require(ratio >= factor - 0.05, "ratio >= inflation factor - 0.05");
}

void a_squared_cross_validation(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  const SmoothHuber loss = SmoothHuber().with_table(true);
  const auto spec = joint_spec(*exponential_rate(1.0));
  const auto q = a_squared(spec, loss, ScaleLimit::finite(1.0));
  const auto mc = a_squared_monte_carlo(spec, loss, ScaleLimit::finite(1.0), 10'000'000, 6);
  const double seconds = elapsed(t0);
  const double z = std::abs(q.matrix(0, 0) - mc.matrix(0, 0)) / mc.standard_errors(0, 0);
  v.detail << "quadrature " << format_double(q.matrix(0, 0)) << ", Monte Carlo " << format_double(mc.matrix(0, 0))
           << " (" << format_double(std::round(z * 100) / 100) << " SE), "
           << format_double(std::round(seconds * 10) / 10) << " s";
  v.require(z <= 3.0, "within 3 standard errors");
  v.require(seconds < 120.0, "runtime < 2 min");
}

void stein_identity(Verdict& v) {
  const SmoothHuber loss;
  const std::vector<double> band{-2.0, -1.0, 1.0, 2.0};
  double worst = 0.0;
  for (int order : {2, 3}) {
    for (double gamma : {0.0, 0.3, 0.9}) {
      const auto r = stein_check([&](double x) { return loss.deriv(x, order); },
                                 [&](double x) { return loss.deriv(x, order + 1); }, gamma, 1.0, 1.0, 128, band);
      worst = std::max(worst, r.abs_diff);
    }
  }
  v.detail << "max |lhs - rhs| " << format_double(worst);
  v.require(worst <= 1e-6, "<= 1e-6");
}

void robustness(Verdict& v) {
  const Index N = 2000, outliers = 100;
  BreakdownConfig b;
  b.base = clean_location_setup(EstimatorKind::direct);
  b.base.model = gaussian_location(1, Vector::Zero(1), 1.0);
  b.base.R = 200;
  b.base.contamination = ContaminationSpec::fixed_point(0, 1e6);
  b.k_policy.kind = BlockCountPolicy::Kind::fixed;
  b.k_policy.k = block_count_for_contamination(N, outliers, 1.0, 20);
  b.kinds = {EstimatorKind::direct, EstimatorKind::minmax_1, EstimatorKind::plain};
  b.kappas = {0.0, 0.05};
  const auto rows = breakdown_curve(b);
  auto median_error = [&](EstimatorKind kind, double kappa) {
    for (const auto& r : rows) {
      if (r.kind == kind && r.kappa == kappa) return r.median_abs_error;
    }
    return std::numeric_limits<double>::quiet_NaN();
  };
  // Reported only: the same ratios against a clean baseline with k = 20.
  BreakdownConfig clean = b;
  clean.k_policy.k = 20;
  clean.kinds = {EstimatorKind::direct, EstimatorKind::minmax_1};
  clean.kappas = {0.0};
  const auto clean_rows = breakdown_curve(clean);
  v.detail << "k " << b.k_policy.k;
  for (EstimatorKind kind : b.kinds) {
    const double ratio = median_error(kind, 0.05) / median_error(kind, 0.0);
    v.detail << ", " << to_string(kind) << " ratio " << format_double(ratio);
    if (kind == EstimatorKind::plain) {
      v.require(ratio >= 1e3, "plain ratio >= 1e3");
      continue;
    }
    v.require(ratio <= 5.0, std::string(to_string(kind)) + " ratio <= 5");
    for (const auto& r : clean_rows) {
      if (r.kind == kind) v.detail << " (" << format_double(median_error(kind, 0.05) / r.median_abs_error) << " vs k = 20)";
    }
  }
}

void limit_consistency(Verdict& v) {
  const auto spec = joint_spec(*gaussian_location(2, Vector::Zero(2), 1.0));
  const auto a = a_squared(spec, SmoothHuber(), ScaleLimit::finite(1e4));
  const double gap = operator_norm_sym(a.matrix - spec.sigma22) / operator_norm_sym(spec.sigma22);
  v.detail << "relative gap " << format_double(gap);
  v.require(gap <= 0.01, "<= 0.01");
}

std::map<std::string, std::string> directory_bytes(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    files[e.path().filename().string()] = {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  return files;
}

void determinism(Verdict& v) {
  cli::RunConfig c;
  c.seed = 11;
  c.N = 1000;
  c.replications = 60;
  c.estimators = {"direct", "minmax", "plain"};
  c.kappas = {0.0, 0.05};
  std::vector<std::map<std::string, std::string>> artifacts;
  for (const char* run : {"first", "second"}) {
    const fs::path dir = fs::path(ROBUST_ERM_TEST_DIR) / "acceptance_determinism" / run;
    fs::remove_all(dir);
    c.out_dir = dir.string();
    std::ostringstream out, err;
    cli::cmd_simulate(c, out, err);
    artifacts.push_back(directory_bytes(dir));
  }
  v.detail << artifacts[0].size() << " artifacts";
  v.require(!artifacts[0].empty(), "artifacts written");
  v.require(artifacts[0] == artifacts[1], "byte-identical artifacts");
}

struct Criterion {
  int id;
  const char* name;
  std::function<void(Verdict&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> expect_fail, only;
  app.add_option("--expect-fail", expect_fail, "criteria known to fail")->delimiter(',');
  app.add_option("--only", only, "run a subset")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "loss contract", loss_contract},
      {2, "proxy oracle equivalence", proxy_oracle},
      {3, "implicit gradient", implicit_gradient},
      {4, "min-max normality", minmax_normality},
      {5, "direct variance inflation", variance_inflation},
      {6, "A2 cross-validation", a_squared_cross_validation},
      {7, "Stein identity", stein_identity},
      {8, "robustness under contamination", robustness},
      {9, "large-Delta limit", limit_consistency},
      {10, "determinism", determinism},
  };
  std::set<int> selected(only.begin(), only.end());
  if (selected.contains(5)) selected.insert(4);
  std::set<int> failed;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    Verdict v;
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    if (!v.pass) failed.insert(c.id);
    std::cout << "C" << c.id << (c.id < 10 ? "  " : " ") << (v.pass ? "PASS" : "FAIL") << "  " << c.name << ": "
              << v.detail.str() << std::endl;
  }
  std::set<int> expected;
  for (int id : expect_fail) {
    if (selected.empty() || selected.contains(id)) expected.insert(id);
  }
  if (failed != expected) {
    std::cerr << "failing criteria differ from the expected set\n";
    return 1;
  }
  return 0;
}
