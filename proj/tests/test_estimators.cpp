#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "robust_erm/datagen.hpp"
#include "robust_erm/errors.hpp"
#include "robust_erm/estimators.hpp"

using namespace robust_erm;
using doctest::Approx;

namespace {

Vector empirical_gradient(const RiskModel& m, const SampleMatrix& x, Index rows, const Vector& theta) {
  Vector g = Vector::Zero(m.dim());
  for (Index i = 0; i < rows; ++i) m.add_grad_loss(theta, x.row(i).transpose(), 1.0 / rows, g);
  return g;
}

std::vector<ModelPtr> shipped_models() {
  return {gaussian_location(2, Vector::Zero(2), 1.0),
          linear_regression(2, Vector::Ones(2), Matrix::Identity(2, 2), NoiseSpec::gaussian(1.0)),
          exponential_rate(1.0)};
}

}  // namespace

TEST_CASE("robust_gradient on the curvature plateau is the empirical gradient") {
  const auto m = gaussian_location(2, Vector::Zero(2), 1.0);
  const SampleMatrix x = sample_clean(*m, 400, 1);
  const SmoothHuber loss;
  // A wide Delta keeps every block argument inside |u| <= 1.
  const auto scheme = make_blocks(400, 10).with_delta(1e3);
  const Vector theta = Vector::Constant(2, 0.4);
  const Vector g = robust_gradient(theta, x, *m, scheme, loss);
  CHECK((g - empirical_gradient(*m, x, 400, theta)).norm() <= 1e-13);

  const auto single = make_blocks(400, 1).with_delta(0.01);
  CHECK((robust_gradient(theta, x, *m, single, loss) - empirical_gradient(*m, x, 400, theta)).norm() <= 1e-13);
}

TEST_CASE("robust_gradient matches central differences of the proxy") {
  const SmoothHuber loss;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> shift(-0.3, 0.3);
  for (const auto& m : shipped_models()) {
    CAPTURE(m->id());
    const SampleMatrix x = sample_clean(*m, 1000, 2);
    const auto scheme = make_blocks(1000, 20).with_delta(1.0);
    for (int t = 0; t < 20; ++t) {
      Vector theta = m->population().theta0;
      for (Index i = 0; i < theta.size(); ++i) theta[i] += shift(rng);
      const Vector g = robust_gradient(theta, x, *m, scheme, loss);
      const double h = 1e-5;
      for (Index i = 0; i < theta.size(); ++i) {
        Vector a = theta, b = theta;
        a[i] += h;
        b[i] -= h;
        const double fd =
            (robust_risk(a, x, *m, scheme, loss).value - robust_risk(b, x, *m, scheme, loss).value) / (2 * h);
        CHECK(std::abs(fd - g[i]) <= 1e-4);
      }
    }
  }
}

TEST_CASE("robust_gradient with every block saturated") {
  const auto m = gaussian_location(1, Vector::Zero(1), 1.0);
  SampleMatrix x(4, 1);
  x << -50.0, -50.0, 50.0, 50.0;
  const auto scheme = make_blocks(4, 2).with_delta(1e-3);
  const SmoothHuber loss;
  CHECK_THROWS_AS(robust_gradient(Vector::Constant(1, 3.0), x, *m, scheme, loss), DegenerateWeightsError);
}

TEST_CASE("solver configuration validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.backtrack_factor = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.grad_tol = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.max_iter = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("direct estimator on clean Gaussian data matches the sample mean") {
  const auto m = gaussian_location(1, Vector::Zero(1), 1.0);
  const SampleMatrix x = sample_clean(*m, 10000, 3);
  const SmoothHuber loss;
  const auto scheme = make_blocks(10000, 20).with_delta(1.0);
  const auto r = minimize_robust(x, *m, scheme, loss, {}, m->pilot(x));
  CHECK(r.status == EstimateStatus::converged);
  CHECK(r.grad_norm <= 1e-8);
  CHECK(std::abs(r.theta_hat[0] - x.mean()) <= 1e-3);
  CHECK(std::accumulate(r.weights.begin(), r.weights.end(), 0.0) == Approx(1.0).epsilon(1e-12));
  for (double w : r.weights) CHECK((w >= 0.0 && w <= 1.0));
  // Accepted steps never raise the proxy.
  CHECK(r.objective <= robust_risk(m->pilot(x), x, *m, scheme, loss).value + 1e-15);
}

TEST_CASE("noiseless regression recovers theta star") {
  Vector theta_star(3);
  theta_star << 1.0, -2.0, 0.5;
  const auto m = linear_regression(3, theta_star, Matrix::Identity(3, 3), NoiseSpec::gaussian(0.0));
  const SampleMatrix x = sample_clean(*m, 600, 4);
  const SmoothHuber loss;
  const auto scheme = make_blocks(600, 10).with_delta(1.0);
  const auto direct = minimize_robust(x, *m, scheme, loss, {}, Vector::Zero(3));
  CHECK((direct.theta_hat - theta_star).norm() <= 1e-6);
  const auto plain = plain_erm(x, *m, {}, Vector::Zero(3));
  CHECK((plain.theta_hat - theta_star).norm() <= 1e-6);
  const auto [first, second] = minmax_estimate(x, *m, scheme, loss, {}, Vector::Zero(3));
  CHECK((first.theta_hat - theta_star).norm() <= 1e-6);
  CHECK((second.theta_hat - theta_star).norm() <= 1e-6);
}

TEST_CASE("plain ERM oracles") {
  const auto m = gaussian_location(2, Vector::Zero(2), 1.0);
  const SampleMatrix x = sample_clean(*m, 500, 6);
  const auto r = plain_erm(x, *m, {}, Vector::Constant(2, 3.0));
  CHECK((r.theta_hat - x.colwise().mean().transpose()).norm() <= 1e-8);

  const auto reg = linear_regression(2, Vector::Ones(2), Matrix::Identity(2, 2), NoiseSpec::gaussian(1.0));
  const SampleMatrix xy = sample_clean(*reg, 500, 7);
  const Matrix Z = xy.leftCols(2);
  const Vector y = xy.col(2);
  const Vector ls = (Z.transpose() * Z).ldlt().solve(Z.transpose() * y);
  CHECK((plain_erm(xy, *reg, {}, Vector::Zero(2)).theta_hat - ls).norm() <= 1e-8);

  // One block over all data: the proxy is the empirical risk itself.
  const SmoothHuber loss;
  const auto one = make_blocks(500, 1).with_delta(1.0);
  CHECK((minimize_robust(xy, *reg, one, loss, {}, Vector::Zero(2)).theta_hat - ls).norm() <= 1e-6);
}

TEST_CASE("minmax on clean Gaussian data") {
  const auto m = gaussian_location(2, Vector::Zero(2), 1.0);
  const Index N = 2000;
  const SampleMatrix x = sample_clean(*m, N, 8);
  const SmoothHuber loss;
  const auto scheme = make_blocks(N, 20).with_delta(1.0);
  const Vector theta = Vector::Constant(2, 0.25);
  CHECK(robust_diff(theta, theta, x, *m, scheme, loss).value == 0.0);
  const auto [first, second] = minmax_estimate(x, *m, scheme, loss, {}, m->pilot(x));
  CHECK(first.status == EstimateStatus::converged);
  CHECK(first.theta_hat.norm() <= 10.0 / std::sqrt(N));
  CHECK(second.theta_hat.norm() <= 10.0 / std::sqrt(N));
}

TEST_CASE("five percent outliers: robust estimators hold, the mean breaks") {
  const auto m = gaussian_location(1, Vector::Zero(1), 1.0);
  const Index N = 2000;
  const auto spec = ContaminationSpec::fixed_point(100, 1e6);
  const SampleMatrix x = contaminate(sample_clean(*m, N, 9), *m, spec, 10).data;
  const SmoothHuber loss;
  const Index k = block_count_for_contamination(N, 100, 1.0, 20);
  const auto blocks = make_blocks(N, k);
  const Vector pilot = m->pilot(x);
  const double delta = resolve_delta(DeltaPolicy::mad_scaled(), group_loss_means(*m, x, blocks.groups(), pilot),
                                     blocks.block_size());
  const auto scheme = blocks.with_delta(delta);
  const double bound = 10.0 / std::sqrt(static_cast<double>(N));

  const auto direct = minimize_robust(x, *m, scheme, loss, {}, pilot);
  CHECK(std::abs(direct.theta_hat[0]) <= bound);
  const auto mm = minmax_estimate(x, *m, scheme, loss, {}, pilot);
  CHECK(std::abs(mm.first.theta_hat[0]) <= bound);
  const auto plain = plain_erm(x, *m, {}, pilot);
  CHECK(std::abs(plain.theta_hat[0]) >= 1e3);
  std::vector<double> col(x.data(), x.data() + N);
  std::nth_element(col.begin(), col.begin() + N / 2, col.end());
  CHECK(std::abs(col[N / 2]) <= bound);
}

TEST_CASE("direct estimator depends on data only through block means") {
  const auto m = gaussian_location(1, Vector::Zero(1), 1.0);
  const SampleMatrix x = sample_clean(*m, 1000, 11);
  SampleMatrix shuffled = x;
  // Reverse the rows inside each block of 50.
  for (Index b = 0; b < 20; ++b) {
    for (Index i = 0; i < 50; ++i) shuffled.row(b * 50 + i) = x.row(b * 50 + 49 - i);
  }
  const SmoothHuber loss;
  const auto scheme = make_blocks(1000, 20).with_delta(1.0);
  const Vector init = Vector::Constant(1, 0.5);
  const auto a = minimize_robust(x, *m, scheme, loss, {}, init);
  const auto b = minimize_robust(shuffled, *m, scheme, loss, {}, init);
  CHECK(std::abs(a.theta_hat[0] - b.theta_hat[0]) <= 1e-12);
}

TEST_CASE("U-statistic estimator on a small sample") {
  const auto m = gaussian_location(1, Vector::Zero(1), 1.0);
  const SampleMatrix x = sample_clean(*m, 8, 12);
  const SmoothHuber loss;
  const auto r = minimize_u_statistic(x, *m, 8, 1.0, loss, {}, Vector::Zero(1));
  CHECK(r.theta_hat[0] == Approx(x.mean()).epsilon(1e-8));
  const auto pairs = minimize_u_statistic(x, *m, 2, 1.0, loss, {}, Vector::Zero(1));
  CHECK(pairs.status == EstimateStatus::converged);
  CHECK(std::abs(pairs.theta_hat[0]) <= 3.0);
}
