#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "robust_erm/datagen.hpp"
#include "robust_erm/errors.hpp"
#include "robust_erm/models.hpp"

using namespace robust_erm;
using doctest::Approx;

namespace {

std::vector<ModelPtr> shipped_models() {
  Matrix cov(2, 2);
  cov << 1.0, 0.3, 0.3, 2.0;
  Vector theta_star(2);
  theta_star << 0.5, -1.0;
  return {gaussian_location(2, Vector::Constant(2, 0.7), 1.5),
          linear_regression(2, theta_star, cov, NoiseSpec::gaussian(0.8)), exponential_rate(1.7)};
}

// Sample mean and 3-standard-error band of a scalar statistic.
struct Moment {
  double mean = 0.0, se = 0.0;
};
template <typename F>
Moment moment(const SampleMatrix& x, F&& stat) {
  double s = 0.0, s2 = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const double v = stat(Vector(x.row(i).transpose()));
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(x.rows());
  const double mean = s / n;
  return {mean, std::sqrt(std::max(s2 / n - mean * mean, 0.0) / n)};
}

}  // namespace

TEST_CASE("gaussian location examples") {
  const auto m = gaussian_location(1, Vector::Zero(1), 1.0);
  const Vector theta0 = m->population().theta0;
  CHECK(m->grad_loss(theta0, theta0).norm() == 0.0);
  CHECK(m->population().gamma.norm() == 0.0);
  CHECK(m->population().var_ell == 0.5);
  CHECK(m->population().hessian.isIdentity());
  const auto m3 = gaussian_location(3, Vector::Zero(3), 2.0);
  CHECK(m3->population().var_ell == Approx(3 * 16.0 / 2.0));
  CHECK(m3->population().sigma.isApprox(4.0 * Matrix::Identity(3, 3)));
  CHECK_THROWS_AS(gaussian_location(1, Vector::Zero(1), 0.0), ConfigError);
}

TEST_CASE("linear regression population fields") {
  Matrix cov(2, 2);
  cov << 1.0, 0.3, 0.3, 2.0;
  const auto m = linear_regression(2, Vector::Ones(2), cov, NoiseSpec::gaussian(0.5));
  CHECK(m->population().hessian.isApprox(2.0 * cov));
  CHECK(m->population().sigma.isApprox(4.0 * 0.25 * cov));
  CHECK(m->population().gamma.norm() == 0.0);
  Matrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(linear_regression(2, Vector::Ones(2), bad, NoiseSpec::gaussian(1.0)), ConfigError);
  CHECK(m->column_names() == std::vector<std::string>{"z_1", "z_2", "y"});
}

TEST_CASE("exponential rate closed forms") {
  for (double lambda0 : {0.5, 1.0, 3.0}) {
    const auto m = exponential_rate(lambda0);
    CHECK(m->population().theta0[0] == lambda0);
    CHECK(m->population().hessian(0, 0) == Approx(1.0 / (lambda0 * lambda0)));
    CHECK(m->population().sigma(0, 0) == Approx(1.0 / (lambda0 * lambda0)));
    CHECK(m->population().gamma[0] == Approx(1.0 / lambda0));
    CHECK(m->population().var_ell == Approx(1.0));
  }
  CHECK_THROWS_AS(exponential_rate(0.0), ConfigError);
  CHECK_THROWS_AS(exponential_rate(-2.0), ConfigError);
}

TEST_CASE("gradients match central differences") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> shift(-0.5, 0.5);
  for (const auto& m : shipped_models()) {
    CAPTURE(m->id());
    const SampleMatrix xs = m->sample(50, rng);
    for (Index t = 0; t < 50; ++t) {
      Vector theta = m->population().theta0;
      for (Index i = 0; i < theta.size(); ++i) theta[i] += shift(rng);
      const Vector x = xs.row(t).transpose();
      const Vector g = m->grad_loss(theta, x);
      Vector fd(theta.size());
      const double h = 1e-6;
      for (Index i = 0; i < theta.size(); ++i) {
        Vector a = theta, b = theta;
        a[i] += h;
        b[i] -= h;
        fd[i] = (m->loss(a, x) - m->loss(b, x)) / (2 * h);
      }
      CHECK((g - fd).norm() <= 1e-5);
    }
  }
}

TEST_CASE("population fields agree with Monte Carlo") {
  for (const auto& m : shipped_models()) {
    CAPTURE(m->id());
    const auto& f = m->population();
    const SampleMatrix x = sample_clean(*m, 1000000, 99);
    const Vector theta0 = f.theta0;
    const double L = m->risk(theta0);
    const Index d = m->dim();
    for (Index a = 0; a < d; ++a) {
      const auto g = moment(x, [&](const Vector& v) { return m->grad_loss(theta0, v)[a]; });
      CHECK(std::abs(g.mean) <= 3.0 * g.se);
      const auto gam = moment(x, [&](const Vector& v) { return (m->loss(theta0, v) - L) * m->grad_loss(theta0, v)[a]; });
      CHECK(std::abs(gam.mean - f.gamma[a]) <= 3.0 * gam.se);
      for (Index b = 0; b < d; ++b) {
        const auto s = moment(x, [&](const Vector& v) {
          const Vector g = m->grad_loss(theta0, v);
          return g[a] * g[b];
        });
        CHECK(std::abs(s.mean - f.sigma(a, b)) <= 3.0 * s.se);
      }
    }
    const auto v = moment(x, [&](const Vector& o) { return std::pow(m->loss(theta0, o) - L, 2); });
    CHECK(std::abs(v.mean - f.var_ell) <= 3.0 * v.se);
    const auto l = moment(x, [&](const Vector& o) { return m->loss(theta0, o); });
    CHECK(std::abs(l.mean - L) <= 3.0 * l.se);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(f.hessian).eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("noise specifications") {
  CHECK_THROWS_AS(NoiseSpec::student_t(2.0).validate(), ConfigError);
  CHECK_THROWS_AS(NoiseSpec::pareto_symmetric(1.5).validate(), ConfigError);
  CHECK(NoiseSpec::student_t(2.5).moment_order() == Approx(0.5));
  CHECK(NoiseSpec::gaussian(1.0).moment_order() == 1.0);
  CHECK(NoiseSpec::student_t(5.0).variance() == Approx(5.0 / 3.0));
}

TEST_CASE("sample_clean is deterministic and centered") {
  const auto m = gaussian_location(1, Vector::Constant(1, 2.0), 1.0);
  CHECK(sample_clean(*m, 100, 5) == sample_clean(*m, 100, 5));
  CHECK(sample_clean(*m, 100, 5) != sample_clean(*m, 100, 6));
  const SampleMatrix x = sample_clean(*m, 1000000, 8);
  CHECK(std::abs(x.mean() - 2.0) <= 4.0 / 1000.0);
  CHECK_THROWS_AS(sample_clean(*m, 0, 1), ConfigError);
}

TEST_CASE("student t with 2.5 degrees of freedom: low moments stable, fourth moment grows") {
  const auto m = location_model(1, Vector::Zero(1), NoiseSpec::student_t(2.5));
  std::vector<double> low, fourth;
  for (Index N : {1000, 10000, 100000}) {
    // Median over seeds tames the single-draw noise of heavy tails.
    std::vector<double> l, f;
    for (std::uint64_t seed = 0; seed < 9; ++seed) {
      const SampleMatrix x = sample_clean(*m, N, 1000 + seed);
      l.push_back(x.array().abs().pow(2.4).mean());
      f.push_back(x.array().pow(4).mean());
    }
    std::sort(l.begin(), l.end());
    std::sort(f.begin(), f.end());
    low.push_back(l[4]);
    fourth.push_back(f[4]);
  }
  CHECK(low[2] / low[0] < 2.0);
  CHECK(fourth[2] > 2.0 * fourth[0]);
}

TEST_CASE("contamination examples") {
  const auto m = gaussian_location(1, Vector::Zero(1), 1.0);
  const SampleMatrix clean = sample_clean(*m, 100, 3);
  const auto none = contaminate(clean, *m, ContaminationSpec::fixed_point(0, 1e6), 4);
  CHECK(none.data == clean);

  const auto fixed = contaminate(clean, *m, ContaminationSpec::fixed_point(5, 1e6), 4);
  CHECK((fixed.data.array() == 1e6).count() == 5);
  CHECK(fixed.outlier_rows.size() == 5);
  CHECK(fixed.kappa == 0.05);
  CHECK(fixed.data.rows() == clean.rows());
  for (Index i = 0; i < 100; ++i) {
    if (!std::binary_search(fixed.outlier_rows.begin(), fixed.outlier_rows.end(), i)) {
      CHECK(fixed.data.row(i) == clean.row(i));
    }
  }
  CHECK(contaminate(clean, *m, ContaminationSpec::fixed_point(5, 1e6), 4).data == fixed.data);

  const auto amp = contaminate(clean, *m, ContaminationSpec::amplify(3, 1e3), 4);
  for (Index r : amp.outlier_rows) CHECK(amp.data(r, 0) == clean(r, 0) * 1e3);

  CHECK_THROWS_AS(contaminate(clean, *m, ContaminationSpec::fixed_point(100, 0.0), 1), ConfigError);
  CHECK(ContaminationSpec::fixed_point(0, 1.0).with_fraction(0.05, 2000).outliers == 100);
}

TEST_CASE("adaptive contamination shifts the mean but not the median") {
  const auto m = gaussian_location(1, Vector::Zero(1), 1.0);
  const Index N = 10000, O = 200;
  const SampleMatrix clean = sample_clean(*m, N, 12);
  const auto bad = contaminate(clean, *m, ContaminationSpec::adaptive(O), 13);
  const double kappa = static_cast<double>(O) / static_cast<double>(N);
  double removed = 0.0;
  for (Index r : bad.outlier_rows) removed += clean(r, 0);
  const double location = bad.data(bad.outlier_rows.front(), 0);
  CHECK(std::abs(location) == Approx(1e6));
  // Exact mean shift: O (location - mean of replaced rows) / N.
  const double expected = kappa * (location - removed / O);
  CHECK(bad.data.mean() - clean.mean() == Approx(expected).epsilon(1e-9));
  std::vector<double> a(clean.data(), clean.data() + N), b(bad.data.data(), bad.data.data() + N);
  std::nth_element(a.begin(), a.begin() + N / 2, a.end());
  std::nth_element(b.begin(), b.begin() + N / 2, b.end());
  CHECK(std::abs(b[N / 2] - a[N / 2]) <= 3.0 * kappa);
}
