#include "robust_erm/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "robust_erm/errors.hpp"

namespace robust_erm {

namespace {

double median_inplace(std::vector<double>& v) {
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
  double med = v[m];
  if (v.size() % 2 == 0) {
    med = 0.5 * (med + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m)));
  }
  return med;
}

Vector coordinatewise_median(const Matrix& rows) {
  Vector med(rows.cols());
  std::vector<double> col(static_cast<std::size_t>(rows.rows()));
  for (Index c = 0; c < rows.cols(); ++c) {
    for (Index r = 0; r < rows.rows(); ++r) col[static_cast<std::size_t>(r)] = rows(r, c);
    med[c] = median_inplace(col);
  }
  return med;
}

// Tau for a loss quadratic in the noise: E|l|^(2+tau) needs E|e|^(4+2tau).
double quadratic_loss_moment_order(const NoiseSpec& noise) {
  const double bound = noise.moment_bound();
  if (!std::isfinite(bound)) return 1.0;
  return std::clamp(bound / 2.0 - 2.0, 0.0, 1.0);
}

class LocationModel final : public RiskModel {
 public:
  LocationModel(Index d, const Vector& mu, const NoiseSpec& noise) : noise_(noise) {
    if (d < 1 || mu.size() != d) throw ConfigError("location model: mu must have dimension d >= 1");
    noise_.validate();
    if (noise_.variance() <= 0.0) throw ConfigError("location model: noise variance must be positive");
    const double var = noise_.variance();
    facts_.theta0 = mu;
    facts_.hessian = Matrix::Identity(d, d);
    facts_.sigma = var * Matrix::Identity(d, d);
    facts_.gamma = Vector::Zero(d);
    const double m4 = noise_.fourth_moment();
    facts_.var_ell = std::isfinite(m4) ? 0.25 * static_cast<double>(d) * (m4 - var * var)
                                       : std::numeric_limits<double>::infinity();
    facts_.moment_order = quadratic_loss_moment_order(noise_);
  }

  std::string id() const override {
    return noise_.family == NoiseSpec::Family::gaussian ? "gaussian-location" : "location-" + noise_.describe();
  }
  Index sample_width() const override { return dim(); }

  double loss(const Vector& theta, Observation x) const override {
    return 0.5 * (x - theta).squaredNorm();
  }
  void add_grad_loss(const Vector& theta, Observation x, double weight,
                     Eigen::Ref<Vector> out) const override {
    out.noalias() += weight * (theta - x);
  }
  double risk(const Vector& theta) const override {
    return 0.5 * (static_cast<double>(dim()) * noise_.variance() + (theta - facts_.theta0).squaredNorm());
  }
  SampleMatrix sample(Index N, std::mt19937_64& rng) const override {
    SampleMatrix x(N, dim());
    for (Index i = 0; i < N; ++i) {
      for (Index c = 0; c < dim(); ++c) x(i, c) = facts_.theta0[c] + noise_.draw(rng);
    }
    return x;
  }
  Vector pilot(const SampleMatrix& data) const override { return coordinatewise_median(data); }
  Vector reference_observation() const override { return facts_.theta0; }

 private:
  NoiseSpec noise_;
};

class LinearRegressionModel final : public RiskModel {
 public:
  LinearRegressionModel(Index d, const Vector& theta_star, const Matrix& cov_z, const NoiseSpec& noise)
      : noise_(noise), cov_z_(cov_z) {
    if (d < 1 || theta_star.size() != d || cov_z.rows() != d || cov_z.cols() != d) {
      throw ConfigError("linear regression: inconsistent dimensions");
    }
    if (!cov_z.isApprox(cov_z.transpose(), 1e-12)) throw ConfigError("linear regression: cov_z not symmetric");
    chol_.compute(cov_z);
    if (chol_.info() != Eigen::Success) throw ConfigError("linear regression: cov_z is not positive definite");
    noise_.validate();
    const double var = noise_.variance();
    facts_.theta0 = theta_star;
    facts_.hessian = 2.0 * cov_z;
    facts_.sigma = 4.0 * var * cov_z;
    facts_.gamma = Vector::Zero(d);  // E z = 0 and z independent of the noise
    const double m4 = noise_.fourth_moment();
    facts_.var_ell = std::isfinite(m4) ? m4 - var * var : std::numeric_limits<double>::infinity();
    facts_.moment_order = quadratic_loss_moment_order(noise_);
  }

  std::string id() const override { return "linear-regression"; }
  Index sample_width() const override { return dim() + 1; }
  std::vector<std::string> column_names() const override {
    std::vector<std::string> names;
    for (Index c = 0; c < dim(); ++c) names.push_back("z_" + std::to_string(c + 1));
    names.push_back("y");
    return names;
  }

  double loss(const Vector& theta, Observation x) const override {
    const double r = x[dim()] - x.head(dim()).dot(theta);
    return r * r;
  }
  void add_grad_loss(const Vector& theta, Observation x, double weight,
                     Eigen::Ref<Vector> out) const override {
    const double r = x[dim()] - x.head(dim()).dot(theta);
    out.noalias() += (-2.0 * weight * r) * x.head(dim());
  }
  double risk(const Vector& theta) const override {
    const Vector diff = theta - facts_.theta0;
    return noise_.variance() + diff.dot(cov_z_ * diff);
  }
  SampleMatrix sample(Index N, std::mt19937_64& rng) const override {
    const Index d = dim();
    SampleMatrix x(N, d + 1);
    std::normal_distribution<double> normal;
    Vector u(d);
    const Matrix lower = chol_.matrixL();
    for (Index i = 0; i < N; ++i) {
      for (Index c = 0; c < d; ++c) u[c] = normal(rng);
      const Vector z = lower * u;
      x.row(i).head(d) = z.transpose();
      x(i, d) = z.dot(facts_.theta0) + noise_.draw(rng);
    }
    return x;
  }
  Vector pilot(const SampleMatrix& data) const override {
    // Coordinatewise median of least-squares fits on disjoint chunks.
    const Index d = dim();
    const Index chunk = std::max<Index>(4 * d, 8);
    const Index chunks = std::max<Index>(1, data.rows() / chunk);
    Matrix fits(chunks, d);
    for (Index c = 0; c < chunks; ++c) {
      const Index rows = (c + 1 == chunks) ? data.rows() - c * chunk : chunk;
      const Matrix z = data.block(c * chunk, 0, rows, d);
      const Vector y = data.block(c * chunk, d, rows, 1);
      fits.row(c) = z.colPivHouseholderQr().solve(y).transpose();
    }
    return coordinatewise_median(fits);
  }
  Vector reference_observation() const override { return Vector::Zero(dim() + 1); }

 private:
  NoiseSpec noise_;
  Matrix cov_z_;
  Eigen::LLT<Matrix> chol_;
};

class ExponentialRateModel final : public RiskModel {
 public:
  explicit ExponentialRateModel(double lambda0) : lambda0_(lambda0) {
    if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) throw ConfigError("exponential rate: lambda0 must be > 0");
    const double inv2 = 1.0 / (lambda0 * lambda0);
    facts_.theta0 = Vector::Constant(1, lambda0);
    facts_.hessian = Matrix::Constant(1, 1, inv2);
    facts_.sigma = Matrix::Constant(1, 1, inv2);
    // l - L = lambda0 (x - 1/lambda0) and grad l = x - 1/lambda0 at theta0.
    facts_.gamma = Vector::Constant(1, 1.0 / lambda0);
    facts_.var_ell = 1.0;
    facts_.moment_order = 1.0;
  }

  std::string id() const override { return "exponential-rate"; }
  Index sample_width() const override { return 1; }

  bool admissible(const Vector& theta) const override {
    return theta.size() == 1 && std::isfinite(theta[0]) && theta[0] > 0.0;
  }
  double loss(const Vector& theta, Observation x) const override {
    return theta[0] * x[0] - std::log(theta[0]);
  }
  void add_grad_loss(const Vector& theta, Observation x, double weight,
                     Eigen::Ref<Vector> out) const override {
    out[0] += weight * (x[0] - 1.0 / theta[0]);
  }
  double risk(const Vector& theta) const override { return theta[0] / lambda0_ - std::log(theta[0]); }
  SampleMatrix sample(Index N, std::mt19937_64& rng) const override {
    std::exponential_distribution<double> expo(lambda0_);
    SampleMatrix x(N, 1);
    for (Index i = 0; i < N; ++i) x(i, 0) = expo(rng);
    return x;
  }
  Vector pilot(const SampleMatrix& data) const override {
    std::vector<double> v(data.data(), data.data() + data.size());
    const double med = median_inplace(v);
    return Vector::Constant(1, med > 0.0 ? std::log(2.0) / med : lambda0_);
  }
  Vector reference_observation() const override { return Vector::Constant(1, 1.0 / lambda0_); }

 private:
  double lambda0_;
};

}  // namespace

std::vector<std::string> RiskModel::column_names() const {
  std::vector<std::string> names;
  for (Index c = 0; c < sample_width(); ++c) names.push_back("x_" + std::to_string(c + 1));
  return names;
}

Vector RiskModel::grad_loss(const Vector& theta, Observation x) const {
  Vector g = Vector::Zero(dim());
  add_grad_loss(theta, x, 1.0, g);
  return g;
}

ModelPtr location_model(Index d, const Vector& mu, const NoiseSpec& noise) {
  return std::make_shared<LocationModel>(d, mu, noise);
}

ModelPtr gaussian_location(Index d, const Vector& mu, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("gaussian location: sigma must be > 0");
  return std::make_shared<LocationModel>(d, mu, NoiseSpec::gaussian(sigma));
}

ModelPtr linear_regression(Index d, const Vector& theta_star, const Matrix& cov_z, const NoiseSpec& noise) {
  return std::make_shared<LinearRegressionModel>(d, theta_star, cov_z, noise);
}

ModelPtr exponential_rate(double lambda0) { return std::make_shared<ExponentialRateModel>(lambda0); }

}  // namespace robust_erm
