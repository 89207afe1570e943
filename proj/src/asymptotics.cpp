#include "robust_erm/asymptotics.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "robust_erm/errors.hpp"
#include "robust_erm/quadrature.hpp"

namespace robust_erm {

namespace {

constexpr double kPsdTol = 1e-10;

// Expectations entering A^2, all at u = Z1 / Delta.
struct Moments {
  double r2 = 0.0;      // E rho''
  double r2sq = 0.0;    // E rho''^2
  double r4 = 0.0;      // E rho^(4)
  double r1sq = 0.0;    // E rho'^2
  double cross = 0.0;   // E rho'' rho' Z1
  Matrix r2sq_z2z2;     // E rho''^2 Z2 Z2^T
};

Matrix assemble(const Moments& m, const JointGaussianSpec& spec, double delta, CrossTermSign sign) {
  if (!(m.r2 > 0.0)) throw NumericalError("E rho'' vanished; A^2 is undefined");
  const Matrix gg = spec.gamma * spec.gamma.transpose();
  const double second = m.r4 * m.r4 * m.r1sq / (delta * delta * m.r2 * m.r2);
  double third = 2.0 * m.r4 * m.cross / (delta * spec.var_z1 * m.r2);
  if (sign == CrossTermSign::linearized) third = -third;
  Matrix a = (m.r2sq_z2z2 + (second + third) * gg) / (m.r2 * m.r2);
  return 0.5 * (a + a.transpose());
}

// sigma22 - gamma gamma^T / v, checked PSD and clipped at zero.
Matrix conditional_covariance(const JointGaussianSpec& spec) {
  Matrix c = spec.sigma22 - spec.gamma * spec.gamma.transpose() / spec.var_z1;
  c = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(c);
  const double scale = std::max(1.0, spec.sigma22.cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -kPsdTol * scale) {
    throw SpecError("conditional covariance of Z2 given Z1 is not PSD");
  }
  const Vector clipped = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
}

std::vector<double> band_breakpoints(double delta) { return {-2 * delta, -delta, delta, 2 * delta}; }

}  // namespace

ScaleLimit ScaleLimit::finite(double value) {
  if (!(value > 0.0) || !std::isfinite(value)) throw ConfigError("Delta_inf must be positive and finite");
  ScaleLimit s;
  s.infinite_ = false;
  s.value_ = value;
  return s;
}

double ScaleLimit::value() const {
  if (infinite_) throw std::logic_error("Delta_inf is infinite");
  return value_;
}

std::string ScaleLimit::describe() const { return infinite_ ? "inf" : std::to_string(value_); }

const char* to_string(CovarianceKind k) {
  switch (k) {
    case CovarianceKind::D2:
      return "D2";
    case CovarianceKind::A2:
      return "A2";
    default:
      return "V2";
  }
}

const char* to_string(CovarianceMethod m) {
  switch (m) {
    case CovarianceMethod::exact:
      return "exact";
    case CovarianceMethod::quadrature:
      return "quadrature";
    default:
      return "monte_carlo";
  }
}

Matrix JointGaussianSpec::joint() const {
  const Index d = sigma22.rows();
  Matrix j(d + 1, d + 1);
  j.topLeftCorner(d, d) = sigma22;
  j.topRightCorner(d, 1) = gamma;
  j.bottomLeftCorner(1, d) = gamma.transpose();
  j(d, d) = var_z1;
  return j;
}

void JointGaussianSpec::validate() const {
  if (sigma22.rows() != sigma22.cols() || gamma.size() != sigma22.rows()) {
    throw SpecError("joint Gaussian spec has inconsistent dimensions");
  }
  if (!(var_z1 > 0.0) || !std::isfinite(var_z1)) throw SpecError("Var(Z1) must be positive and finite");
  if (!sigma22.allFinite() || !gamma.allFinite()) throw SpecError("joint Gaussian spec is not finite");
  const Matrix j = joint();
  if (!j.isApprox(j.transpose(), 1e-12)) throw SpecError("sigma22 is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(j, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -kPsdTol * std::max(1.0, j.cwiseAbs().maxCoeff())) {
    throw SpecError("joint covariance of (Z2, Z1) is not PSD");
  }
}

JointGaussianSpec joint_spec(const RiskModel& model) {
  const auto& f = model.population();
  JointGaussianSpec spec{f.sigma, f.gamma, f.var_ell};
  spec.validate();
  return spec;
}

AsymptoticCovariance d_squared(const RiskModel& model) {
  const auto& f = model.population();
  Eigen::LLT<Matrix> llt(f.hessian);
  if (llt.info() != Eigen::Success) throw ConfigError("Hessian at theta0 is not positive definite");
  const Matrix h_inv = llt.solve(Matrix::Identity(f.hessian.rows(), f.hessian.cols()));
  AsymptoticCovariance out;
  out.matrix = h_inv * f.sigma * h_inv;
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose());
  out.kind = CovarianceKind::D2;
  out.method = CovarianceMethod::exact;
  return out;
}

AsymptoticCovariance a_squared(const JointGaussianSpec& spec, const ScaleLoss& loss,
                               const ScaleLimit& delta_inf, const ASquaredOptions& options) {
  spec.validate();
  AsymptoticCovariance out;
  out.kind = CovarianceKind::A2;
  out.delta_inf = delta_inf;
  out.method = CovarianceMethod::quadrature;
  if (delta_inf.is_infinite()) {
    out.matrix = spec.sigma22;
    out.method = CovarianceMethod::exact;
    return out;
  }
  const double delta = delta_inf.value();
  const Matrix cond = conditional_covariance(spec);
  const double sd = std::sqrt(spec.var_z1);
  const auto rule = piecewise_normal_rule<double>(sd, band_breakpoints(delta), options.nodes);

  Moments m;
  double r2sq_z1sq = 0.0;
  for (Index i = 0; i < rule.size(); ++i) {
    const double z = rule.nodes[i], w = rule.weights[i];
    const double u = z / delta;
    const double d1 = loss.deriv(u, 1), d2 = loss.deriv(u, 2), d4 = loss.deriv(u, 4);
    m.r2 += w * d2;
    m.r2sq += w * d2 * d2;
    m.r4 += w * d4;
    m.r1sq += w * d1 * d1;
    m.cross += w * d2 * d1 * z;
    r2sq_z1sq += w * d2 * d2 * z * z;
  }
  const double v = spec.var_z1;
  m.r2sq_z2z2 = m.r2sq * cond + (r2sq_z1sq / (v * v)) * spec.gamma * spec.gamma.transpose();
  out.matrix = assemble(m, spec, delta, options.cross_sign);
  return out;
}

AsymptoticCovariance a_squared_monte_carlo(const JointGaussianSpec& spec, const ScaleLoss& loss,
                                           const ScaleLimit& delta_inf, std::int64_t draws,
                                           std::uint64_t seed, CrossTermSign cross_sign) {
  spec.validate();
  constexpr int kBatches = 100;
  if (draws < kBatches * 2) throw ConfigError("Monte Carlo oracle needs at least 200 draws");
  AsymptoticCovariance out;
  out.kind = CovarianceKind::A2;
  out.delta_inf = delta_inf;
  out.method = CovarianceMethod::monte_carlo;
  const Index d = spec.sigma22.rows();
  if (delta_inf.is_infinite()) {
    out.matrix = spec.sigma22;
    out.standard_errors = Matrix::Zero(d, d);
    return out;
  }
  const double delta = delta_inf.value();
  const Matrix cond = conditional_covariance(spec);
  Eigen::SelfAdjointEigenSolver<Matrix> es(cond);
  const Matrix root = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const Vector slope = spec.gamma / spec.var_z1;
  const double sd = std::sqrt(spec.var_z1);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const std::int64_t per_batch = draws / kBatches;
  Moments total;
  total.r2sq_z2z2 = Matrix::Zero(d, d);
  std::vector<Matrix> batch_values;
  Vector w(d), z2(d);
  for (int b = 0; b < kBatches; ++b) {
    Moments m;
    m.r2sq_z2z2 = Matrix::Zero(d, d);
    for (std::int64_t s = 0; s < per_batch; ++s) {
      const double z1 = sd * normal(rng);
      for (Index c = 0; c < d; ++c) w[c] = normal(rng);
      z2.noalias() = slope * z1 + root * w;
      const double u = z1 / delta;
      const double d1 = loss.deriv(u, 1), d2 = loss.deriv(u, 2), d4 = loss.deriv(u, 4);
      m.r2 += d2;
      m.r2sq += d2 * d2;
      m.r4 += d4;
      m.r1sq += d1 * d1;
      m.cross += d2 * d1 * z1;
      m.r2sq_z2z2.noalias() += (d2 * d2) * z2 * z2.transpose();
    }
    total.r2 += m.r2;
    total.r2sq += m.r2sq;
    total.r4 += m.r4;
    total.r1sq += m.r1sq;
    total.cross += m.cross;
    total.r2sq_z2z2 += m.r2sq_z2z2;
    const double inv = 1.0 / static_cast<double>(per_batch);
    m.r2 *= inv;
    m.r2sq *= inv;
    m.r4 *= inv;
    m.r1sq *= inv;
    m.cross *= inv;
    m.r2sq_z2z2 *= inv;
    batch_values.push_back(assemble(m, spec, delta, cross_sign));
  }
  const double inv = 1.0 / static_cast<double>(per_batch * kBatches);
  total.r2 *= inv;
  total.r2sq *= inv;
  total.r4 *= inv;
  total.r1sq *= inv;
  total.cross *= inv;
  total.r2sq_z2z2 *= inv;
  out.matrix = assemble(total, spec, delta, cross_sign);

  Matrix mean = Matrix::Zero(d, d), sq = Matrix::Zero(d, d);
  for (const auto& bv : batch_values) mean += bv;
  mean /= kBatches;
  for (const auto& bv : batch_values) sq += (bv - mean).cwiseAbs2();
  out.standard_errors = (sq / (kBatches - 1)).cwiseSqrt() / std::sqrt(static_cast<double>(kBatches));
  return out;
}

AsymptoticCovariance v_squared(const RiskModel& model, const ScaleLoss& loss,
                               const ScaleLimit& delta_inf, const ASquaredOptions& options) {
  const auto& f = model.population();
  Eigen::LLT<Matrix> llt(f.hessian);
  if (llt.info() != Eigen::Success) throw ConfigError("Hessian at theta0 is not positive definite");
  const Matrix h_inv = llt.solve(Matrix::Identity(f.hessian.rows(), f.hessian.cols()));
  AsymptoticCovariance a = a_squared(joint_spec(model), loss, delta_inf, options);
  a.matrix = h_inv * a.matrix * h_inv;
  a.matrix = 0.5 * (a.matrix + a.matrix.transpose());
  a.kind = CovarianceKind::V2;
  return a;
}

double inflation_factor(const ScaleLoss& loss, double var_z1, const ScaleLimit& delta_inf, Index nodes) {
  if (delta_inf.is_infinite()) return 1.0;
  if (!(var_z1 > 0.0)) throw ConfigError("Var(Z1) must be positive");
  const double delta = delta_inf.value();
  const auto rule = piecewise_normal_rule<double>(std::sqrt(var_z1), band_breakpoints(delta), nodes);
  double e = 0.0, e2 = 0.0;
  for (Index i = 0; i < rule.size(); ++i) {
    const double r = loss.deriv(rule.nodes[i] / delta, 2);
    e += rule.weights[i] * r;
    e2 += rule.weights[i] * r * r;
  }
  return e2 / (e * e);
}

SteinResult stein_check(const std::function<double(double)>& f,
                        const std::function<double(double)>& f_prime, double gamma, double var1,
                        double var2, Index nodes, std::vector<double> breakpoints) {
  if (!(var1 > 0.0) || var2 < 0.0 || gamma * gamma > var1 * var2 * (1.0 + 1e-12)) {
    throw SpecError("Stein check covariance is not PSD");
  }
  const auto rule1 = piecewise_normal_rule<double>(std::sqrt(var1), breakpoints, nodes);
  const auto rule_w = gauss_hermite_normal<double>(nodes);
  const double slope = gamma / var1;
  const double resid = std::sqrt(std::max(0.0, var2 - gamma * gamma / var1));

  SteinResult r;
  for (Index i = 0; i < rule1.size(); ++i) {
    const double z1 = rule1.nodes[i];
    const double fz = f(z1);
    double inner = 0.0;
    for (Index k = 0; k < rule_w.size(); ++k) inner += rule_w.weights[k] * (slope * z1 + resid * rule_w.nodes[k]);
    r.lhs += rule1.weights[i] * fz * inner;
    r.rhs += rule1.weights[i] * f_prime(z1);
  }
  r.rhs *= gamma;
  r.abs_diff = std::abs(r.lhs - r.rhs);
  return r;
}

}  // namespace robust_erm
