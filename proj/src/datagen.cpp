#include "robust_erm/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "robust_erm/errors.hpp"

namespace robust_erm {

void NoiseSpec::validate() const {
  switch (family) {
    case Family::gaussian:
      if (!(parameter >= 0.0) || !std::isfinite(parameter)) throw ConfigError("gaussian noise: sigma must be >= 0");
      break;
    case Family::student_t:
      if (!(parameter > 2.0)) throw ConfigError("student_t noise: dof must exceed 2");
      break;
    case Family::pareto_symmetric:
      if (!(parameter > 2.0)) throw ConfigError("pareto_symmetric noise: alpha must exceed 2");
      break;
  }
}

double NoiseSpec::draw(std::mt19937_64& rng) const {
  switch (family) {
    case Family::gaussian: {
      std::normal_distribution<double> normal(0.0, 1.0);
      return parameter * normal(rng);
    }
    case Family::student_t: {
      std::student_t_distribution<double> t(parameter);
      return t(rng);
    }
    case Family::pareto_symmetric: {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const double u = 1.0 - unit(rng);  // (0, 1]
      const double magnitude = std::pow(u, -1.0 / parameter);
      return unit(rng) < 0.5 ? -magnitude : magnitude;
    }
  }
  return 0.0;
}

double NoiseSpec::variance() const {
  switch (family) {
    case Family::gaussian:
      return parameter * parameter;
    case Family::student_t:
      return parameter / (parameter - 2.0);
    case Family::pareto_symmetric:
      return parameter / (parameter - 2.0);
  }
  return 0.0;
}

double NoiseSpec::fourth_moment() const {
  const double inf = std::numeric_limits<double>::infinity();
  switch (family) {
    case Family::gaussian:
      return 3.0 * std::pow(parameter, 4);
    case Family::student_t:
      return parameter > 4.0 ? 3.0 * parameter * parameter / ((parameter - 2.0) * (parameter - 4.0)) : inf;
    case Family::pareto_symmetric:
      return parameter > 4.0 ? parameter / (parameter - 4.0) : inf;
  }
  return inf;
}

double NoiseSpec::moment_bound() const {
  return family == Family::gaussian ? std::numeric_limits<double>::infinity() : parameter;
}

double NoiseSpec::moment_order() const {
  const double bound = moment_bound();
  return std::isfinite(bound) ? std::clamp(bound - 2.0, 0.0, 1.0) : 1.0;
}

std::string NoiseSpec::describe() const {
  std::ostringstream os;
  switch (family) {
    case Family::gaussian:
      os << "gaussian(" << parameter << ")";
      break;
    case Family::student_t:
      os << "student_t(" << parameter << ")";
      break;
    case Family::pareto_symmetric:
      os << "pareto_symmetric(" << parameter << ")";
      break;
  }
  return os.str();
}

ContaminationSpec ContaminationSpec::with_fraction(double kappa, Index N) const {
  if (!(kappa >= 0.0) || kappa >= 1.0) throw ConfigError("contamination fraction must lie in [0, 1)");
  ContaminationSpec s = *this;
  s.outliers = static_cast<Index>(std::llround(kappa * static_cast<double>(N)));
  return s;
}

const char* to_string(ContaminationSpec::Strategy s) {
  switch (s) {
    case ContaminationSpec::Strategy::fixed_point:
      return "fixed_point";
    case ContaminationSpec::Strategy::amplify:
      return "amplify";
    case ContaminationSpec::Strategy::adaptive:
      return "adaptive";
  }
  return "unknown";
}

SampleMatrix sample_clean(const RiskModel& model, Index N, std::uint64_t seed) {
  if (N < 1) throw ConfigError("sample size must be at least 1");
  std::mt19937_64 rng(seed);
  return model.sample(N, rng);
}

ContaminatedSample contaminate(const SampleMatrix& data, const RiskModel& model,
                               const ContaminationSpec& spec, std::uint64_t seed) {
  const Index N = data.rows();
  if (spec.outliers < 0 || spec.outliers >= N) {
    throw ConfigError("outlier count O=" + std::to_string(spec.outliers) + " must satisfy 0 <= O < N=" +
                      std::to_string(N));
  }
  ContaminatedSample out{data, {}, spec.kappa(N)};
  if (spec.outliers == 0) return out;

  std::vector<Index> rows(static_cast<std::size_t>(N));
  std::iota(rows.begin(), rows.end(), Index{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first O entries are a uniform sample without replacement.
  for (Index i = 0; i < spec.outliers; ++i) {
    std::uniform_int_distribution<Index> pick(i, N - 1);
    std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(pick(rng))]);
  }
  rows.resize(static_cast<std::size_t>(spec.outliers));
  std::sort(rows.begin(), rows.end());

  Eigen::RowVectorXd target;
  if (spec.strategy == ContaminationSpec::Strategy::adaptive) {
    const Vector reference = model.reference_observation();
    Vector direction = spec.direction;
    if (direction.size() == 0) {
      direction = data.colwise().mean().transpose() - reference;
      if (!(direction.norm() > 0.0) || !direction.allFinite()) direction = Vector::Unit(data.cols(), 0);
    }
    if (direction.size() != data.cols()) throw ConfigError("adaptive direction has wrong dimension");
    direction.normalize();
    target = (reference + spec.magnitude * direction).transpose();
  }
  for (Index r : rows) {
    switch (spec.strategy) {
      case ContaminationSpec::Strategy::fixed_point:
        out.data.row(r).setConstant(spec.location);
        break;
      case ContaminationSpec::Strategy::amplify:
        out.data.row(r) *= spec.scale;
        break;
      case ContaminationSpec::Strategy::adaptive:
        out.data.row(r) = target;
        break;
    }
  }
  out.outlier_rows = std::move(rows);
  return out;
}

}  // namespace robust_erm
