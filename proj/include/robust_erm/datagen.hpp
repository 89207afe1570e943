#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "robust_erm/models.hpp"
#include "robust_erm/noise.hpp"

namespace robust_erm {

/// Replacement of O observations by adversarial values.
struct ContaminationSpec {
  enum class Strategy { fixed_point, amplify, adaptive };

  Index outliers = 0;  // O
  Strategy strategy = Strategy::fixed_point;
  /// fixed_point: value of every coordinate of an outlier row.
  double location = 1e6;
  /// amplify: factor applied to the selected rows.
  double scale = 1e3;
  /// adaptive: distance from the model's reference observation.
  double magnitude = 1e6;
  /// adaptive: unit direction; when empty the adversary inspects the data and
  /// pushes along the deviation of the sample mean.
  Vector direction;

  static ContaminationSpec none() { return {}; }
  static ContaminationSpec fixed_point(Index outliers, double location) {
    ContaminationSpec s;
    s.outliers = outliers;
    s.strategy = Strategy::fixed_point;
    s.location = location;
    return s;
  }
  static ContaminationSpec amplify(Index outliers, double scale) {
    ContaminationSpec s;
    s.outliers = outliers;
    s.strategy = Strategy::amplify;
    s.scale = scale;
    return s;
  }
  static ContaminationSpec adaptive(Index outliers, double magnitude = 1e6) {
    ContaminationSpec s;
    s.outliers = outliers;
    s.strategy = Strategy::adaptive;
    s.magnitude = magnitude;
    return s;
  }
  /// O = round(kappa N).
  ContaminationSpec with_fraction(double kappa, Index N) const;

  /// kappa = O / N.
  double kappa(Index N) const { return static_cast<double>(outliers) / static_cast<double>(N); }
};

const char* to_string(ContaminationSpec::Strategy s);

struct ContaminatedSample {
  SampleMatrix data;
  std::vector<Index> outlier_rows;  // sorted
  double kappa = 0.0;
};

/// N i.i.d. draws from the model, deterministic in `seed`.
SampleMatrix sample_clean(const RiskModel& model, Index N, std::uint64_t seed);

/// Replace exactly O rows chosen uniformly without replacement under `seed`.
/// Throws ConfigError when O >= N. O = 0 returns the input unchanged.
ContaminatedSample contaminate(const SampleMatrix& data, const RiskModel& model,
                               const ContaminationSpec& spec, std::uint64_t seed);

}  // namespace robust_erm
