#pragma once

#include <Eigen/Dense>

namespace robust_erm {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;

/// One observation per row. Row-major so that a row maps onto a contiguous
/// column vector without copying.
using SampleMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A single observation viewed as a column vector.
using Observation = Eigen::Ref<const Vector>;

}  // namespace robust_erm
