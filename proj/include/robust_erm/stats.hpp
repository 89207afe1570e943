#pragma once

#include <span>
#include <vector>

#include "robust_erm/types.hpp"

namespace robust_erm {

double normal_cdf(double x);

/// One-sample Kolmogorov-Smirnov statistic of `values` against N(0, 1).
double ks_statistic(std::span<const double> values);

/// Asymptotic Kolmogorov tail P(K > sqrt(R) D), series truncated at 100 terms.
double ks_pvalue(double statistic, Index sample_size);

double median(std::vector<double> values);

/// Unbiased covariance of the rows of `x`.
Matrix sample_covariance(const Matrix& x);

/// Largest absolute eigenvalue of a symmetric matrix.
double operator_norm_sym(const Matrix& a);

}  // namespace robust_erm
