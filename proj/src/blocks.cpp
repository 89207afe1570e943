#include "robust_erm/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "robust_erm/errors.hpp"

namespace robust_erm {

std::vector<Index> BlockScheme::assignment() const {
  std::vector<Index> block_of(static_cast<std::size_t>(sample_count_), -1);
  for (Index j = 0; j < block_count_; ++j) {
    for (Index i : block(j)) block_of[static_cast<std::size_t>(i)] = j;
  }
  return block_of;
}

BlockScheme BlockScheme::with_delta(double delta) const {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("Delta_n must be positive and finite");
  BlockScheme copy = *this;
  copy.delta_n_ = delta;
  return copy;
}

BlockScheme make_blocks(Index N, Index k, std::optional<std::uint64_t> shuffle_seed) {
  if (k < 1 || 2 * k > N) {
    throw ConfigError("block count k=" + std::to_string(k) + " must satisfy 1 <= k <= N/2 (N=" +
                      std::to_string(N) + ")");
  }
  std::vector<Index> perm(static_cast<std::size_t>(N));
  std::iota(perm.begin(), perm.end(), Index{0});
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    std::shuffle(perm.begin(), perm.end(), rng);
  }
  BlockScheme scheme;
  scheme.sample_count_ = N;
  scheme.block_count_ = k;
  scheme.block_size_ = N / k;
  perm.resize(static_cast<std::size_t>(scheme.block_size_ * k));
  scheme.order_ = std::move(perm);
  return scheme;
}

SubsetFamily::SubsetFamily(Index N, Index n) : sample_count_(N), subset_size_(n) {
  if (N > max_sample_count()) {
    throw ConfigError("exhaustive subset enumeration supports N <= " +
                      std::to_string(max_sample_count()) + "; use robust_risk with blocks instead");
  }
  if (n < 1 || n > N) throw ConfigError("subset size must satisfy 1 <= n <= N");
  std::vector<Index> pick(static_cast<std::size_t>(n));
  std::iota(pick.begin(), pick.end(), Index{0});
  while (true) {
    members_.insert(members_.end(), pick.begin(), pick.end());
    // Advance to the next combination in lexicographic order.
    Index i = n - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == N - n + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < n; ++j) {
      pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
}

double resolve_delta(const DeltaPolicy& policy, std::span<const double> block_means, Index block_size) {
  if (policy.kind == DeltaPolicy::Kind::constant) {
    if (!(policy.value > 0.0) || !std::isfinite(policy.value)) {
      throw ConfigError("constant Delta_n must be positive and finite");
    }
    return policy.value;
  }
  if (block_means.empty()) throw ConfigError("MAD-scaled Delta_n needs at least one block");
  std::vector<double> v(block_means.begin(), block_means.end());
  auto median_of = [](std::vector<double>& x) {
    const std::size_t m = x.size() / 2;
    std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(m), x.end());
    double med = x[m];
    if (x.size() % 2 == 0) {
      med = 0.5 * (med + *std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(m)));
    }
    return med;
  };
  const double med = median_of(v);
  for (double& x : v) x = std::abs(x - med);
  const double mad = median_of(v);
  const double scaled = 1.4826 * mad * std::sqrt(static_cast<double>(block_size));
  return std::isfinite(scaled) ? std::max(scaled, policy.floor) : policy.floor;
}

Index block_count_for_contamination(Index N, Index outliers, double tau, Index clean_default) {
  if (outliers < 0 || outliers >= N) throw ConfigError("outlier count must satisfy 0 <= O < N");
  if (outliers == 0) return clean_default;
  const double kappa = static_cast<double>(outliers) / static_cast<double>(N);
  const double raw = static_cast<double>(N) * std::pow(kappa, 2.0 / (2.0 + tau));
  const Index k = std::max(static_cast<Index>(std::ceil(raw)), 2 * outliers + 1);
  if (2 * k > N) {
    throw ConfigError("contamination too heavy: required k=" + std::to_string(k) +
                      " exceeds N/2");
  }
  return k;
}

}  // namespace robust_erm
