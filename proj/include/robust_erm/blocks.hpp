#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "robust_erm/types.hpp"

namespace robust_erm {

/// Read-only view of equal-size index groups stored back to back.
struct GroupView {
  std::span<const Index> members;
  Index group_size = 0;

  Index count() const { return group_size == 0 ? 0 : static_cast<Index>(members.size()) / group_size; }
  std::span<const Index> group(Index j) const {
    return members.subspan(static_cast<std::size_t>(j * group_size),
                           static_cast<std::size_t>(group_size));
  }
};

/// Partition of k * n sample indices into k disjoint blocks of size n.
/// Indices are 0-based; the N - k n leftover indices are unused.
class BlockScheme {
 public:
  BlockScheme() = default;

  Index sample_count() const { return sample_count_; }  // N
  Index block_size() const { return block_size_; }      // n
  Index block_count() const { return block_count_; }    // k
  Index used_count() const { return block_size_ * block_count_; }

  /// Block of each sample index, or -1 when unassigned.
  std::vector<Index> assignment() const;
  std::span<const Index> block(Index j) const { return groups().group(j); }
  GroupView groups() const { return {order_, block_size_}; }

  /// Scale factor Delta_n > 0 applied inside rho.
  double delta_n() const { return delta_n_; }
  /// Copy with a different Delta_n; throws ConfigError unless delta > 0.
  BlockScheme with_delta(double delta) const;

  friend BlockScheme make_blocks(Index N, Index k, std::optional<std::uint64_t> shuffle_seed);

 private:
  Index sample_count_ = 0;
  Index block_size_ = 0;
  Index block_count_ = 0;
  std::vector<Index> order_;
  double delta_n_ = 1.0;
};

/// Split indices 0..N-1 into k contiguous blocks of size floor(N/k), after
/// a seeded permutation when `shuffle_seed` is set. Requires 1 <= k <= N/2.
BlockScheme make_blocks(Index N, Index k, std::optional<std::uint64_t> shuffle_seed = std::nullopt);

/// All C(N, n) subsets of size n, in lexicographic order.
class SubsetFamily {
 public:
  /// Throws ConfigError when N > max_sample_count().
  SubsetFamily(Index N, Index n);

  static constexpr Index max_sample_count() { return 12; }

  Index sample_count() const { return sample_count_; }
  Index subset_size() const { return subset_size_; }
  Index subset_count() const { return static_cast<Index>(members_.size()) / subset_size_; }
  GroupView groups() const { return {members_, subset_size_}; }

 private:
  Index sample_count_;
  Index subset_size_;
  std::vector<Index> members_;
};

/// How the scale factor Delta_n of the proxy is chosen.
struct DeltaPolicy {
  enum class Kind { constant, mad_scaled };
  Kind kind = Kind::mad_scaled;
  double value = 1.0;  // used when kind == constant
  double floor = 0.1;  // lower bound for the MAD-scaled choice

  static DeltaPolicy constant(double delta) { return {Kind::constant, delta, 0.1}; }
  static DeltaPolicy mad_scaled(double floor = 0.1) { return {Kind::mad_scaled, 1.0, floor}; }
};

/// Resolve Delta_n: the constant, or max(1.4826 * MAD(block_means) * sqrt(n), floor).
double resolve_delta(const DeltaPolicy& policy, std::span<const double> block_means, Index block_size);

/// Block count for contaminated data: ceil(N * kappa^(2/(2+tau))), raised to
/// at least 2 O + 1. Returns `clean_default` when O = 0. Throws ConfigError if
/// the result would exceed N/2.
Index block_count_for_contamination(Index N, Index outliers, double tau, Index clean_default);

}  // namespace robust_erm
