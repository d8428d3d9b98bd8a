#pragma once

// Search kernels shared by the public solvers and the vote counter. A visitor
// receives every subset whose sum lies in the tolerance window, as a bitmask
// over pool positions plus the sum evaluated in canonical order.
//
// Canonical order: pool positions sorted by value descending, ties by
// position. Every backend accumulates sums in this order starting from 0.0,
// so a subset's sum, and hence its window membership, is bit-identical
// whichever backend found it.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "gridtopo/subset_sum.hpp"

namespace gridtopo::detail {

void validate_query(const SubsetQuery& q);
void require_nonnegative(const SubsetQuery& q);

inline std::size_t mask_words(std::size_t pool_size) { return (pool_size + 63) / 64; }

class CanonicalPool {
 public:
  explicit CanonicalPool(const SubsetQuery& q) : query_(q) {
    order_.resize(q.pool.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return q.pool[a].value > q.pool[b].value;
    });
    values_.reserve(order_.size());
    for (std::size_t p : order_) values_.push_back(q.pool[p].value);
  }

  std::size_t size() const noexcept { return values_.size(); }
  // Pool position of canonical index i.
  std::size_t position(std::size_t i) const { return order_[i]; }
  double value(std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  const SubsetQuery& query() const noexcept { return query_; }

  bool in_window(double sum) const {
    return std::abs(sum - query_.target) <= query_.tolerance;
  }

 private:
  const SubsetQuery& query_;
  std::vector<std::size_t> order_;
  std::vector<double> values_;
};

// Slack applied to bound tests computed from prefix sums, which round
// differently from the running canonical sum.
inline double bound_slack(const SubsetQuery& q) {
  double scale = std::abs(q.target) + 1.0;
  for (const PoolEntry& e : q.pool) scale += std::abs(e.value);
  return 1e-10 * scale;
}

// Depth-first enumeration over canonical order. Values must be nonnegative.
// visit(std::span<const std::uint64_t> pool_mask, std::size_t count, double sum)
template <typename Visit>
class BranchAndBoundSearch {
 public:
  BranchAndBoundSearch(const CanonicalPool& pool, Visit& visit)
      : pool_(pool), visit_(visit), mask_(mask_words(pool.size()), 0) {
    const auto& q = pool.query();
    const auto values = pool.values();
    prefix_.assign(values.size() + 1, 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) prefix_[i + 1] = prefix_[i] + values[i];
    const double slack = bound_slack(q);
    low_ = q.target - q.tolerance - slack;
    high_ = q.target + q.tolerance + slack;
    max_size_ = q.max_size;
  }

  void run() { descend(0, 0, 0.0); }

 private:
  void descend(std::size_t from, std::size_t count, double sum) {
    const auto values = pool_.values();
    const std::size_t n = values.size();
    const std::size_t slots = max_size_ - count;
    if (slots == 0 || from >= n) return;

    const double room = high_ - sum;
    auto first = std::partition_point(values.begin() + static_cast<std::ptrdiff_t>(from),
                                      values.end(), [&](double v) { return v > room; });
    for (auto j = static_cast<std::size_t>(first - values.begin()); j < n; ++j) {
      const std::size_t stop = std::min(n, j + slots);
      if (sum + (prefix_[stop] - prefix_[j]) < low_) break;
      const double next = sum + values[j];
      const std::size_t pos = pool_.position(j);
      mask_[pos >> 6] |= std::uint64_t{1} << (pos & 63);
      if (next >= low_ && pool_.in_window(next)) {
        visit_(std::span<const std::uint64_t>(mask_), count + 1, next);
      }
      descend(j + 1, count + 1, next);
      mask_[pos >> 6] &= ~(std::uint64_t{1} << (pos & 63));
    }
  }

  const CanonicalPool& pool_;
  Visit& visit_;
  std::vector<std::uint64_t> mask_;
  std::vector<double> prefix_;
  double low_ = 0.0;
  double high_ = 0.0;
  std::size_t max_size_ = 0;
};

template <typename Visit>
void branch_bound_visit(const SubsetQuery& q, Visit&& visit) {
  CanonicalPool pool(q);
  BranchAndBoundSearch<std::remove_reference_t<Visit>> search(pool, visit);
  search.run();
}

}  // namespace gridtopo::detail
