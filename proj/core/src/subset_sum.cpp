#include "gridtopo/subset_sum.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>

#include "gridtopo/error.hpp"
#include "subset_search.hpp"

namespace gridtopo {

bool canonical_less(const SubsetHit& a, const SubsetHit& b) {
  if (a.deviation != b.deviation) return a.deviation < b.deviation;
  if (a.members.size() != b.members.size()) return a.members.size() < b.members.size();
  return a.members < b.members;
}

namespace detail {

void validate_query(const SubsetQuery& q) {
  if (!(q.tolerance >= 0.0) || !std::isfinite(q.tolerance)) {
    throw InvalidArgument("subset query: tolerance must be finite and >= 0");
  }
  if (!std::isfinite(q.target)) throw InvalidArgument("subset query: target must be finite");
  if (q.max_size == 0) throw InvalidArgument("subset query: max_size must be >= 1");
  if (q.limit == 0) throw InvalidArgument("subset query: limit must be >= 1");
  std::set<NodeId> ids;
  for (const PoolEntry& e : q.pool) {
    if (!std::isfinite(e.value)) {
      throw InvalidArgument("subset query: non-finite value for node " + std::to_string(e.node));
    }
    if (!ids.insert(e.node).second) {
      throw InvalidArgument("subset query: node " + std::to_string(e.node) +
                            " appears twice in the pool");
    }
  }
}

void require_nonnegative(const SubsetQuery& q) {
  for (const PoolEntry& e : q.pool) {
    if (e.value < 0.0) {
      throw InvalidArgument("branch and bound: negative value for node " +
                            std::to_string(e.node));
    }
  }
}

}  // namespace detail

namespace {

// Keeps the canonical best `limit` hits.
class HitCollector {
 public:
  explicit HitCollector(const SubsetQuery& q) : query_(q) {}

  void offer(std::span<const std::uint64_t> pool_mask, double sum) {
    SubsetHit hit;
    for (std::size_t w = 0; w < pool_mask.size(); ++w) {
      for (std::uint64_t bits = pool_mask[w]; bits != 0; bits &= bits - 1) {
        const std::size_t pos = w * 64 + static_cast<std::size_t>(std::countr_zero(bits));
        hit.members.push_back(query_.pool[pos].node);
      }
    }
    std::sort(hit.members.begin(), hit.members.end());
    hit.achieved_sum = sum;
    hit.deviation = std::abs(sum - query_.target);
    hits_.push_back(std::move(hit));
    if (query_.limit != kUnlimited && hits_.size() >= 2 * query_.limit + 4096) shrink();
  }

  std::vector<SubsetHit> finish() && {
    shrink();
    return std::move(hits_);
  }

 private:
  void shrink() {
    const auto keep = static_cast<std::ptrdiff_t>(std::min(query_.limit, hits_.size()));
    std::partial_sort(hits_.begin(), hits_.begin() + keep, hits_.end(), canonical_less);
    hits_.resize(static_cast<std::size_t>(keep));
  }

  const SubsetQuery& query_;
  std::vector<SubsetHit> hits_;
};

// Maps a set of canonical indices to a pool-position mask and its canonical sum.
class CanonicalSubset {
 public:
  explicit CanonicalSubset(const detail::CanonicalPool& pool)
      : pool_(pool), mask_(detail::mask_words(pool.size()), 0) {}

  void clear() {
    std::fill(mask_.begin(), mask_.end(), 0);
    sum_ = 0.0;
  }

  // Indices must arrive in ascending canonical order.
  void add(std::size_t index) {
    const std::size_t pos = pool_.position(index);
    mask_[pos >> 6] |= std::uint64_t{1} << (pos & 63);
    sum_ += pool_.value(index);
  }

  void add_bits(std::uint64_t bits, std::size_t offset) {
    for (; bits != 0; bits &= bits - 1) add(offset + static_cast<std::size_t>(std::countr_zero(bits)));
  }

  double sum() const noexcept { return sum_; }
  std::span<const std::uint64_t> mask() const noexcept { return mask_; }

 private:
  const detail::CanonicalPool& pool_;
  std::vector<std::uint64_t> mask_;
  double sum_ = 0.0;
};

struct HalfSum {
  double sum;
  std::uint32_t bits;
  std::uint32_t count;
};

// Subset sums of canonical indices [begin, end) with at most `max_size` members.
std::vector<HalfSum> half_sums(const detail::CanonicalPool& pool, std::size_t begin,
                               std::size_t end, std::size_t max_size) {
  const std::size_t width = end - begin;
  const std::size_t total = std::size_t{1} << width;
  std::vector<double> sums(total, 0.0);
  std::vector<HalfSum> out;
  out.reserve(total);
  out.push_back({0.0, 0, 0});
  for (std::size_t bits = 1; bits < total; ++bits) {
    const auto low = static_cast<std::size_t>(std::countr_zero(bits));
    sums[bits] = sums[bits & (bits - 1)] + pool.value(begin + low);
    const auto count = static_cast<std::uint32_t>(std::popcount(bits));
    if (count <= max_size) out.push_back({sums[bits], static_cast<std::uint32_t>(bits), count});
  }
  return out;
}

}  // namespace

std::vector<SubsetHit> enumerate_exhaustive(const SubsetQuery& query) {
  detail::validate_query(query);
  const std::size_t n = query.pool.size();
  if (n > kExhaustivePoolLimit) {
    throw CapacityError("enumerate_exhaustive: pool of " + std::to_string(n) +
                        " exceeds " + std::to_string(kExhaustivePoolLimit));
  }
  const detail::CanonicalPool pool(query);
  HitCollector collector(query);
  CanonicalSubset subset(pool);
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t bits = 1; bits < total; ++bits) {
    if (static_cast<std::size_t>(std::popcount(bits)) > query.max_size) continue;
    subset.clear();
    subset.add_bits(bits, 0);
    if (pool.in_window(subset.sum())) collector.offer(subset.mask(), subset.sum());
  }
  return std::move(collector).finish();
}

std::vector<SubsetHit> solve_branch_bound(const SubsetQuery& query) {
  detail::validate_query(query);
  detail::require_nonnegative(query);
  HitCollector collector(query);
  detail::branch_bound_visit(query, [&](std::span<const std::uint64_t> mask, std::size_t,
                                        double sum) { collector.offer(mask, sum); });
  return std::move(collector).finish();
}

std::vector<SubsetHit> solve_meet_middle(const SubsetQuery& query) {
  detail::validate_query(query);
  const std::size_t n = query.pool.size();
  if (n > kMeetMiddlePoolLimit) {
    throw CapacityError("solve_meet_middle: pool of " + std::to_string(n) +
                        " exceeds " + std::to_string(kMeetMiddlePoolLimit));
  }
  HitCollector collector(query);
  if (n == 0) return std::move(collector).finish();

  const detail::CanonicalPool pool(query);
  const std::size_t half = n / 2;
  const auto left = half_sums(pool, 0, half, query.max_size);
  auto right = half_sums(pool, half, n, query.max_size);
  std::sort(right.begin(), right.end(),
            [](const HalfSum& a, const HalfSum& b) { return a.sum < b.sum; });

  const double slack = detail::bound_slack(query);
  CanonicalSubset subset(pool);
  for (const HalfSum& a : left) {
    const double lo = query.target - query.tolerance - slack - a.sum;
    const double hi = query.target + query.tolerance + slack - a.sum;
    auto it = std::lower_bound(right.begin(), right.end(), lo,
                               [](const HalfSum& h, double v) { return h.sum < v; });
    for (; it != right.end() && it->sum <= hi; ++it) {
      const std::size_t count = a.count + it->count;
      if (count == 0 || count > query.max_size) continue;
      subset.clear();
      subset.add_bits(a.bits, 0);
      subset.add_bits(it->bits, half);
      if (pool.in_window(subset.sum())) collector.offer(subset.mask(), subset.sum());
    }
  }
  return std::move(collector).finish();
}

}  // namespace gridtopo
