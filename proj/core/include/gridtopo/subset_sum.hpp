#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "gridtopo/topology.hpp"

namespace gridtopo {

struct PoolEntry {
  NodeId node = 0;
  double value = 0.0;  // kW
};

// Find nonempty subsets of `pool` whose sum is within `tolerance` of `target`.
struct SubsetQuery {
  std::vector<PoolEntry> pool;
  double target = 0.0;
  double tolerance = 0.0;
  std::size_t max_size = 8;
  std::size_t limit = 64;
};

struct SubsetHit {
  std::vector<NodeId> members;  // ascending node ids
  double achieved_sum = 0.0;
  double deviation = 0.0;  // |achieved_sum - target|

  friend bool operator==(const SubsetHit&, const SubsetHit&) = default;
};

// Canonical order: ascending deviation, then cardinality, then members.
bool canonical_less(const SubsetHit& a, const SubsetHit& b);

inline constexpr std::size_t kExhaustivePoolLimit = 25;
inline constexpr std::size_t kMeetMiddlePoolLimit = 40;
inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

// Every backend returns the same canonical hit list for a given query:
// sums are evaluated in pool order, the window test is |sum - target| <=
// tolerance on that value, and the list is sorted canonically and cut at
// `limit`. Throw InvalidArgument on malformed queries (negative tolerance,
// zero max_size or limit, repeated node ids, non-finite values).

// Reference enumeration over all 2^n - 1 subsets. Throws CapacityError for
// pools larger than kExhaustivePoolLimit.
std::vector<SubsetHit> enumerate_exhaustive(const SubsetQuery& query);

// Depth-first search over values sorted descending with sum, suffix and
// cardinality bounds. Requires nonnegative pool values.
std::vector<SubsetHit> solve_branch_bound(const SubsetQuery& query);

// Sorted half-sum join. Throws CapacityError above kMeetMiddlePoolLimit.
std::vector<SubsetHit> solve_meet_middle(const SubsetQuery& query);

}  // namespace gridtopo
