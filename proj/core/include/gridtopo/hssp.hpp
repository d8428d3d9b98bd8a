#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gridtopo/measurement.hpp"
#include "gridtopo/subset_sum.hpp"
#include "gridtopo/topology.hpp"

namespace gridtopo {

enum class SolverBackend { kBranchBound, kMeetMiddle, kExhaustive };

std::string_view to_string(SolverBackend backend);
SolverBackend parse_backend(std::string_view text);

// Matching window for a candidate child set of m members:
// max(floor, z * sigma * sqrt(m + 1)).
struct TolerancePolicy {
  double z = 3.0;
  double floor = 1e-9;  // kW
};

// Which child sets a VoteTable keeps.
enum class Tallying {
  // Every per-timestep hit votes; the table holds every set that ever matched.
  kEveryHit,
  // Only sets that reach the highest vote count any set reaches. Searches all
  // timesteps jointly; the winner and its tally equal those of kEveryHit.
  kLeaders,
};

// Order among child sets with equal votes.
enum class Ranking {
  // Smaller summed deviation, then fewer members. Used with layer labels,
  // where every candidate is drawn from a single layer.
  kFitFirst,
  // Fewer members, then smaller summed deviation. Used without labels, where
  // a child set and the deeper cuts of its subtrees match equally well.
  kParsimonyFirst,
};

struct HsspOptions {
  // Layer label per node. When present, parents in layer l only search
  // layer l + 1 ("ordered" identification).
  std::optional<std::vector<std::size_t>> hierarchy;
  TolerancePolicy tolerance;
  std::size_t max_children = 8;
  // Hits per timestep that may vote, best first. A finite limit forces
  // per-timestep tallying.
  std::size_t vote_limit = kUnlimited;
  Tallying tallying = Tallying::kLeaders;
  AggregationMode mode = AggregationMode::kPureSum;
  // Multiplicative: sigma is a fraction and is scaled by each parent reading.
  NoiseMode noise_mode = NoiseMode::kAdditive;
  // Flat mode only.
  bool dominance_pruning = true;
  SolverBackend backend = SolverBackend::kBranchBound;
  std::size_t threads = 1;

  Ranking ranking() const noexcept {
    return hierarchy ? Ranking::kFitFirst : Ranking::kParsimonyFirst;
  }
};

// Candidate parents and, aligned with them, the nodes each may adopt.
struct CandidatePartition {
  std::vector<NodeId> parents;
  std::vector<std::vector<NodeId>> pools;
};

struct Tally {
  std::size_t votes = 0;
  double deviation_sum = 0.0;  // kW, summed over the timesteps that voted

  friend bool operator==(const Tally&, const Tally&) = default;
};

struct VoteEntry {
  std::vector<NodeId> members;  // ascending
  Tally tally;

  friend bool operator==(const VoteEntry&, const VoteEntry&) = default;
};

// Total order on child sets: more votes first, then per `ranking`, then
// lexicographic members.
bool ranks_before(const VoteEntry& a, const VoteEntry& b, Ranking ranking);

// Votes per candidate child set for one parent, accumulated over timesteps.
// Sets are keyed by a bitmask over the parent's pool.
class VoteTable {
 public:
  VoteTable() : VoteTable(0, {}) {}
  VoteTable(NodeId parent, std::vector<NodeId> pool, Ranking ranking = Ranking::kFitFirst);

  NodeId parent() const noexcept { return parent_; }
  std::span<const NodeId> pool() const noexcept { return pool_; }
  Ranking ranking() const noexcept { return ranking_; }
  std::size_t size() const noexcept { return used_; }
  bool empty() const noexcept { return used_ == 0; }

  // One vote for `members`, which must be a nonempty subset of the pool.
  void record(std::span<const NodeId> members, double deviation);
  // Adds `tally` to the set given as a bitmask over pool positions.
  void add(std::span<const std::uint64_t> mask, const Tally& tally);
  // Adds the other table's tallies; both must share parent and pool.
  void merge(const VoteTable& other);
  void clear();

  Tally tally(std::span<const NodeId> members) const;
  std::size_t max_votes() const noexcept;
  std::optional<VoteEntry> winner() const;
  // All entries in rank order.
  std::vector<VoteEntry> entries() const;

 private:
  std::size_t find_slot(std::span<const std::uint64_t> mask) const;
  void grow();
  std::vector<std::uint64_t> mask_of(std::span<const NodeId> members) const;
  std::vector<NodeId> members_of(std::size_t slot) const;
  std::span<const std::uint64_t> key(std::size_t slot) const {
    return {keys_.data() + slot * words_, words_};
  }

  NodeId parent_;
  std::vector<NodeId> pool_;
  Ranking ranking_;
  std::size_t words_;
  std::size_t used_ = 0;
  std::vector<std::uint64_t> keys_;
  std::vector<Tally> tallies_;
  std::vector<std::uint8_t> occupied_;
};

struct EstimatedEdge {
  NodeId parent = 0;
  NodeId child = 0;
  std::size_t votes = 0;

  friend bool operator==(const EstimatedEdge&, const EstimatedEdge&) = default;
};

struct EstimatedTopology {
  AdjacencyMatrix adjacency;
  std::vector<EstimatedEdge> edges;  // sorted by child
};

double tolerance_for(std::size_t subset_size, double sigma, const HsspOptions& options);

// Hierarchical: parents of layer l get layer l + 1 as their pool. Flat: every
// node gets every other node, minus those whose reading exceeds its own by
// more than tolerance_for(1) at some timestep (skipped if any reading is
// negative or dominance_pruning is off).
CandidatePartition partition_nodes(const MeasurementMatrix& x, double sigma,
                                   const HsspOptions& options);

// Tallies, over all timesteps, the subsets of `pool` whose readings sum to
// the parent's target within tolerance_for(|subset|).
VoteTable vote_subsets(NodeId parent, std::span<const NodeId> pool,
                       const MeasurementMatrix& x, double sigma,
                       const HsspOptions& options);

// Each parent claims its winning set; a child claimed more than once goes to
// the claim with the most votes, ties to the lower parent index. With layer
// labels, claims that skip or reverse a layer are dropped first.
EstimatedTopology reduce_redundant(std::span<const VoteTable> tables, std::size_t n,
                                   const HsspOptions& options);

EstimatedTopology identify_topology(const MeasurementMatrix& x, double sigma,
                                    const HsspOptions& options);

}  // namespace gridtopo
