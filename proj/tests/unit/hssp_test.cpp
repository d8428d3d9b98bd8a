#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "gridtopo/error.hpp"
#include "gridtopo/hssp.hpp"
#include "gridtopo/metrics.hpp"
#include "instances.hpp"

using namespace gridtopo;
using gridtopo::fixtures::make_sample;
using gridtopo::fixtures::ordered;

namespace {

MeasurementMatrix constant_readings(std::initializer_list<double> per_node, std::size_t steps) {
  MeasurementMatrix x;
  x.readings = DenseMatrix(per_node.size(), steps);
  std::size_t i = 0;
  for (double v : per_node) {
    for (std::size_t k = 0; k < steps; ++k) x.readings(i, k) = v;
    ++i;
  }
  return x;
}

std::vector<NodeId> sorted(std::span<const NodeId> nodes) {
  std::vector<NodeId> v(nodes.begin(), nodes.end());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST(Tolerance, ClosedForm) {
  HsspOptions o;
  EXPECT_EQ(tolerance_for(3, 0.0, o), 1e-9);
  EXPECT_NEAR(tolerance_for(3, 0.05, o), 0.3, 1e-15);
  o.tolerance.z = 2.0;
  EXPECT_NEAR(tolerance_for(8, 1.0, o), 6.0, 1e-15);
  EXPECT_THROW(tolerance_for(0, 1.0, o), InvalidArgument);
}

TEST(Tolerance, AdmitsTrueChildSetAtHighRate) {
  // Fraction of (parent, timestep) pairs where the noisy children sum lands
  // inside the window; z = 3 on a Gaussian residual admits about 99.7%.
  const HsspOptions o;
  std::size_t inside = 0;
  std::size_t total = 0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto s = make_sample(33, 10, 0.05, seed);
    for (NodeId p = 0; p < 33; ++p) {
      const auto kids = s.tree.children(p);
      if (kids.empty()) continue;
      for (std::size_t k = 0; k < 10; ++k) {
        double sum = 0.0;
        for (NodeId c : kids) sum += s.noisy.readings(c, k);
        inside += std::abs(sum - s.noisy.readings(p, k)) <= tolerance_for(kids.size(), 0.05, o);
        ++total;
      }
    }
  }
  EXPECT_GE(static_cast<double>(inside) / static_cast<double>(total), 0.99);
}

TEST(Partition, HierarchicalPoolsAreNextLayer) {
  const auto s = make_sample(13, 10, 0.0, 5);
  const auto part = partition_nodes(s.clean, 0.0, ordered(s.tree));
  const auto by_layer = s.tree.nodes_by_layer();
  ASSERT_EQ(part.parents.size(), part.pools.size());
  for (std::size_t i = 0; i < part.parents.size(); ++i) {
    const std::size_t l = s.tree.layer(part.parents[i]);
    ASSERT_LT(l + 1, by_layer.size());
    EXPECT_EQ(sorted(part.pools[i]), by_layer[l + 1]);
  }
  // Every node above the deepest layer is a candidate parent.
  std::size_t expected = 0;
  for (std::size_t l = 0; l + 1 < by_layer.size(); ++l) expected += by_layer[l].size();
  EXPECT_EQ(part.parents.size(), expected);
}

TEST(Partition, FlatDominance) {
  const auto x = constant_readings({7.0, 3.0}, 4);
  const auto part = partition_nodes(x, 0.0, HsspOptions{});
  ASSERT_EQ(part.parents.size(), 2u);
  EXPECT_EQ(part.pools[0], std::vector<NodeId>{1});
  EXPECT_TRUE(part.pools[1].empty());
}

TEST(Partition, FlatPruningShrinksPools) {
  int shrunk = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto s = make_sample(33, 10, 0.02, seed);
    const auto part = partition_nodes(s.noisy, 0.02, HsspOptions{});
    std::size_t total = 0;
    for (const auto& pool : part.pools) total += pool.size();
    shrunk += total < 33u * 32u;
  }
  EXPECT_GE(shrunk, 38);
}

TEST(Partition, PruningOffWithNegativeReadings) {
  const auto x = constant_readings({7.0, -3.0, 2.0}, 2);
  const auto part = partition_nodes(x, 0.0, HsspOptions{});
  for (const auto& pool : part.pools) EXPECT_EQ(pool.size(), 2u);
}

TEST(Partition, RejectsBadLayerLabels) {
  const auto s = make_sample(5, 2, 0.0, 1);
  HsspOptions o;
  o.hierarchy = std::vector<std::size_t>{0, 1};
  EXPECT_THROW(partition_nodes(s.clean, 0.0, o), InvalidArgument);
}

TEST(VoteSubsets, NoiselessStar) {
  const std::vector<Edge> edges{{0, 1}, {0, 2}, {0, 3}};
  const Topology t = Topology::from_edges(4, edges);
  const auto x = aggregate_readings(t, sample_loads(t, 10, 25, 50, 1), AggregationMode::kPureSum);
  const std::vector<NodeId> pool{1, 2, 3};
  for (auto tallying : {Tallying::kLeaders, Tallying::kEveryHit}) {
    HsspOptions o = ordered(t);
    o.tallying = tallying;
    const VoteTable table = vote_subsets(0, pool, x, 0.0, o);
    const auto win = table.winner();
    ASSERT_TRUE(win.has_value());
    EXPECT_EQ(win->members, pool);
    EXPECT_EQ(win->tally.votes, 10u);
  }
}

TEST(VoteSubsets, DecoyMatchesOneTimestepOnly) {
  // Parent 0 has children 1, 2; node 3 equals node 1 at timestep 0 only.
  MeasurementMatrix x;
  x.readings = DenseMatrix(4, 3);
  const double c1[] = {10, 12, 11};
  const double c2[] = {20, 21, 25};
  const double d[] = {10, 30, 40};
  for (std::size_t k = 0; k < 3; ++k) {
    x.readings(1, k) = c1[k];
    x.readings(2, k) = c2[k];
    x.readings(3, k) = d[k];
    x.readings(0, k) = c1[k] + c2[k];
  }
  HsspOptions o;
  o.tallying = Tallying::kEveryHit;
  const std::vector<NodeId> pool{1, 2, 3};
  const VoteTable table = vote_subsets(0, pool, x, 0.0, o);
  EXPECT_EQ(table.tally(std::vector<NodeId>{2, 3}).votes, 1u);
  EXPECT_EQ(table.tally(std::vector<NodeId>{1, 2}).votes, 3u);
  EXPECT_EQ(table.winner()->members, (std::vector<NodeId>{1, 2}));
}

TEST(VoteSubsets, ZeroReadingGivesEmptyTable) {
  const auto x = constant_readings({0.0, 5.0, 7.0}, 4);
  const std::vector<NodeId> pool{1, 2};
  for (auto tallying : {Tallying::kLeaders, Tallying::kEveryHit}) {
    HsspOptions o;
    o.tallying = tallying;
    EXPECT_TRUE(vote_subsets(0, pool, x, 0.0, o).empty());
  }
}

TEST(VoteSubsets, RejectsParentInPool) {
  const auto x = constant_readings({1.0, 1.0}, 1);
  const std::vector<NodeId> pool{0, 1};
  EXPECT_THROW(vote_subsets(0, pool, x, 0.0, HsspOptions{}), InvalidArgument);
}

TEST(VoteSubsets, VotesNeverExceedTimesteps) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = make_sample(33, 7, 2.0, seed);
    HsspOptions o = ordered(s.tree);
    o.tallying = Tallying::kEveryHit;
    const auto part = partition_nodes(s.noisy, 2.0, o);
    for (std::size_t i = 0; i < part.parents.size(); ++i) {
      for (const auto& e : vote_subsets(part.parents[i], part.pools[i], s.noisy, 2.0, o).entries()) {
        EXPECT_LE(e.tally.votes, 7u);
        EXPECT_TRUE(std::find(e.members.begin(), e.members.end(), part.parents[i]) ==
                    e.members.end());
      }
    }
  }
}

// The joint search keeps only the top-voted sets; its winner and tally must
// match those of plain per-timestep voting.
TEST(VoteSubsets, LeadersMatchEveryHit) {
  struct Case {
    std::size_t n;
    double sigma;
    bool hierarchy;
  };
  for (const Case c : {Case{13, 2.0, true}, Case{33, 2.0, true}, Case{33, 0.05, true},
                       Case{13, 0.02, false}, Case{13, 2.0, false}, Case{20, 0.5, false}}) {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      const auto s = make_sample(c.n, 10, c.sigma, seed);
      HsspOptions o = c.hierarchy ? ordered(s.tree) : HsspOptions{};
      const auto part = partition_nodes(s.noisy, c.sigma, o);
      for (std::size_t i = 0; i < part.parents.size(); ++i) {
        o.tallying = Tallying::kLeaders;
        const VoteTable leaders = vote_subsets(part.parents[i], part.pools[i], s.noisy, c.sigma, o);
        o.tallying = Tallying::kEveryHit;
        const VoteTable every = vote_subsets(part.parents[i], part.pools[i], s.noisy, c.sigma, o);
        ASSERT_EQ(leaders.winner(), every.winner())
            << "n=" << c.n << " sigma=" << c.sigma << " seed=" << seed;
        EXPECT_EQ(leaders.max_votes(), every.max_votes());
        for (const auto& e : leaders.entries()) {
          EXPECT_EQ(e.tally, every.tally(e.members));
          EXPECT_EQ(e.tally.votes, every.max_votes());
        }
      }
    }
  }
}

TEST(VoteSubsets, BackendsGiveSameTables) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = make_sample(33, 10, 0.5, seed);
    HsspOptions o = ordered(s.tree);
    o.tallying = Tallying::kEveryHit;
    const auto part = partition_nodes(s.noisy, 0.5, o);
    for (std::size_t i = 0; i < part.parents.size(); ++i) {
      if (part.pools[i].size() > 16) continue;
      o.backend = SolverBackend::kBranchBound;
      const auto bb = vote_subsets(part.parents[i], part.pools[i], s.noisy, 0.5, o).entries();
      o.backend = SolverBackend::kMeetMiddle;
      const auto mm = vote_subsets(part.parents[i], part.pools[i], s.noisy, 0.5, o).entries();
      o.backend = SolverBackend::kExhaustive;
      const auto ex = vote_subsets(part.parents[i], part.pools[i], s.noisy, 0.5, o).entries();
      EXPECT_EQ(bb, ex);
      EXPECT_EQ(mm, ex);
    }
  }
}

TEST(VoteSubsets, FiniteVoteLimitCountsBestHitsOnly) {
  const auto x = constant_readings({3.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0}, 2);
  const std::vector<NodeId> pool{1, 2, 3, 4, 5, 6};
  HsspOptions o;
  o.vote_limit = 4;
  const VoteTable table = vote_subsets(0, pool, x, 0.0, o);
  // 20 three-member sets tie; the four lexicographically first vote each step.
  EXPECT_EQ(table.size(), 4u);
  EXPECT_EQ(table.winner()->members, (std::vector<NodeId>{1, 2, 3}));
  EXPECT_EQ(table.winner()->tally.votes, 2u);
}

TEST(VoteTable, RecordMergeAndRank) {
  const std::vector<NodeId> pool{4, 7, 9};
  VoteTable a(1, pool);
  a.record(std::vector<NodeId>{4, 7}, 0.5);
  a.record(std::vector<NodeId>{9}, 0.1);
  VoteTable b(1, pool);
  b.record(std::vector<NodeId>{7, 4}, 0.25);
  a.merge(b);
  EXPECT_EQ(a.size(), 2u);
  EXPECT_EQ(a.tally(std::vector<NodeId>{4, 7}), (Tally{2, 0.75}));
  EXPECT_EQ(a.tally(std::vector<NodeId>{4}), Tally{});
  EXPECT_EQ(a.winner()->members, (std::vector<NodeId>{4, 7}));
  EXPECT_EQ(a.max_votes(), 2u);
  a.clear();
  EXPECT_TRUE(a.empty());
  EXPECT_FALSE(a.winner().has_value());
}

TEST(VoteTable, RejectsForeignMembers) {
  VoteTable t(0, {1, 2});
  EXPECT_THROW(t.record(std::vector<NodeId>{3}, 0.0), InvalidArgument);
  EXPECT_THROW(t.record(std::vector<NodeId>{}, 0.0), InvalidArgument);
  VoteTable other(0, {1, 3});
  EXPECT_THROW(t.merge(other), InvalidArgument);
}

TEST(VoteTable, RankingOrders) {
  const VoteEntry tight_pair{{1, 2}, {5, 0.1}};
  const VoteEntry loose_single{{3}, {5, 0.9}};
  const VoteEntry more_votes{{1, 2, 3}, {6, 9.0}};
  EXPECT_TRUE(ranks_before(tight_pair, loose_single, Ranking::kFitFirst));
  EXPECT_TRUE(ranks_before(loose_single, tight_pair, Ranking::kParsimonyFirst));
  EXPECT_TRUE(ranks_before(more_votes, tight_pair, Ranking::kFitFirst));
  EXPECT_TRUE(ranks_before(more_votes, loose_single, Ranking::kParsimonyFirst));
  const VoteEntry lex_a{{1, 5}, {5, 0.1}};
  const VoteEntry lex_b{{2, 3}, {5, 0.1}};
  EXPECT_TRUE(ranks_before(lex_a, lex_b, Ranking::kFitFirst));
  EXPECT_FALSE(ranks_before(lex_b, lex_a, Ranking::kParsimonyFirst));

  VoteTable table(0, {1, 2, 3}, Ranking::kParsimonyFirst);
  table.record(std::vector<NodeId>{1, 2}, 0.1);
  table.record(std::vector<NodeId>{3}, 0.9);
  EXPECT_EQ(table.winner()->members, std::vector<NodeId>{3});
  const auto entries = table.entries();
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].members, std::vector<NodeId>{3});
}

TEST(Reduce, SingleParentSingleSet) {
  VoteTable t(0, {1, 2, 3});
  t.record(std::vector<NodeId>{1, 2}, 0.0);
  const std::vector<VoteTable> tables{t};
  const auto est = reduce_redundant(tables, 4, HsspOptions{});
  ASSERT_EQ(est.edges.size(), 2u);
  EXPECT_TRUE(est.adjacency.connected(0, 1));
  EXPECT_TRUE(est.adjacency.connected(2, 0));
  EXPECT_FALSE(est.adjacency.connected(0, 3));
}

TEST(Reduce, ConflictGoesToHigherTally) {
  VoteTable strong(1, {3, 4});
  VoteTable weak(0, {3, 5});
  for (int i = 0; i < 9; ++i) strong.record(std::vector<NodeId>{3}, 0.0);
  for (int i = 0; i < 4; ++i) weak.record(std::vector<NodeId>{3, 5}, 0.0);
  const std::vector<VoteTable> tables{weak, strong};
  const auto est = reduce_redundant(tables, 6, HsspOptions{});
  EXPECT_TRUE(est.adjacency.connected(1, 3));
  EXPECT_FALSE(est.adjacency.connected(0, 3));
  EXPECT_TRUE(est.adjacency.connected(0, 5));
  EXPECT_EQ(est.edges.front().votes, 9u);
}

TEST(Reduce, TiesGoToLowerParentIndex) {
  VoteTable a(2, {3});
  VoteTable b(1, {3});
  a.record(std::vector<NodeId>{3}, 0.0);
  b.record(std::vector<NodeId>{3}, 0.0);
  const std::vector<VoteTable> tables{a, b};
  const auto est = reduce_redundant(tables, 4, HsspOptions{});
  ASSERT_EQ(est.edges.size(), 1u);
  EXPECT_EQ(est.edges[0].parent, 1u);
}

TEST(Reduce, DropsClaimsThatSkipLayers) {
  HsspOptions o;
  o.hierarchy = std::vector<std::size_t>{0, 1, 2};
  VoteTable t(0, {1, 2});
  t.record(std::vector<NodeId>{1, 2}, 0.0);
  const std::vector<VoteTable> tables{t};
  const auto est = reduce_redundant(tables, 3, o);
  EXPECT_TRUE(est.adjacency.connected(0, 1));
  EXPECT_FALSE(est.adjacency.connected(0, 2));
}

TEST(Identify, SingleNode) {
  MeasurementMatrix x;
  x.readings = DenseMatrix(1, 3, 5.0);
  const auto est = identify_topology(x, 0.0, HsspOptions{});
  EXPECT_TRUE(est.edges.empty());
  EXPECT_EQ(est.adjacency.size(), 1u);
}

TEST(Identify, NoiselessExactAcrossSizes) {
  for (std::size_t n : {2u, 5u, 13u, 33u, 63u}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto s = make_sample(n, 4, 0.0, seed);
      const auto est = identify_topology(s.clean, 0.0, ordered(s.tree));
      EXPECT_EQ(est.adjacency, adjacency_matrix(s.tree)) << "n=" << n << " seed=" << seed;
      EXPECT_TRUE(est.adjacency.symmetric());
      EXPECT_TRUE(est.adjacency.zero_diagonal());
    }
  }
}

TEST(Identify, ThirteenNodesLowNoise) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto s = make_sample(13, 10, 0.01, seed);
    const auto est = identify_topology(s.noisy, 0.01, ordered(s.tree));
    EXPECT_EQ(compare(est.adjacency, adjacency_matrix(s.tree)).edge_accuracy, 1.0);
  }
}

TEST(Identify, ThirtyThreeNodesLowNoiseMean) {
  double total = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto s = make_sample(33, 10, 0.01, seed);
    const auto est = identify_topology(s.noisy, 0.01, ordered(s.tree));
    total += compare(est.adjacency, adjacency_matrix(s.tree)).edge_accuracy;
  }
  EXPECT_GE(total / 20.0, 0.93);
}

TEST(Identify, HierarchyHelpsFlatMode) {
  double on = 0.0;
  double off = 0.0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto s = make_sample(13, 10, 0.02, seed);
    on += compare(identify_topology(s.noisy, 0.02, ordered(s.tree)).adjacency,
                  adjacency_matrix(s.tree)).edge_accuracy;
    off += compare(identify_topology(s.noisy, 0.02, HsspOptions{}).adjacency,
                   adjacency_matrix(s.tree)).edge_accuracy;
  }
  EXPECT_GE(on, off);
}

TEST(Identify, OwnLoadMode) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = make_sample(33, 10, 0.0, seed, AggregationMode::kOwnLoad);
    HsspOptions o = ordered(s.tree);
    o.mode = AggregationMode::kOwnLoad;
    EXPECT_EQ(identify_topology(s.clean, 0.0, o).adjacency, adjacency_matrix(s.tree));
    o.hierarchy.reset();
    EXPECT_EQ(identify_topology(s.clean, 0.0, o).adjacency, adjacency_matrix(s.tree));
  }
}

TEST(Identify, OwnLoadNeedsIndividualChannel) {
  auto s = make_sample(13, 4, 0.0, 1, AggregationMode::kOwnLoad);
  s.clean.individual.reset();
  HsspOptions o;
  o.mode = AggregationMode::kOwnLoad;
  EXPECT_THROW(identify_topology(s.clean, 0.0, o), InvalidArgument);
}

TEST(Identify, MultiplicativeNoise) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto s = make_sample(33, 10, 0.0, seed);
    s.noisy = inject_noise(s.clean, {0.002, NoiseMode::kMultiplicative, seed});
    HsspOptions o = ordered(s.tree);
    o.noise_mode = NoiseMode::kMultiplicative;
    const auto est = identify_topology(s.noisy, 0.002, o);
    EXPECT_GE(compare(est.adjacency, adjacency_matrix(s.tree)).edge_accuracy, 0.9);
  }
}

TEST(Identify, ThreadCountDoesNotChangeResult) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto s = make_sample(63, 10, 2.0, seed);
    HsspOptions o = ordered(s.tree);
    const auto one = identify_topology(s.noisy, 2.0, o);
    o.threads = 4;
    const auto four = identify_topology(s.noisy, 2.0, o);
    EXPECT_EQ(one.edges, four.edges);
  }
}

TEST(Identify, ScaleEquivariance) {
  // Powers of two scale doubles exactly.
  const double c = 4.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = make_sample(33, 10, 0.5, seed);
    MeasurementMatrix scaled = s.noisy;
    for (NodeId v = 0; v < 33; ++v) {
      for (double& r : scaled.readings.row(v)) r *= c;
    }
    HsspOptions o = ordered(s.tree);
    const auto base = identify_topology(s.noisy, 0.5, o);
    o.tolerance.floor *= c;
    const auto big = identify_topology(scaled, 0.5 * c, o);
    EXPECT_EQ(base.edges, big.edges);
  }
}

TEST(Backend, NamesRoundTrip) {
  for (auto b : {SolverBackend::kBranchBound, SolverBackend::kMeetMiddle, SolverBackend::kExhaustive}) {
    EXPECT_EQ(parse_backend(to_string(b)), b);
  }
  EXPECT_THROW(parse_backend("greedy"), InvalidArgument);
}
