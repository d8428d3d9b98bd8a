#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gridtopo/measurement.hpp"
#include "gridtopo/topology.hpp"

namespace gridtopo {

inline constexpr std::size_t kOracleNodeLimit = 8;

struct OracleResult {
  Topology best_tree;
  // Sum over internal nodes and timesteps of |reading - sum of child readings|, kW.
  double residual = 0.0;
  std::size_t trees_visited = 0;
};

// Labeled tree for a Prüfer sequence over nodes [0, n), rooted at `root`.
// The sequence has n - 2 entries (empty for n <= 2).
Topology prufer_decode(std::span<const NodeId> sequence, std::size_t n, NodeId root);

// Power-balance residual of `tree` against the readings.
double balance_residual(const Topology& tree, const DenseMatrix& readings);

// Scores every labeled tree on n nodes rooted at `root` (n^(n-2) of them,
// enumerated through Prüfer sequences) and keeps the smallest residual; ties
// go to the lexicographically smallest parent vector. With `layers`, trees
// whose depths differ from the labels are skipped. Throws CapacityError for
// n > kOracleNodeLimit.
OracleResult exhaustive_identify(const MeasurementMatrix& x, std::size_t n, NodeId root = 0,
                                 std::span<const std::size_t> layers = {});

}  // namespace gridtopo
