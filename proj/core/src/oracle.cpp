#include "gridtopo/oracle.hpp"

#include <cmath>
#include <optional>
#include <string>

#include "gridtopo/error.hpp"

namespace gridtopo {

namespace {

constexpr NodeId kRootMark = static_cast<NodeId>(-1);

// parent[] of the tree encoded by `sequence`, oriented away from `root`.
std::vector<NodeId> decode_parents(std::span<const NodeId> sequence, std::size_t n,
                                   NodeId root) {
  std::vector<std::vector<NodeId>> nbrs(n);
  auto link = [&](NodeId a, NodeId b) {
    nbrs[a].push_back(b);
    nbrs[b].push_back(a);
  };
  if (n == 2) link(0, 1);
  if (n > 2) {
    std::vector<std::size_t> degree(n, 1);
    for (NodeId v : sequence) ++degree[v];
    for (NodeId v : sequence) {
      NodeId leaf = 0;
      while (degree[leaf] != 1) ++leaf;
      link(leaf, v);
      --degree[leaf];
      --degree[v];
    }
    NodeId u = n;
    for (NodeId v = 0; v < n; ++v) {
      if (degree[v] == 1) {
        if (u == n) {
          u = v;
        } else {
          link(u, v);
          break;
        }
      }
    }
  }

  std::vector<NodeId> parent(n, kRootMark);
  std::vector<NodeId> stack{root};
  std::vector<bool> seen(n, false);
  seen[root] = true;
  while (!stack.empty()) {
    NodeId v = stack.back();
    stack.pop_back();
    for (NodeId w : nbrs[v]) {
      if (!seen[w]) {
        seen[w] = true;
        parent[w] = v;
        stack.push_back(w);
      }
    }
  }
  return parent;
}

Topology to_topology(const std::vector<NodeId>& parent) {
  std::vector<std::optional<NodeId>> links(parent.size());
  for (NodeId v = 0; v < parent.size(); ++v) {
    if (parent[v] != kRootMark) links[v] = parent[v];
  }
  return Topology::from_parents(links);
}

}  // namespace

Topology prufer_decode(std::span<const NodeId> sequence, std::size_t n, NodeId root) {
  if (n == 0 || root >= n) throw InvalidArgument("prufer_decode: bad node count or root");
  if (sequence.size() != (n >= 2 ? n - 2 : 0)) {
    throw InvalidArgument("prufer_decode: sequence length must be n - 2");
  }
  for (NodeId v : sequence) {
    if (v >= n) throw InvalidArgument("prufer_decode: label " + std::to_string(v) + " out of range");
  }
  return to_topology(decode_parents(sequence, n, root));
}

double balance_residual(const Topology& tree, const DenseMatrix& readings) {
  double residual = 0.0;
  for (NodeId v = 0; v < tree.size(); ++v) {
    const auto kids = tree.children(v);
    if (kids.empty()) continue;
    for (std::size_t k = 0; k < readings.cols(); ++k) {
      double sum = 0.0;
      for (NodeId c : kids) sum += readings(c, k);
      residual += std::abs(readings(v, k) - sum);
    }
  }
  return residual;
}

OracleResult exhaustive_identify(const MeasurementMatrix& x, std::size_t n, NodeId root,
                                 std::span<const std::size_t> layers) {
  if (n > kOracleNodeLimit) {
    throw CapacityError("exhaustive_identify: " + std::to_string(n) + " nodes exceeds " +
                        std::to_string(kOracleNodeLimit));
  }
  if (n == 0 || root >= n) throw InvalidArgument("exhaustive_identify: bad node count or root");
  if (!x.has_readings() || x.readings.rows() != n) {
    throw InvalidArgument("exhaustive_identify: readings must have one row per node");
  }
  if (!layers.empty() && layers.size() != n) {
    throw InvalidArgument("exhaustive_identify: layer labels must cover every node");
  }

  const DenseMatrix& r = x.readings;
  const std::size_t length = n >= 2 ? n - 2 : 0;
  std::vector<NodeId> sequence(length, 0);
  std::vector<std::vector<NodeId>> children(n);

  std::optional<std::vector<NodeId>> best;
  double best_residual = 0.0;
  std::size_t visited = 0;

  while (true) {
    const auto parent = decode_parents(sequence, n, root);
    ++visited;

    bool admissible = true;
    if (!layers.empty()) {
      // Depth check along parent links; n is tiny.
      for (NodeId v = 0; v < n && admissible; ++v) {
        std::size_t depth = 0;
        for (NodeId u = v; parent[u] != kRootMark; u = parent[u]) ++depth;
        admissible = depth == layers[v];
      }
    }

    if (admissible) {
      for (auto& c : children) c.clear();
      for (NodeId v = 0; v < n; ++v) {
        if (parent[v] != kRootMark) children[parent[v]].push_back(v);
      }
      double residual = 0.0;
      for (NodeId v = 0; v < n; ++v) {
        if (children[v].empty()) continue;
        for (std::size_t k = 0; k < r.cols(); ++k) {
          double sum = 0.0;
          for (NodeId c : children[v]) sum += r(c, k);
          residual += std::abs(r(v, k) - sum);
        }
      }
      if (!best || residual < best_residual ||
          (residual == best_residual && parent < *best)) {
        best = parent;
        best_residual = residual;
      }
    }

    // Next sequence in base-n counting order.
    std::size_t pos = 0;
    while (pos < length && ++sequence[pos] == n) sequence[pos++] = 0;
    if (pos == length) break;
  }

  if (!best) throw InvalidArgument("exhaustive_identify: no tree matches the layer labels");
  return OracleResult{to_topology(*best), best_residual, visited};
}

}  // namespace gridtopo
