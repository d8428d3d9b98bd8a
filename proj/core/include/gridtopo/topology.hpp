#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gridtopo {

using NodeId = std::size_t;

// A directed parent -> child link of a radial feeder.
struct Edge {
  NodeId parent = 0;
  NodeId child = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class RadialIssue {
  kNone,
  kEmpty,
  kNodeOutOfRange,
  kSelfLoop,
  kDuplicateEdge,
  kCycle,
  kDisconnected,
  kLayerMismatch,
};

std::string_view to_string(RadialIssue issue);

// Result of checking a graph against the radial-tree invariants. `detail`
// names the offending nodes when the check fails.
struct RadialVerdict {
  RadialIssue issue = RadialIssue::kNone;
  std::string detail;

  bool ok() const noexcept { return issue == RadialIssue::kNone; }
  explicit operator bool() const noexcept { return ok(); }
};

// Checks that `edges` form a tree over nodes [0, n) rooted at `root`.
// Edges are read as (parent, child); a link listed against the direction of
// the root is reported as a layer mismatch. When `layers` is non-empty it must
// equal the depth of every node below the root.
RadialVerdict validate_radial(std::size_t n, std::span<const Edge> edges,
                              NodeId root = 0,
                              std::span<const std::size_t> layers = {});

class Topology;
RadialVerdict validate_radial(const Topology& topology);

// Rooted radial tree with per-node layer labels (root layer 0). Immutable
// once built; every constructor path validates.
class Topology {
 public:
  // Single-node tree.
  Topology();

  // Builds from (parent, child) links. Throws StructureError with the
  // diagnosis from validate_radial when the links do not form a tree.
  static Topology from_edges(std::size_t n, std::span<const Edge> edges,
                             NodeId root = 0);

  // parent[v] is v's parent; parent[root] must be nullopt.
  static Topology from_parents(std::span<const std::optional<NodeId>> parent);

  std::size_t size() const noexcept { return parent_.size(); }
  NodeId root() const noexcept { return root_; }
  std::optional<NodeId> parent_of(NodeId node) const;
  std::span<const NodeId> children(NodeId node) const;
  std::size_t layer(NodeId node) const { return layer_.at(node); }
  std::span<const std::size_t> layers() const noexcept { return layer_; }
  std::size_t depth() const noexcept;
  bool is_leaf(NodeId node) const { return children(node).empty(); }

  // Links sorted by child index.
  std::vector<Edge> edges() const;

  // Nodes grouped by layer, each group ascending.
  std::vector<std::vector<NodeId>> nodes_by_layer() const;

  // Children always precede their parent.
  std::vector<NodeId> post_order() const;

  friend bool operator==(const Topology& a, const Topology& b) {
    return a.root_ == b.root_ && a.parent_ == b.parent_;
  }

 private:
  static constexpr NodeId kNoParent = static_cast<NodeId>(-1);

  NodeId root_ = 0;
  std::vector<NodeId> parent_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<std::size_t> layer_;
};

// Symmetric 0/1 connectivity matrix with zero diagonal.
class AdjacencyMatrix {
 public:
  explicit AdjacencyMatrix(std::size_t n = 0) : n_(n), cells_(n * n, 0) {}

  std::size_t size() const noexcept { return n_; }
  bool connected(NodeId a, NodeId b) const { return cells_.at(a * n_ + b) != 0; }
  std::uint8_t at(NodeId a, NodeId b) const { return cells_.at(a * n_ + b); }

  // Sets both (a, b) and (b, a). Self links are rejected.
  void connect(NodeId a, NodeId b);

  std::size_t ones() const noexcept;
  std::size_t edge_count() const noexcept { return ones() / 2; }
  bool symmetric() const noexcept;
  bool zero_diagonal() const noexcept;

  // Undirected links as (low, high) pairs from the upper triangle.
  std::vector<Edge> upper_edges() const;

  friend bool operator==(const AdjacencyMatrix&, const AdjacencyMatrix&) = default;

 private:
  std::size_t n_;
  std::vector<std::uint8_t> cells_;
};

AdjacencyMatrix adjacency_matrix(const Topology& topology);

// Layered random attachment: each new node joins a uniformly chosen existing
// node that still has fewer than `branching` children. Non-root labels are
// then shuffled so indices carry no depth information. Root is node 0.
Topology random_radial_topology(std::size_t n, std::size_t branching,
                                std::uint64_t seed);

// Edge-list text: one "parent child" pair per line, '#' starts a comment.
// Node count is one past the largest index; node 0 is the root.
Topology load_topology(std::string_view text);
std::string write_topology(const Topology& topology);

}  // namespace gridtopo
