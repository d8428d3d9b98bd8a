#include "gridtopo/topology.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <utility>

#include "gridtopo/error.hpp"
#include "gridtopo/random.hpp"

namespace gridtopo {

namespace {

RadialVerdict fail(RadialIssue issue, std::string detail) {
  return RadialVerdict{issue, std::move(detail)};
}

std::string link_text(NodeId a, NodeId b) {
  return std::to_string(a) + "-" + std::to_string(b);
}

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[b] = a;
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

// BFS depth from root over the undirected links. Assumes a tree.
std::vector<std::size_t> bfs_depth(std::size_t n, std::span<const Edge> edges,
                                   NodeId root) {
  std::vector<std::vector<NodeId>> nbrs(n);
  for (const Edge& e : edges) {
    nbrs[e.parent].push_back(e.child);
    nbrs[e.child].push_back(e.parent);
  }
  constexpr auto kUnseen = static_cast<std::size_t>(-1);
  std::vector<std::size_t> depth(n, kUnseen);
  std::queue<NodeId> frontier;
  depth[root] = 0;
  frontier.push(root);
  while (!frontier.empty()) {
    NodeId v = frontier.front();
    frontier.pop();
    for (NodeId w : nbrs[v]) {
      if (depth[w] == kUnseen) {
        depth[w] = depth[v] + 1;
        frontier.push(w);
      }
    }
  }
  return depth;
}

}  // namespace

std::string_view to_string(RadialIssue issue) {
  switch (issue) {
    case RadialIssue::kNone: return "ok";
    case RadialIssue::kEmpty: return "empty graph";
    case RadialIssue::kNodeOutOfRange: return "node index out of range";
    case RadialIssue::kSelfLoop: return "self loop";
    case RadialIssue::kDuplicateEdge: return "duplicate edge";
    case RadialIssue::kCycle: return "cycle";
    case RadialIssue::kDisconnected: return "disconnected";
    case RadialIssue::kLayerMismatch: return "layer mismatch";
  }
  return "unknown";
}

RadialVerdict validate_radial(std::size_t n, std::span<const Edge> edges,
                              NodeId root, std::span<const std::size_t> layers) {
  if (n == 0) return fail(RadialIssue::kEmpty, "no nodes");
  if (root >= n) {
    return fail(RadialIssue::kNodeOutOfRange, "root " + std::to_string(root));
  }

  std::set<std::pair<NodeId, NodeId>> seen;
  DisjointSets components(n);
  std::size_t merges = 0;
  for (const Edge& e : edges) {
    if (e.parent >= n || e.child >= n) {
      return fail(RadialIssue::kNodeOutOfRange, link_text(e.parent, e.child));
    }
    if (e.parent == e.child) {
      return fail(RadialIssue::kSelfLoop, "node " + std::to_string(e.parent));
    }
    auto key = std::minmax(e.parent, e.child);
    if (!seen.emplace(key.first, key.second).second) {
      return fail(RadialIssue::kDuplicateEdge, link_text(e.parent, e.child));
    }
    if (!components.unite(e.parent, e.child)) {
      return fail(RadialIssue::kCycle, "closed by " + link_text(e.parent, e.child));
    }
    ++merges;
  }
  if (merges != n - 1) {
    for (NodeId v = 0; v < n; ++v) {
      if (components.find(v) != components.find(root)) {
        return fail(RadialIssue::kDisconnected,
                    "node " + std::to_string(v) + " unreachable from root");
      }
    }
  }

  const auto depth = bfs_depth(n, edges, root);
  for (const Edge& e : edges) {
    if (depth[e.child] != depth[e.parent] + 1) {
      return fail(RadialIssue::kLayerMismatch,
                  "link " + link_text(e.parent, e.child) + " points toward the root");
    }
  }
  if (!layers.empty()) {
    if (layers.size() != n) {
      return fail(RadialIssue::kLayerMismatch,
                  std::to_string(layers.size()) + " labels for " +
                      std::to_string(n) + " nodes");
    }
    for (NodeId v = 0; v < n; ++v) {
      if (layers[v] != depth[v]) {
        return fail(RadialIssue::kLayerMismatch,
                    "node " + std::to_string(v) + " labelled " +
                        std::to_string(layers[v]) + ", depth " +
                        std::to_string(depth[v]));
      }
    }
  }
  return {};
}

RadialVerdict validate_radial(const Topology& topology) {
  const auto edges = topology.edges();
  return validate_radial(topology.size(), edges, topology.root(), topology.layers());
}

Topology::Topology() : parent_{kNoParent}, children_(1), layer_{0} {}

Topology Topology::from_edges(std::size_t n, std::span<const Edge> edges, NodeId root) {
  if (auto verdict = validate_radial(n, edges, root); !verdict) {
    throw StructureError(std::string(to_string(verdict.issue)) + ": " + verdict.detail);
  }
  Topology t;
  t.root_ = root;
  t.parent_.assign(n, kNoParent);
  t.children_.assign(n, {});
  for (const Edge& e : edges) {
    t.parent_[e.child] = e.parent;
    t.children_[e.parent].push_back(e.child);
  }
  for (auto& kids : t.children_) std::sort(kids.begin(), kids.end());
  t.layer_ = bfs_depth(n, edges, root);
  return t;
}

Topology Topology::from_parents(std::span<const std::optional<NodeId>> parent) {
  std::optional<NodeId> root;
  std::vector<Edge> edges;
  for (NodeId v = 0; v < parent.size(); ++v) {
    if (parent[v]) {
      edges.push_back({*parent[v], v});
    } else if (root) {
      throw StructureError("nodes " + std::to_string(*root) + " and " +
                           std::to_string(v) + " both lack a parent");
    } else {
      root = v;
    }
  }
  if (!root) throw StructureError("no root: every node has a parent");
  return from_edges(parent.size(), edges, *root);
}

std::optional<NodeId> Topology::parent_of(NodeId node) const {
  NodeId p = parent_.at(node);
  if (p == kNoParent) return std::nullopt;
  return p;
}

std::span<const NodeId> Topology::children(NodeId node) const {
  return children_.at(node);
}

std::size_t Topology::depth() const noexcept {
  return *std::max_element(layer_.begin(), layer_.end());
}

std::vector<Edge> Topology::edges() const {
  std::vector<Edge> out;
  out.reserve(size() - 1);
  for (NodeId v = 0; v < size(); ++v) {
    if (parent_[v] != kNoParent) out.push_back({parent_[v], v});
  }
  return out;
}

std::vector<std::vector<NodeId>> Topology::nodes_by_layer() const {
  std::vector<std::vector<NodeId>> out(depth() + 1);
  for (NodeId v = 0; v < size(); ++v) out[layer_[v]].push_back(v);
  return out;
}

std::vector<NodeId> Topology::post_order() const {
  std::vector<NodeId> order;
  order.reserve(size());
  std::vector<std::pair<NodeId, std::size_t>> stack{{root_, 0}};
  while (!stack.empty()) {
    auto& [v, next] = stack.back();
    if (next < children_[v].size()) {
      NodeId c = children_[v][next++];
      stack.emplace_back(c, 0);
    } else {
      order.push_back(v);
      stack.pop_back();
    }
  }
  return order;
}

void AdjacencyMatrix::connect(NodeId a, NodeId b) {
  if (a == b) throw InvalidArgument("self link on node " + std::to_string(a));
  cells_.at(a * n_ + b) = 1;
  cells_.at(b * n_ + a) = 1;
}

std::size_t AdjacencyMatrix::ones() const noexcept {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), 1));
}

bool AdjacencyMatrix::symmetric() const noexcept {
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      if (cells_[i * n_ + j] != cells_[j * n_ + i]) return false;
    }
  }
  return true;
}

bool AdjacencyMatrix::zero_diagonal() const noexcept {
  for (std::size_t i = 0; i < n_; ++i) {
    if (cells_[i * n_ + i] != 0) return false;
  }
  return true;
}

std::vector<Edge> AdjacencyMatrix::upper_edges() const {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      if (cells_[i * n_ + j] != 0) out.push_back({i, j});
    }
  }
  return out;
}

AdjacencyMatrix adjacency_matrix(const Topology& topology) {
  AdjacencyMatrix m(topology.size());
  for (const Edge& e : topology.edges()) m.connect(e.parent, e.child);
  return m;
}

Topology random_radial_topology(std::size_t n, std::size_t branching,
                                std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("random_radial_topology: n must be >= 1");
  if (branching == 0) throw InvalidArgument("random_radial_topology: branching must be >= 1");

  Rng rng(seed);
  // Build over construction order, then relabel.
  std::vector<std::size_t> parent(n, 0);
  std::vector<std::size_t> child_count(n, 0);
  std::vector<std::size_t> open{0};  // nodes with spare capacity
  for (std::size_t v = 1; v < n; ++v) {
    std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
    const std::size_t slot = pick(rng);
    const std::size_t p = open[slot];
    parent[v] = p;
    if (++child_count[p] == branching) {
      open[slot] = open.back();
      open.pop_back();
    }
    open.push_back(v);
  }

  std::vector<NodeId> label(n);
  std::iota(label.begin(), label.end(), NodeId{0});
  std::shuffle(label.begin() + 1, label.end(), rng);

  std::vector<Edge> edges;
  edges.reserve(n - 1);
  for (std::size_t v = 1; v < n; ++v) edges.push_back({label[parent[v]], label[v]});
  std::sort(edges.begin(), edges.end(),
            [](const Edge& a, const Edge& b) { return a.child < b.child; });
  return Topology::from_edges(n, edges, 0);
}

Topology load_topology(std::string_view text) {
  std::vector<Edge> edges;
  std::size_t n = 1;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string a, b, extra;
    if (!(fields >> a)) continue;
    if (!(fields >> b) || (fields >> extra)) {
      throw ParseError(line_no, "expected \"parent child\"");
    }
    auto parse_index = [&](const std::string& s) {
      NodeId v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError(line_no, "not a node index: '" + s + "'");
      }
      return v;
    };
    Edge e{parse_index(a), parse_index(b)};
    n = std::max({n, e.parent + 1, e.child + 1});
    edges.push_back(e);
  }
  return Topology::from_edges(n, edges, 0);
}

std::string write_topology(const Topology& topology) {
  std::ostringstream out;
  out << "# parent child (" << topology.size() << " nodes, root "
      << topology.root() << ")\n";
  for (const Edge& e : topology.edges()) out << e.parent << ' ' << e.child << '\n';
  return out.str();
}

}  // namespace gridtopo
