#include "gridtopo/hssp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "gridtopo/detail/parallel.hpp"
#include "gridtopo/error.hpp"
#include "gridtopo/random.hpp"
#include "subset_search.hpp"

namespace gridtopo {

std::string_view to_string(SolverBackend backend) {
  switch (backend) {
    case SolverBackend::kBranchBound: return "branch_bound";
    case SolverBackend::kMeetMiddle: return "meet_middle";
    case SolverBackend::kExhaustive: return "exhaustive";
  }
  return "unknown";
}

SolverBackend parse_backend(std::string_view text) {
  if (text == "branch_bound") return SolverBackend::kBranchBound;
  if (text == "meet_middle") return SolverBackend::kMeetMiddle;
  if (text == "exhaustive") return SolverBackend::kExhaustive;
  throw InvalidArgument("unknown solver backend '" + std::string(text) +
                        "' (expected branch_bound, meet_middle or exhaustive)");
}

namespace {

std::vector<SubsetHit> solve(const SubsetQuery& query, SolverBackend backend) {
  switch (backend) {
    case SolverBackend::kBranchBound: return solve_branch_bound(query);
    case SolverBackend::kMeetMiddle: return solve_meet_middle(query);
    case SolverBackend::kExhaustive: return enumerate_exhaustive(query);
  }
  return {};
}

void check_shape(const MeasurementMatrix& x, const HsspOptions& options) {
  if (!x.has_readings()) throw InvalidArgument("identify: measurement readings are missing");
  if (options.mode == AggregationMode::kOwnLoad) {
    if (!x.individual) {
      throw InvalidArgument(
          "own_load identification needs the individual consumption channel");
    }
    if (x.individual->rows() != x.readings.rows() ||
        x.individual->cols() != x.readings.cols()) {
      throw InvalidArgument("individual channel shape differs from readings");
    }
  }
  if (options.hierarchy && options.hierarchy->size() != x.nodes()) {
    throw InvalidArgument("hierarchy has " + std::to_string(options.hierarchy->size()) +
                          " layer labels for " + std::to_string(x.nodes()) + " nodes");
  }
  if (!(options.tolerance.z >= 0.0) || !(options.tolerance.floor >= 0.0)) {
    throw InvalidArgument("tolerance policy needs z >= 0 and floor >= 0");
  }
  if (options.max_children == 0 || options.vote_limit == 0) {
    throw InvalidArgument("max_children and vote_limit must be >= 1");
  }
}

double effective_sigma(double sigma, double reference, const HsspOptions& options) {
  return options.noise_mode == NoiseMode::kAdditive ? sigma : sigma * std::abs(reference);
}

}  // namespace

namespace {

// Compares everything after votes; returns <0, 0 or >0.
int compare_fit(const Tally& a, std::size_t size_a, const Tally& b, std::size_t size_b,
                Ranking ranking) {
  const auto by_deviation = [&] {
    if (a.deviation_sum != b.deviation_sum) return a.deviation_sum < b.deviation_sum ? -1 : 1;
    return 0;
  };
  const auto by_size = [&] {
    if (size_a != size_b) return size_a < size_b ? -1 : 1;
    return 0;
  };
  if (ranking == Ranking::kFitFirst) {
    if (int c = by_deviation()) return c;
    return by_size();
  }
  if (int c = by_size()) return c;
  return by_deviation();
}

}  // namespace

bool ranks_before(const VoteEntry& a, const VoteEntry& b, Ranking ranking) {
  if (a.tally.votes != b.tally.votes) return a.tally.votes > b.tally.votes;
  if (int c = compare_fit(a.tally, a.members.size(), b.tally, b.members.size(), ranking)) {
    return c < 0;
  }
  return a.members < b.members;
}

VoteTable::VoteTable(NodeId parent, std::vector<NodeId> pool, Ranking ranking)
    : parent_(parent), pool_(std::move(pool)), ranking_(ranking), words_(std::max<std::size_t>(1, (pool_.size() + 63) / 64)) {}

std::size_t VoteTable::find_slot(std::span<const std::uint64_t> mask) const {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t w : mask) h = mix64(h ^ w);
  const std::size_t capacity = occupied_.size();
  for (std::size_t slot = h & (capacity - 1);; slot = (slot + 1) & (capacity - 1)) {
    if (!occupied_[slot] || std::equal(mask.begin(), mask.end(), keys_.begin() + static_cast<std::ptrdiff_t>(slot * words_))) {
      return slot;
    }
  }
}

void VoteTable::grow() {
  const std::size_t capacity = occupied_.empty() ? 64 : occupied_.size() * 2;
  std::vector<std::uint64_t> keys = std::move(keys_);
  std::vector<Tally> tallies = std::move(tallies_);
  std::vector<std::uint8_t> occupied = std::move(occupied_);
  keys_.assign(capacity * words_, 0);
  tallies_.assign(capacity, Tally{});
  occupied_.assign(capacity, 0);
  for (std::size_t old = 0; old < occupied.size(); ++old) {
    if (!occupied[old]) continue;
    std::span<const std::uint64_t> mask(keys.data() + old * words_, words_);
    const std::size_t slot = find_slot(mask);
    std::copy(mask.begin(), mask.end(), keys_.begin() + static_cast<std::ptrdiff_t>(slot * words_));
    tallies_[slot] = tallies[old];
    occupied_[slot] = 1;
  }
}

void VoteTable::add(std::span<const std::uint64_t> mask, const Tally& tally) {
  if (mask.size() != words_) throw InvalidArgument("VoteTable: mask width mismatch");
  if (2 * (used_ + 1) > occupied_.size()) grow();
  const std::size_t slot = find_slot(mask);
  if (!occupied_[slot]) {
    std::copy(mask.begin(), mask.end(), keys_.begin() + static_cast<std::ptrdiff_t>(slot * words_));
    occupied_[slot] = 1;
    ++used_;
  }
  tallies_[slot].votes += tally.votes;
  tallies_[slot].deviation_sum += tally.deviation_sum;
}

void VoteTable::clear() {
  keys_.clear();
  tallies_.clear();
  occupied_.clear();
  used_ = 0;
}

std::size_t VoteTable::max_votes() const noexcept {
  std::size_t best = 0;
  for (std::size_t slot = 0; slot < occupied_.size(); ++slot) {
    if (occupied_[slot]) best = std::max(best, tallies_[slot].votes);
  }
  return best;
}

std::vector<std::uint64_t> VoteTable::mask_of(std::span<const NodeId> members) const {
  if (members.empty()) throw InvalidArgument("VoteTable: empty child set");
  std::vector<std::uint64_t> mask(words_, 0);
  for (NodeId m : members) {
    const auto it = std::find(pool_.begin(), pool_.end(), m);
    if (it == pool_.end()) {
      throw InvalidArgument("VoteTable: node " + std::to_string(m) + " is not in the pool of " +
                            std::to_string(parent_));
    }
    const auto pos = static_cast<std::size_t>(it - pool_.begin());
    mask[pos >> 6] |= std::uint64_t{1} << (pos & 63);
  }
  return mask;
}

std::vector<NodeId> VoteTable::members_of(std::size_t slot) const {
  std::vector<NodeId> members;
  const auto mask = key(slot);
  for (std::size_t w = 0; w < mask.size(); ++w) {
    for (std::uint64_t bits = mask[w]; bits != 0; bits &= bits - 1) {
      members.push_back(pool_[w * 64 + static_cast<std::size_t>(std::countr_zero(bits))]);
    }
  }
  std::sort(members.begin(), members.end());
  return members;
}

void VoteTable::record(std::span<const NodeId> members, double deviation) {
  add(mask_of(members), Tally{1, deviation});
}

void VoteTable::merge(const VoteTable& other) {
  if (other.parent_ != parent_ || other.pool_ != pool_) {
    throw InvalidArgument("VoteTable::merge: tables describe different queries");
  }
  for (std::size_t slot = 0; slot < other.occupied_.size(); ++slot) {
    if (!other.occupied_[slot]) continue;
    if (2 * (used_ + 1) > occupied_.size()) grow();
    const auto mask = other.key(slot);
    const std::size_t mine = find_slot(mask);
    if (!occupied_[mine]) {
      std::copy(mask.begin(), mask.end(), keys_.begin() + static_cast<std::ptrdiff_t>(mine * words_));
      occupied_[mine] = 1;
      ++used_;
    }
    tallies_[mine].votes += other.tallies_[slot].votes;
    tallies_[mine].deviation_sum += other.tallies_[slot].deviation_sum;
  }
}

Tally VoteTable::tally(std::span<const NodeId> members) const {
  if (used_ == 0) return {};
  const auto mask = mask_of(members);
  const std::size_t slot = find_slot(mask);
  return occupied_[slot] ? tallies_[slot] : Tally{};
}

std::optional<VoteEntry> VoteTable::winner() const {
  const auto size_of = [&](std::size_t slot) {
    std::size_t count = 0;
    for (std::uint64_t w : key(slot)) count += static_cast<std::size_t>(std::popcount(w));
    return count;
  };
  std::optional<std::size_t> best;
  for (std::size_t slot = 0; slot < occupied_.size(); ++slot) {
    if (!occupied_[slot]) continue;
    if (!best) {
      best = slot;
      continue;
    }
    const Tally& a = tallies_[slot];
    const Tally& b = tallies_[*best];
    if (a.votes != b.votes) {
      if (a.votes > b.votes) best = slot;
      continue;
    }
    if (int c = compare_fit(a, size_of(slot), b, size_of(*best), ranking_)) {
      if (c < 0) best = slot;
      continue;
    }
    if (members_of(slot) < members_of(*best)) best = slot;
  }
  if (!best) return std::nullopt;
  return VoteEntry{members_of(*best), tallies_[*best]};
}

std::vector<VoteEntry> VoteTable::entries() const {
  std::vector<VoteEntry> out;
  out.reserve(used_);
  for (std::size_t slot = 0; slot < occupied_.size(); ++slot) {
    if (occupied_[slot]) out.push_back({members_of(slot), tallies_[slot]});
  }
  std::sort(out.begin(), out.end(), [&](const VoteEntry& a, const VoteEntry& b) {
    return ranks_before(a, b, ranking_);
  });
  return out;
}

double tolerance_for(std::size_t subset_size, double sigma, const HsspOptions& options) {
  if (subset_size == 0) throw InvalidArgument("tolerance_for: subset_size must be >= 1");
  const double scaled = options.tolerance.z * sigma * std::sqrt(static_cast<double>(subset_size) + 1.0);
  return std::max(options.tolerance.floor, scaled);
}

CandidatePartition partition_nodes(const MeasurementMatrix& x, double sigma,
                                   const HsspOptions& options) {
  check_shape(x, options);
  const std::size_t n = x.nodes();
  CandidatePartition out;

  if (options.hierarchy) {
    const auto& layer = *options.hierarchy;
    const std::size_t deepest = n == 0 ? 0 : *std::max_element(layer.begin(), layer.end());
    std::vector<std::vector<NodeId>> by_layer(deepest + 1);
    for (NodeId v = 0; v < n; ++v) by_layer[layer[v]].push_back(v);
    for (NodeId v = 0; v < n; ++v) {
      if (layer[v] == deepest) continue;
      out.parents.push_back(v);
      out.pools.push_back(by_layer[layer[v] + 1]);
    }
    return out;
  }

  const DenseMatrix& r = x.readings;
  const auto values = r.values();
  const bool prune = options.dominance_pruning &&
                     std::none_of(values.begin(), values.end(), [](double v) { return v < 0.0; });
  for (NodeId j = 0; j < n; ++j) {
    std::vector<NodeId> pool;
    for (NodeId k = 0; k < n; ++k) {
      if (k == j) continue;
      bool dominated = false;
      for (std::size_t t = 0; prune && t < r.cols(); ++t) {
        const double slack = tolerance_for(1, effective_sigma(sigma, r(j, t), options), options);
        if (r(k, t) > r(j, t) + slack) {
          dominated = true;
          break;
        }
      }
      if (!dominated) pool.push_back(k);
    }
    out.parents.push_back(j);
    out.pools.push_back(std::move(pool));
  }
  return out;
}

namespace {

// Joint search over all timesteps that keeps only the child sets with the
// highest vote count. A timestep stays live for a branch while some
// extension could still land in its widest window; branches with fewer live
// timesteps than the best count so far are cut. Votes and deviations of
// surviving sets are recomputed exactly as the per-timestep search sums them.
class LeaderSearch {
 public:
  // values[p * steps + k]: reading of pool position p at timestep k.
  // window[m * steps + k]: window for m members at timestep k.
  LeaderSearch(std::span<const double> values, std::span<const double> targets,
               std::span<const double> window, std::size_t pool_size, std::size_t max_size,
               VoteTable& table)
      : values_(values), targets_(targets), window_(window), pool_(pool_size),
        steps_(targets.size()), max_size_(max_size), table_(table),
        mask_(std::max<std::size_t>(1, (pool_size + 63) / 64), 0) {
    std::vector<double> mean(pool_, 0.0);
    for (std::size_t p = 0; p < pool_; ++p) {
      for (std::size_t k = 0; k < steps_; ++k) mean[p] += values_[p * steps_ + k];
    }
    order_.resize(pool_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [&](std::size_t a, std::size_t b) { return mean[a] > mean[b]; });

    suffix_sum_.assign((pool_ + 1) * steps_, 0.0);
    suffix_max_.assign((pool_ + 1) * steps_, 0.0);
    for (std::size_t i = pool_; i-- > 0;) {
      for (std::size_t k = 0; k < steps_; ++k) {
        const double v = values_[order_[i] * steps_ + k];
        suffix_sum_[i * steps_ + k] = suffix_sum_[(i + 1) * steps_ + k] + v;
        suffix_max_[i * steps_ + k] = std::max(suffix_max_[(i + 1) * steps_ + k], v);
      }
    }
    double scale = 1.0;
    for (double t : targets_) scale = std::max(scale, std::abs(t) + 1.0);
    for (std::size_t k = 0; k < steps_; ++k) scale = std::max(scale, suffix_sum_[k] + 1.0);
    slack_ = 1e-10 * scale;
    sums_.assign((max_size_ + 1) * steps_, 0.0);
    members_.reserve(max_size_);
  }

  // Thresholds from K down: strict passes prune hard and usually succeed.
  void run() {
    for (std::size_t floor = steps_; floor >= 1 && table_.empty(); --floor) {
      best_ = floor;
      descend(0, 0);
    }
  }

 private:
  void descend(std::size_t next, std::size_t count) {
    const double* sum = sums_.data() + count * steps_;
    if (count > 0) {
      const double* wide = window_.data() + max_size_ * steps_;
      const double* own = window_.data() + count * steps_;
      const std::size_t room = max_size_ - count;
      std::size_t live = 0;
      std::size_t near = 0;
      for (std::size_t k = 0; k < steps_; ++k) {
        const double gap = sum[k] - targets_[k];
        if (gap > wide[k] + slack_) continue;
        double reach = 0.0;
        if (room > 0 && next < pool_) {
          reach = std::min(suffix_sum_[next * steps_ + k],
                           static_cast<double>(room) * suffix_max_[next * steps_ + k]);
        }
        if (gap + reach < -wide[k] - slack_) continue;
        ++live;
        if (std::abs(gap) <= own[k] + slack_) ++near;
      }
      if (live < best_) return;
      if (near >= best_) score(count);
    }
    if (count == max_size_) return;
    double* child = sums_.data() + (count + 1) * steps_;
    for (std::size_t i = next; i < pool_; ++i) {
      const std::size_t pos = order_[i];
      for (std::size_t k = 0; k < steps_; ++k) child[k] = sum[k] + values_[pos * steps_ + k];
      mask_[pos >> 6] |= std::uint64_t{1} << (pos & 63);
      members_.push_back(pos);
      descend(i + 1, count + 1);
      members_.pop_back();
      mask_[pos >> 6] &= ~(std::uint64_t{1} << (pos & 63));
    }
  }

  // Exact tally: per timestep, members summed from 0.0 by value descending,
  // ties by pool position.
  void score(std::size_t count) {
    Tally tally;
    sorted_ = members_;
    for (std::size_t k = 0; k < steps_; ++k) {
      std::sort(sorted_.begin(), sorted_.end(), [&](std::size_t a, std::size_t b) {
        const double va = values_[a * steps_ + k];
        const double vb = values_[b * steps_ + k];
        return va != vb ? va > vb : a < b;
      });
      double total = 0.0;
      for (std::size_t p : sorted_) total += values_[p * steps_ + k];
      const double deviation = std::abs(total - targets_[k]);
      if (deviation <= window_[count * steps_ + k]) {
        ++tally.votes;
        tally.deviation_sum += deviation;
      }
    }
    if (tally.votes == 0 || tally.votes < best_) return;
    if (tally.votes > best_) {
      table_.clear();
      best_ = tally.votes;
    }
    table_.add(mask_, tally);
  }

  std::span<const double> values_;
  std::span<const double> targets_;
  std::span<const double> window_;
  std::size_t pool_;
  std::size_t steps_;
  std::size_t max_size_;
  VoteTable& table_;
  std::vector<std::uint64_t> mask_;
  std::vector<std::size_t> order_;
  std::vector<double> suffix_sum_;
  std::vector<double> suffix_max_;
  std::vector<double> sums_;
  std::vector<std::size_t> members_;
  std::vector<std::size_t> sorted_;
  double slack_ = 0.0;
  std::size_t best_ = 1;
};

}  // namespace

VoteTable vote_subsets(NodeId parent, std::span<const NodeId> pool,
                       const MeasurementMatrix& x, double sigma,
                       const HsspOptions& options) {
  check_shape(x, options);
  if (parent >= x.nodes()) {
    throw InvalidArgument("vote_subsets: parent " + std::to_string(parent) + " out of range");
  }
  for (NodeId v : pool) {
    if (v >= x.nodes()) throw InvalidArgument("vote_subsets: pool node " + std::to_string(v) + " out of range");
  }
  if (std::find(pool.begin(), pool.end(), parent) != pool.end()) {
    throw InvalidArgument("vote_subsets: pool contains the parent " + std::to_string(parent));
  }

  VoteTable table(parent, std::vector<NodeId>(pool.begin(), pool.end()), options.ranking());
  if (pool.empty()) return table;

  const std::size_t steps = x.timesteps();
  const std::size_t max_size = std::min(options.max_children, pool.size());

  // Per-size windows, indexed by member count.
  std::vector<double> window((max_size + 1) * steps, 0.0);
  std::vector<double> targets(steps, 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    targets[k] = x.readings(parent, k);
    if (options.mode == AggregationMode::kOwnLoad) targets[k] -= (*x.individual)(parent, k);
    const double sigma_k = effective_sigma(sigma, x.readings(parent, k), options);
    for (std::size_t m = 1; m <= max_size; ++m) window[m * steps + k] = tolerance_for(m, sigma_k, options);
  }

  bool nonnegative = true;
  std::vector<double> values(pool.size() * steps, 0.0);
  for (std::size_t p = 0; p < pool.size(); ++p) {
    for (std::size_t k = 0; k < steps; ++k) {
      const double v = x.readings(pool[p], k);
      if (!std::isfinite(v)) throw InvalidArgument("vote_subsets: non-finite reading");
      nonnegative = nonnegative && v >= 0.0;
      values[p * steps + k] = v;
    }
  }

  if (options.tallying == Tallying::kLeaders && options.vote_limit == kUnlimited && nonnegative) {
    LeaderSearch search(values, targets, window, pool.size(), max_size, table);
    search.run();
    return table;
  }

  SubsetQuery query;
  query.pool.resize(pool.size());
  query.max_size = max_size;
  query.limit = kUnlimited;
  const bool streaming =
      options.vote_limit == kUnlimited && options.backend == SolverBackend::kBranchBound;

  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t p = 0; p < pool.size(); ++p) query.pool[p] = {pool[p], values[p * steps + k]};
    query.target = targets[k];
    query.tolerance = window[max_size * steps + k];

    if (streaming) {
      detail::validate_query(query);
      detail::require_nonnegative(query);
      detail::branch_bound_visit(query, [&](std::span<const std::uint64_t> mask,
                                            std::size_t count, double sum) {
        const double deviation = std::abs(sum - query.target);
        if (deviation <= window[count * steps + k]) table.add(mask, Tally{1, deviation});
      });
      continue;
    }

    std::size_t accepted = 0;
    for (const SubsetHit& hit : solve(query, options.backend)) {
      if (hit.deviation > window[hit.members.size() * steps + k]) continue;
      table.record(hit.members, hit.deviation);
      if (++accepted == options.vote_limit) break;
    }
  }
  return table;
}

EstimatedTopology reduce_redundant(std::span<const VoteTable> tables, std::size_t n,
                                   const HsspOptions& options) {
  struct Claim {
    NodeId parent;
    std::size_t votes;
  };
  std::vector<std::vector<Claim>> claims(n);
  for (const VoteTable& table : tables) {
    const auto win = table.winner();
    if (!win) continue;
    for (NodeId child : win->members) {
      if (child >= n || table.parent() >= n) {
        throw InvalidArgument("reduce_redundant: node index out of range for " +
                              std::to_string(n) + " nodes");
      }
      if (options.hierarchy) {
        const auto& layer = *options.hierarchy;
        if (layer.at(child) != layer.at(table.parent()) + 1) continue;
      }
      claims[child].push_back({table.parent(), win->tally.votes});
    }
  }

  EstimatedTopology out{AdjacencyMatrix(n), {}};
  for (NodeId child = 0; child < n; ++child) {
    const auto& mine = claims[child];
    if (mine.empty()) continue;
    const Claim best = *std::min_element(mine.begin(), mine.end(), [](const Claim& a, const Claim& b) {
      if (a.votes != b.votes) return a.votes > b.votes;
      return a.parent < b.parent;
    });
    out.adjacency.connect(best.parent, child);
    out.edges.push_back({best.parent, child, best.votes});
  }
  return out;
}

EstimatedTopology identify_topology(const MeasurementMatrix& x, double sigma,
                                    const HsspOptions& options) {
  check_shape(x, options);
  const CandidatePartition partition = partition_nodes(x, sigma, options);
  std::vector<VoteTable> tables(partition.parents.size());
  detail::parallel_for(tables.size(), options.threads, [&](std::size_t i) {
    tables[i] = vote_subsets(partition.parents[i], partition.pools[i], x, sigma, options);
  });
  return reduce_redundant(tables, x.nodes(), options);
}

}  // namespace gridtopo
