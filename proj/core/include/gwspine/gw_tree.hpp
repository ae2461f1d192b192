#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gwspine/error.hpp"
#include "gwspine/offspring.hpp"
#include "gwspine/rng.hpp"

namespace gwspine {

/// Ulam-Harris word. The empty word is the root; prefix order is ancestry.
class NodeLabel {
 public:
  NodeLabel() = default;
  explicit NodeLabel(std::vector<std::uint32_t> path) : path_(std::move(path)) {}

  static NodeLabel root() { return {}; }
  /// Parses "root" or dot-separated positive integers ("1.2.1").
  static NodeLabel parse(std::string_view text);

  std::size_t generation() const noexcept { return path_.size(); }
  bool is_root() const noexcept { return path_.empty(); }
  std::span<const std::uint32_t> path() const noexcept { return path_; }

  NodeLabel child(std::uint32_t j) const;
  NodeLabel parent() const;
  /// u.is_ancestor_or_self(v) iff u is a prefix of v.
  bool is_ancestor_or_self(const NodeLabel& v) const noexcept;

  std::string to_string() const;

  auto operator<=>(const NodeLabel&) const = default;

 private:
  std::vector<std::uint32_t> path_;
};

/// Most recent common ancestor: the longest common prefix.
NodeLabel mrca(const NodeLabel& u, const NodeLabel& v);

using NodeIndex = std::uint32_t;
inline constexpr NodeIndex kNoNode = 0xffffffffu;

struct TreeNode {
  double birth = 0.0;  ///< alpha(u)
  double death = 0.0;  ///< beta(u) = alpha(u) + lifetime
  NodeIndex parent = kNoNode;
  NodeIndex first_child = kNoNode;  ///< children are contiguous, numbered 1..nu
  std::uint32_t nu = 0;             ///< offspring count, drawn for every node
  std::uint32_t child_number = 0;   ///< j in u = parent.j; 0 for the root
  std::uint32_t generation = 0;
  std::uint64_t key = 0;            ///< substream key of this node

  double lifetime() const noexcept { return death - birth; }
  bool expanded() const noexcept { return first_child != kNoNode; }
};

struct TreeCaps {
  std::size_t max_nodes = 1'000'000;
};

/// Continuous-time Galton-Watson tree, complete up to `horizon`.
///
/// Nodes are stored in creation order, which is the order of their parents'
/// death events. Every node born strictly before the horizon is present and
/// carries its drawn offspring count; its children exist iff it died before
/// the horizon.
class GWTree {
 public:
  GWTree() = default;
  GWTree(std::vector<TreeNode> nodes, double horizon, bool truncated)
      : nodes_(std::move(nodes)), horizon_(horizon), truncated_(truncated) {}

  std::size_t size() const noexcept { return nodes_.size(); }
  const TreeNode& node(NodeIndex i) const { return nodes_.at(i); }
  std::span<const TreeNode> nodes() const noexcept { return nodes_; }
  double horizon() const noexcept { return horizon_; }
  bool truncated() const noexcept { return truncated_; }

  NodeLabel label(NodeIndex i) const;
  std::optional<NodeIndex> find(const NodeLabel& u) const;

  /// Indices of V_t = {u : alpha(u) <= t < beta(u)}. Throws BeyondHorizon.
  std::vector<NodeIndex> alive_indices(double t) const;
  std::vector<NodeLabel> alive_at(double t) const;
  std::size_t count_alive(double t) const;
  /// D_t = #{u : beta(u) < t}. Throws BeyondHorizon.
  std::size_t deaths_before(double t) const;

  /// The prefix v of u alive at t. Throws NotAlive when u is absent or t >= beta(u).
  NodeLabel ancestor_at(const NodeLabel& u, double t) const;
  NodeIndex ancestor_index_at(NodeIndex u, double t) const;

  /// One node per line, `label\talpha\tbeta\tnu`, breadth-first with
  /// lexicographic order inside each generation.
  void dump(std::ostream& os) const;

 private:
  void check_time(double t) const;

  std::vector<TreeNode> nodes_;
  double horizon_ = 0.0;
  bool truncated_ = false;
};

/// Raised when the node cap is hit; carries the partial tree.
class PopulationCapExceeded : public Error {
 public:
  PopulationCapExceeded(const std::string& what, GWTree partial)
      : Error(ErrorCode::PopulationCapExceeded, what), partial_(std::move(partial)) {}
  const GWTree& partial() const noexcept { return partial_; }

 private:
  GWTree partial_;
};

/// Event-driven simulation ordered by death time. The root key is drawn from
/// `rng`; all further randomness comes from per-node substreams, so a node's
/// subtree depends only on its own key.
GWTree simulate_tree(const OffspringDistribution& d, double r, double horizon, const TreeCaps& caps,
                     Stream& rng);
GWTree simulate_tree_from_key(const OffspringDistribution& d, double r, double horizon,
                              const TreeCaps& caps, std::uint64_t root_key);

struct TreeMoments {
  double mean_alive = 1.0;         ///< E[N_t]
  double second_moment_alive = 1.0;  ///< E[N_t^2]
  double mean_deaths = 0.0;        ///< E[D_t]
};

/// Closed forms for E[N_t], E[N_t^2] and E[D_t]. For m = 1 the death mean is
/// the limit r t.
TreeMoments expected_moments(const OffspringDistribution& d, double r, double t);

/// Yule fast path: N_t is geometric with success probability e^{-rt}.
std::uint64_t sample_yule_population(double r, double t, Stream& rng);

}  // namespace gwspine
