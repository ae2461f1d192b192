#pragma once

// Shared genealogy engine for simulate_tree and simulate_population.

#include <functional>
#include <queue>
#include <utility>
#include <vector>

#include "gwspine/gw_tree.hpp"

namespace gwspine::detail {

inline void draw_genealogy(TreeNode& node, const OffspringDistribution& d, double r) {
  Stream g(derive_key(node.key, stream_tag::genealogy));
  node.death = node.birth + g.exponential(r);
  node.nu = static_cast<std::uint32_t>(d.sample(g));
}

/// Grows the tree in death-time order. `on_created(nodes, i)` runs once per
/// node right after its genealogy is drawn; `on_expanded(nodes, i)` runs after
/// the children of i have been appended (and before their on_created).
/// A nonzero root_birth regrows a subtree with bit-identical event times.
template <class OnCreated, class OnExpanded>
GWTree grow_tree(const OffspringDistribution& d, double r, double horizon, const TreeCaps& caps,
                 std::uint64_t root_key, double root_birth, OnCreated&& on_created, OnExpanded&& on_expanded) {
  if (!(r > 0.0)) throw Error(ErrorCode::InvalidArgument, "branching rate must be positive");
  if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, "horizon must be positive");

  std::vector<TreeNode> nodes;
  nodes.reserve(64);
  TreeNode root;
  root.key = root_key;
  root.birth = root_birth;
  draw_genealogy(root, d, r);
  nodes.push_back(root);
  on_created(nodes, NodeIndex{0});

  using Event = std::pair<double, NodeIndex>;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
  queue.emplace(nodes[0].death, 0);

  while (!queue.empty()) {
    const auto [death, u] = queue.top();
    if (!(death < horizon)) break;
    queue.pop();
    const std::uint32_t nu = nodes[u].nu;
    if (nu == 0) continue;
    if (nodes.size() + nu > caps.max_nodes) {
      throw PopulationCapExceeded("node cap " + std::to_string(caps.max_nodes) + " reached at t=" +
                                      std::to_string(death),
                                  GWTree(std::move(nodes), horizon, true));
    }
    const auto first = static_cast<NodeIndex>(nodes.size());
    nodes[u].first_child = first;
    for (std::uint32_t j = 1; j <= nu; ++j) {
      TreeNode child;
      child.birth = nodes[u].death;
      child.parent = u;
      child.child_number = j;
      child.generation = nodes[u].generation + 1;
      child.key = derive_key(nodes[u].key, j);
      draw_genealogy(child, d, r);
      nodes.push_back(child);
    }
    on_expanded(nodes, u);
    for (std::uint32_t j = 0; j < nu; ++j) {
      on_created(nodes, first + j);
      queue.emplace(nodes[first + j].death, first + j);
    }
  }
  return GWTree(std::move(nodes), horizon, false);
}

}  // namespace gwspine::detail
