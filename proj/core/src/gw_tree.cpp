#include "gwspine/gw_tree.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <ostream>
#include <sstream>

#include "tree_growth.hpp"

namespace gwspine {

NodeLabel NodeLabel::parse(std::string_view text) {
  if (text == "root" || text.empty()) return root();
  std::vector<std::uint32_t> path;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t dot = text.find('.', pos);
    const std::string_view part = text.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos);
    std::uint32_t value = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (ec != std::errc{} || ptr != part.data() + part.size() || value == 0) {
      throw Error(ErrorCode::InvalidArgument, "bad node label '" + std::string(text) + "'");
    }
    path.push_back(value);
    if (dot == std::string_view::npos) break;
    pos = dot + 1;
  }
  return NodeLabel(std::move(path));
}

NodeLabel NodeLabel::child(std::uint32_t j) const {
  auto path = path_;
  path.push_back(j);
  return NodeLabel(std::move(path));
}

NodeLabel NodeLabel::parent() const {
  if (path_.empty()) throw Error(ErrorCode::InvalidArgument, "root has no parent");
  return NodeLabel(std::vector<std::uint32_t>(path_.begin(), path_.end() - 1));
}

bool NodeLabel::is_ancestor_or_self(const NodeLabel& v) const noexcept {
  return path_.size() <= v.path_.size() && std::equal(path_.begin(), path_.end(), v.path_.begin());
}

std::string NodeLabel::to_string() const {
  if (path_.empty()) return "root";
  std::string out;
  for (std::size_t i = 0; i < path_.size(); ++i) {
    if (i) out += '.';
    out += std::to_string(path_[i]);
  }
  return out;
}

NodeLabel mrca(const NodeLabel& u, const NodeLabel& v) {
  const auto a = u.path();
  const auto b = v.path();
  const auto [ia, ib] = std::mismatch(a.begin(), a.end(), b.begin(), b.end());
  return NodeLabel(std::vector<std::uint32_t>(a.begin(), ia));
}

NodeLabel GWTree::label(NodeIndex i) const {
  std::vector<std::uint32_t> path;
  for (NodeIndex v = i; nodes_.at(v).parent != kNoNode; v = nodes_[v].parent) {
    path.push_back(nodes_[v].child_number);
  }
  std::reverse(path.begin(), path.end());
  return NodeLabel(std::move(path));
}

std::optional<NodeIndex> GWTree::find(const NodeLabel& u) const {
  if (nodes_.empty()) return std::nullopt;
  NodeIndex v = 0;
  for (std::uint32_t j : u.path()) {
    const TreeNode& n = nodes_[v];
    if (!n.expanded() || j < 1 || j > n.nu) return std::nullopt;
    v = n.first_child + (j - 1);
  }
  return v;
}

void GWTree::check_time(double t) const {
  if (t > horizon_) {
    throw Error(ErrorCode::BeyondHorizon, "t=" + std::to_string(t) + " exceeds horizon " + std::to_string(horizon_));
  }
}

std::vector<NodeIndex> GWTree::alive_indices(double t) const {
  check_time(t);
  std::vector<NodeIndex> out;
  for (NodeIndex i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].birth <= t && t < nodes_[i].death) out.push_back(i);
  }
  return out;
}

std::vector<NodeLabel> GWTree::alive_at(double t) const {
  std::vector<NodeLabel> out;
  for (NodeIndex i : alive_indices(t)) out.push_back(label(i));
  return out;
}

std::size_t GWTree::count_alive(double t) const {
  check_time(t);
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [t](const TreeNode& n) {
    return n.birth <= t && t < n.death;
  }));
}

std::size_t GWTree::deaths_before(double t) const {
  check_time(t);
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [t](const TreeNode& n) { return n.death < t; }));
}

NodeIndex GWTree::ancestor_index_at(NodeIndex u, double t) const {
  if (u >= nodes_.size() || t >= nodes_[u].death || t < 0.0) {
    throw Error(ErrorCode::NotAlive, "no ancestor alive at t=" + std::to_string(t));
  }
  NodeIndex v = u;
  while (nodes_[v].birth > t) v = nodes_[v].parent;
  return v;
}

NodeLabel GWTree::ancestor_at(const NodeLabel& u, double t) const {
  const auto idx = find(u);
  if (!idx) throw Error(ErrorCode::NotAlive, "label " + u.to_string() + " is not in the tree");
  return label(ancestor_index_at(*idx, t));
}

void GWTree::dump(std::ostream& os) const {
  if (nodes_.empty()) return;
  std::ostringstream line;
  line.precision(17);
  std::deque<std::pair<NodeIndex, std::string>> queue{{0, "root"}};
  while (!queue.empty()) {
    auto [i, name] = std::move(queue.front());
    queue.pop_front();
    const TreeNode& n = nodes_[i];
    line.str("");
    line << name << '\t' << n.birth << '\t' << n.death << '\t' << n.nu << '\n';
    os << line.str();
    if (!n.expanded()) continue;
    for (std::uint32_t j = 0; j < n.nu; ++j) {
      std::string child = (i == 0 ? std::string() : name + ".") + std::to_string(j + 1);
      queue.emplace_back(n.first_child + j, std::move(child));
    }
  }
}

GWTree simulate_tree_from_key(const OffspringDistribution& d, double r, double horizon,
                              const TreeCaps& caps, std::uint64_t root_key) {
  auto noop = [](const std::vector<TreeNode>&, NodeIndex) {};
  return detail::grow_tree(d, r, horizon, caps, root_key, 0.0, noop, noop);
}

GWTree simulate_tree(const OffspringDistribution& d, double r, double horizon, const TreeCaps& caps,
                     Stream& rng) {
  return simulate_tree_from_key(d, r, horizon, caps, derive_key(rng(), stream_tag::root));
}

TreeMoments expected_moments(const OffspringDistribution& d, double r, double t) {
  if (!(r > 0.0) || t < 0.0) throw Error(ErrorCode::InvalidArgument, "expected_moments needs r > 0, t >= 0");
  const double m = d.mean();
  const double var = d.variance();
  TreeMoments out;
  if (m == 1.0) {
    out.mean_alive = 1.0;
    out.second_moment_alive = 1.0 + var * r * t;
    out.mean_deaths = r * t;
    return out;
  }
  const double c = r * (m - 1.0);
  const double en = std::exp(c * t);
  out.mean_alive = en;
  // e^{ct} + (var/(m-1) + m) (e^{2ct} - e^{ct})
  out.second_moment_alive = en + (var / (m - 1.0) + m) * en * std::expm1(c * t);
  out.mean_deaths = std::expm1(c * t) / (m - 1.0);
  return out;
}

std::uint64_t sample_yule_population(double r, double t, Stream& rng) {
  const double p = std::exp(-r * t);
  if (p >= 1.0) return 1;
  // Inversion: P(N > k) = (1 - p)^k.
  const double k = std::floor(std::log(rng.uniform()) / std::log1p(-p));
  return static_cast<std::uint64_t>(k) + 1;
}

}  // namespace gwspine
