#include "gwspine/branching_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "gwspine/parallel.hpp"
#include "tree_growth.hpp"

namespace gwspine {

namespace {

constexpr double kTimeTol = 1e-9;

bool same_time(double a, double b) { return std::abs(a - b) <= kTimeTol * std::max(1.0, std::abs(b)); }

double last_branch(const TreeNode& n) {
  return n.generation == 0 ? -std::numeric_limits<double>::infinity() : n.birth;
}

}  // namespace

void BranchingModel::validate() const {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw Error(ErrorCode::InvalidArgument, "branching rate must be positive");
  kernel.check_arity(offspring);
}

std::span<const PathPoint> PopulationRealization::path(NodeIndex i) const {
  if (!path_grid_) throw Error(ErrorCode::PathsNotRecorded, "population was simulated without paths");
  return paths_.at(i);
}

const Snapshot& PopulationRealization::snapshot(double t) const {
  if (t > horizon() * (1.0 + 1e-15)) {
    throw Error(ErrorCode::BeyondHorizon, "t=" + std::to_string(t) + " exceeds horizon " + std::to_string(horizon()));
  }
  for (const auto& s : snapshots_) {
    if (same_time(s.t, t)) return s;
  }
  throw Error(ErrorCode::StateNotRecorded, "no states recorded at t=" + std::to_string(t));
}

std::vector<LineageView> PopulationRealization::alive_lineages(double t) const {
  const Snapshot& s = snapshot(t);
  std::vector<LineageView> out;
  out.reserve(s.nodes.size());
  for (std::size_t k = 0; k < s.nodes.size(); ++k) {
    const TreeNode& n = tree_.node(s.nodes[k]);
    out.push_back({t, s.states[k], mark_[s.nodes[k]], static_cast<int>(n.generation), last_branch(n)});
  }
  return out;
}

std::vector<LineageView> PopulationRealization::dead_lineages(double t) const {
  if (t > horizon()) throw Error(ErrorCode::BeyondHorizon, "t=" + std::to_string(t) + " exceeds horizon");
  std::vector<LineageView> out;
  const auto nodes = tree_.nodes();
  for (NodeIndex i = 0; i < nodes.size(); ++i) {
    if (nodes[i].death < t) {
      out.push_back({nodes[i].death, end_[i], mark_[i], static_cast<int>(nodes[i].generation), last_branch(nodes[i])});
    }
  }
  return out;
}

LineageWindow PopulationRealization::window(NodeIndex u, double t, double length) const {
  if (!path_grid_) throw Error(ErrorCode::PathsNotRecorded, "ancestral windows need recorded paths");
  if (length < 0.0 || length > t) throw Error(ErrorCode::InvalidArgument, "window must satisfy 0 <= T <= t");
  const Snapshot& snap = snapshot(t);
  const auto it = std::lower_bound(snap.nodes.begin(), snap.nodes.end(), u);
  if (it == snap.nodes.end() || *it != u) throw Error(ErrorCode::NotAlive, "node is not alive at t");

  LineageWindow w;
  w.from = t - length;
  w.to = t;
  std::vector<NodeIndex> chain;
  for (NodeIndex v = u; v != kNoNode; v = tree_.node(v).parent) {
    chain.push_back(v);
    if (tree_.node(v).birth <= w.from) break;
  }
  std::reverse(chain.begin(), chain.end());
  for (NodeIndex v : chain) {
    const TreeNode& n = tree_.node(v);
    if (n.generation > 0 && n.birth > w.from && n.birth <= t) w.branch_times.push_back(n.birth);
    for (const auto& p : paths_[v]) {
      // The end point of an ancestor is a left limit; its child's birth point follows.
      if (p.t < w.from - kTimeTol || p.t >= t - kTimeTol) continue;
      if (v != u && same_time(p.t, n.death)) continue;
      w.path.push_back(p);
    }
  }
  w.path.push_back({t, snap.states[static_cast<std::size_t>(it - snap.nodes.begin())]});
  return w;
}

PopulationRealization simulate_population_from(const BranchingModel& model, double horizon, const TreeCaps& caps,
                                               const RecordSpec& record, std::uint64_t root_key,
                                               std::optional<State> root_state, double root_birth) {
  model.validate();
  PopulationRealization pop;
  pop.path_grid_ = record.path_grid;
  if (record.path_grid && !(*record.path_grid > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "path grid must be positive");
  }

  std::vector<double> obs;
  for (double t : record.observation_times) {
    if (t < root_birth || t > horizon) {
      throw Error(ErrorCode::BeyondHorizon, "observation time " + std::to_string(t) + " outside [0, horizon]");
    }
    obs.push_back(t);
  }
  obs.push_back(horizon);
  std::sort(obs.begin(), obs.end());
  obs.erase(std::unique(obs.begin(), obs.end(), [](double a, double b) { return same_time(a, b); }), obs.end());
  pop.snapshots_.resize(obs.size());
  for (std::size_t j = 0; j < obs.size(); ++j) pop.snapshots_[j].t = obs[j];

  const MotionModel& motion = model.motion;
  const bool still = motion.is_still();
  std::vector<double> times;     // absolute times to bridge for the current node
  std::vector<int> obs_slot;     // snapshot index per bridged time, or -1 for grid-only
  std::vector<PathPoint> bridged;
  Trace trace;

  auto on_created = [&](const std::vector<TreeNode>& nodes, NodeIndex i) {
    const TreeNode& n = nodes[i];
    if (pop.birth_.size() < nodes.size()) {
      pop.birth_.resize(nodes.size());
      pop.end_.resize(nodes.size());
      pop.mark_.resize(nodes.size());
      if (pop.path_grid_) pop.paths_.resize(nodes.size());
    }
    if (i == 0) {
      Stream init(derive_key(n.key, stream_tag::initial));
      pop.birth_[0] = root_state ? *root_state : model.initial.draw(init);
      pop.mark_[0] = 0.0;
    }
    const State start = pop.birth_[i];
    const double end = std::min(n.death, horizon);

    // Times inside (birth, end) to bridge, merged from snapshots and the path grid.
    times.clear();
    obs_slot.clear();
    for (std::size_t j = 0; j < obs.size(); ++j) {
      if (obs[j] >= n.birth && obs[j] < n.death) {
        times.push_back(obs[j]);
        obs_slot.push_back(static_cast<int>(j));
      }
    }
    if (pop.path_grid_) {
      const double g = *pop.path_grid_;
      for (auto k = static_cast<std::int64_t>(std::floor(n.birth / g)) + 1; static_cast<double>(k) * g < end; ++k) {
        const double tk = static_cast<double>(k) * g;
        if (tk <= n.birth) continue;
        const auto hit = std::find_if(times.begin(), times.end(), [&](double s) { return same_time(s, tk); });
        if (hit == times.end()) {
          times.push_back(tk);
          obs_slot.push_back(-1);
        }
      }
      std::vector<std::size_t> order(times.size());
      for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
      std::vector<double> t_sorted;
      std::vector<int> s_sorted;
      for (std::size_t k : order) {
        t_sorted.push_back(times[k]);
        s_sorted.push_back(obs_slot[k]);
      }
      times.swap(t_sorted);
      obs_slot.swap(s_sorted);
    }
    const bool need_trace = !still && std::any_of(times.begin(), times.end(), [&](double s) { return s < end; });

    State end_state = start;
    trace.clear();
    if (!still) {
      Stream ms(derive_key(n.key, stream_tag::motion));
      end_state = motion.evolve_traced(start, end - n.birth, ms, need_trace ? &trace : nullptr);
    }
    pop.end_[i] = end_state;

    bridged.clear();
    if (need_trace) {
      std::vector<double> rel;
      for (double s : times) {
        if (s < end) rel.push_back(s - n.birth);
      }
      Stream ps(derive_key(n.key, stream_tag::path));
      motion.fill_from_trace(trace, rel, ps, bridged);
    }
    auto state_at = [&](std::size_t k) -> State {
      if (times[k] >= end) return end_state;
      if (still) return start;
      return bridged[k].state;
    };
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (obs_slot[k] < 0) continue;
      auto& snap = pop.snapshots_[static_cast<std::size_t>(obs_slot[k])];
      snap.nodes.push_back(i);
      snap.states.push_back(state_at(k));
    }
    if (pop.path_grid_) {
      auto& path = pop.paths_[i];
      path.clear();
      path.push_back({n.birth, start});
      for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] > n.birth && times[k] < end) path.push_back({times[k], state_at(k)});
      }
      if (end > n.birth) path.push_back({end, end_state});
    }
  };

  auto on_expanded = [&](const std::vector<TreeNode>& nodes, NodeIndex u) {
    const TreeNode& n = nodes[u];
    pop.birth_.resize(nodes.size());
    pop.end_.resize(nodes.size());
    pop.mark_.resize(nodes.size());
    if (pop.path_grid_) pop.paths_.resize(nodes.size());
    const auto children = model.kernel.positions(pop.end_[u], static_cast<int>(n.nu), derive_key(n.key, stream_tag::theta));
    const double mark = pop.mark_[u] + std::log(static_cast<double>(n.nu));
    for (std::uint32_t j = 0; j < n.nu; ++j) {
      pop.birth_[n.first_child + j] = children[j];
      pop.mark_[n.first_child + j] = mark;
    }
  };

  pop.tree_ = detail::grow_tree(model.offspring, model.rate, horizon, caps, root_key, root_birth, on_created,
                                on_expanded);
  return pop;
}

PopulationRealization simulate_population(const BranchingModel& model, double horizon, const TreeCaps& caps,
                                          const RecordSpec& record, Stream& rng) {
  return simulate_population_from(model, horizon, caps, record, derive_key(rng(), stream_tag::root));
}

PopulationSum sum_over_alive(const PopulationRealization& pop, double t, const StateFn& f) {
  const Snapshot& s = pop.snapshot(t);
  PopulationSum out;
  out.count = s.nodes.size();
  for (const State& x : s.states) out.value += f(x);
  return out;
}

PopulationSum sum_over_dead(const PopulationRealization& pop, double t, const StateFn& f) {
  if (t > pop.horizon()) throw Error(ErrorCode::BeyondHorizon, "t=" + std::to_string(t) + " exceeds horizon");
  PopulationSum out;
  const auto nodes = pop.tree().nodes();
  for (NodeIndex i = 0; i < nodes.size(); ++i) {
    if (nodes[i].death < t) {
      out.value += f(pop.end_state(i));
      ++out.count;
    }
  }
  return out;
}

PopulationSum sum_over_forks(const PopulationRealization& pop, double t, const StateFn& f, const StateFn& g) {
  const Snapshot& s = pop.snapshot(t);
  double sf = 0.0;
  double sg = 0.0;
  double sfg = 0.0;
  for (const State& x : s.states) {
    const double a = f(x);
    const double b = g(x);
    sf += a;
    sg += b;
    sfg += a * b;
  }
  PopulationSum out;
  out.count = s.nodes.size();
  out.value = s.nodes.size() < 2 ? 0.0 : sf * sg - sfg;
  return out;
}

PopulationSum ancestral_window_functional(const PopulationRealization& pop, double t, double window,
                                          const std::function<double(const LineageWindow&)>& phi) {
  if (!pop.has_paths()) throw Error(ErrorCode::PathsNotRecorded, "ancestral windows need recorded paths");
  const Snapshot& s = pop.snapshot(t);
  PopulationSum out;
  out.count = s.nodes.size();
  for (NodeIndex u : s.nodes) out.value += phi(pop.window(u, t, window));
  return out;
}

double w_proxy(const BranchingModel& model, std::size_t alive, double t) {
  return static_cast<double>(alive) * std::exp(-model.malthus() * t);
}

WSample estimate_W(const BranchingModel& model, double t, std::size_t n_reps, std::uint64_t seed, unsigned jobs,
                   bool build_trees, const TreeCaps& caps) {
  if (!(model.offspring.mean() > 1.0)) throw Error(ErrorCode::Subcritical, "W is degenerate unless m > 1");
  const bool yule = model.offspring.prob(2) == 1.0;
  WSample out;
  out.fast_path = yule && !build_trees;
  out.samples = run_replicas<double>(n_reps, jobs, [&](std::size_t i) {
    const std::uint64_t key = derive_key(seed, i);
    if (out.fast_path) {
      Stream s(key);
      return w_proxy(model, sample_yule_population(model.rate, t, s), t);
    }
    const GWTree tree = simulate_tree_from_key(model.offspring, model.rate, t, caps, derive_key(key, stream_tag::root));
    return w_proxy(model, tree.count_alive(t), t);
  });
  out.summary = estimate(out.samples);
  return out;
}

void write_snapshot_csv(std::ostream& os, std::size_t replica, const PopulationRealization& pop) {
  std::ostringstream line;
  line.precision(17);
  for (const auto& snap : pop.snapshots()) {
    for (std::size_t k = 0; k < snap.nodes.size(); ++k) {
      line.str("");
      line << replica << ',' << pop.tree().label(snap.nodes[k]).to_string() << ',' << snap.t << ','
           << snap.states[k].x << ',' << snap.states[k].type << '\n';
      os << line.str();
    }
  }
}

}  // namespace gwspine
