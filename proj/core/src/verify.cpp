#include "gwspine/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "gwspine/parallel.hpp"

namespace gwspine {

namespace {

// Side tags: each side of a check owns a disjoint family of replica keys.
constexpr std::uint64_t kTreeSide = 1;
constexpr std::uint64_t kSpineSide = 2;
constexpr std::uint64_t kOracleSide = 3;

std::uint64_t replica_key(const CheckContext& ctx, std::uint64_t side, std::size_t i) {
  return derive_key(derive_key(ctx.seed, side), i);
}

std::uint64_t tree_root_key(const CheckContext& ctx, std::size_t i) {
  return derive_key(replica_key(ctx, kTreeSide, i), stream_tag::root);
}

bool compare(double value, const std::string& relation, double threshold) {
  if (std::isnan(value)) return false;
  if (relation == "<=") return value <= threshold;
  if (relation == "<") return value < threshold;
  if (relation == ">=") return value >= threshold;
  if (relation == ">") return value > threshold;
  throw Error(ErrorCode::InvalidArgument, "unknown relation '" + relation + "'");
}

double nan_to_inf(double z) { return std::isnan(z) ? std::numeric_limits<double>::infinity() : z; }

nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double expected_alive(const BranchingModel& model, double t) {
  return expected_moments(model.offspring, model.rate, t).mean_alive;
}

nlohmann::json model_meta(const BranchingModel& model) {
  return {{"name", model.name},
          {"rate", model.rate},
          {"mean_offspring", model.offspring.mean()},
          {"kernel", model.kernel.name()}};
}

}  // namespace

bool CheckReport::require(std::string label, double value, std::string relation, double threshold) {
  const bool ok = compare(value, relation, threshold);
  criteria.push_back({std::move(label), value, threshold, std::move(relation), ok});
  return ok;
}

void CheckReport::set_primary(const McEstimate& l, const McEstimate& r, double z_limit) {
  lhs = l;
  rhs = r;
  z_max = z_limit;
  z = nan_to_inf(two_sample_z(l, r, z_limit).z);
  require("z(lhs, rhs)", z, "<=", z_limit);
}

void CheckReport::finalize() {
  pass = !error.has_value() && std::all_of(criteria.begin(), criteria.end(), [](const Criterion& c) { return c.pass; });
}

nlohmann::json to_json(const McEstimate& e) {
  return {{"mean", number(e.mean)}, {"se", number(e.se)}, {"n", e.n}};
}

nlohmann::json to_json(const CheckReport& r) {
  nlohmann::json criteria = nlohmann::json::array();
  for (const auto& c : r.criteria) {
    criteria.push_back({{"label", c.label},
                        {"value", number(c.value)},
                        {"relation", c.relation},
                        {"threshold", number(c.threshold)},
                        {"pass", c.pass}});
  }
  nlohmann::json series = nlohmann::json::array();
  for (const auto& s : r.series) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& [x, y] : s.points) points.push_back({number(x), number(y)});
    series.push_back({{"name", s.name}, {"x", s.x_label}, {"y", s.y_label}, {"points", std::move(points)}});
  }
  return {{"name", r.name},
          {"kind", r.kind},
          {"lhs", to_json(r.lhs)},
          {"rhs", to_json(r.rhs)},
          {"z", number(r.z)},
          {"z_max", r.z_max},
          {"pass", r.pass},
          {"criteria", std::move(criteria)},
          {"metadata", r.metadata},
          {"series", std::move(series)},
          {"error", r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr)}};
}

SmoothFunction smooth_function(std::string_view name) {
  if (name == "one") {
    return {"one", [](double) { return 1.0; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
  }
  if (name == "x") {
    return {"x", [](double x) { return x; }, [](double) { return 1.0; }, [](double) { return 0.0; }};
  }
  if (name == "x2") {
    return {"x2", [](double x) { return x * x; }, [](double x) { return 2.0 * x; }, [](double) { return 2.0; }};
  }
  if (name == "x3") {
    return {"x3", [](double x) { return x * x * x; }, [](double x) { return 3.0 * x * x; },
            [](double x) { return 6.0 * x; }};
  }
  if (name == "x4") {
    return {"x4", [](double x) { return x * x * x * x; }, [](double x) { return 4.0 * x * x * x; },
            [](double x) { return 12.0 * x * x; }};
  }
  if (name == "gauss") {
    return {"gauss", [](double x) { return std::exp(-x * x); }, [](double x) { return -2.0 * x * std::exp(-x * x); },
            [](double x) { return (4.0 * x * x - 2.0) * std::exp(-x * x); }};
  }
  if (name == "cos") {
    return {"cos", [](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); },
            [](double x) { return -std::cos(x); }};
  }
  throw Error(ErrorCode::InvalidArgument, "unknown test function '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

CheckReport check_tree_moments(const OffspringDistribution& d, double r, const TreeMomentsOptions& opts,
                               const CheckContext& ctx) {
  CheckReport rep;
  rep.kind = "tree_moments";
  const double t = opts.t;
  const auto rows = run_replicas<std::array<double, 3>>(opts.n_reps, ctx.jobs, [&](std::size_t i) {
    const GWTree tree = simulate_tree_from_key(d, r, t, ctx.caps, tree_root_key(ctx, i));
    const auto n = static_cast<double>(tree.count_alive(t));
    return std::array<double, 3>{n, n * n, static_cast<double>(tree.deaths_before(t))};
  });
  std::array<std::vector<double>, 3> cols;
  for (auto& c : cols) c.reserve(rows.size());
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < 3; ++k) cols[k].push_back(row[k]);
  }
  const TreeMoments exact = expected_moments(d, r, t);
  const McEstimate n_est = estimate(cols[0]);
  const McEstimate n2_est = estimate(cols[1]);
  const McEstimate d_est = estimate(cols[2]);
  rep.set_primary(n_est, McEstimate::exact(exact.mean_alive), opts.z_max);
  rep.require("z(mean N_t^2, closed form)", two_sample_z(n2_est, McEstimate::exact(exact.second_moment_alive)).z,
              "<=", opts.z_max);
  rep.require("z(mean D_t, closed form)", two_sample_z(d_est, McEstimate::exact(exact.mean_deaths)).z, "<=",
              opts.z_max);

  rep.metadata = {{"t", t},
                  {"rate", r},
                  {"n_reps", opts.n_reps},
                  {"mean_offspring", d.mean()},
                  {"offspring_variance", d.variance()},
                  {"N_t", to_json(n_est)},
                  {"N_t^2", to_json(n2_est)},
                  {"D_t", to_json(d_est)},
                  {"closed_form", {{"E[N_t]", exact.mean_alive},
                                   {"E[N_t^2]", exact.second_moment_alive},
                                   {"E[D_t]", exact.mean_deaths}}}};

  if (d.prob(2) == 1.0) {
    // N_t is geometric with success probability e^{-rt} on {1, 2, ...}.
    const double p = std::exp(-r * t);
    const auto k_max = static_cast<std::size_t>(*std::max_element(cols[0].begin(), cols[0].end()));
    std::vector<double> observed(k_max, 0.0);
    std::vector<double> expected(k_max, 0.0);
    for (double n : cols[0]) observed[static_cast<std::size_t>(n) - 1] += 1.0;
    const double total = static_cast<double>(cols[0].size());
    for (std::size_t k = 1; k <= k_max; ++k) {
      expected[k - 1] = total * p * std::pow(1.0 - p, static_cast<double>(k - 1));
    }
    expected[k_max - 1] = total * std::pow(1.0 - p, static_cast<double>(k_max - 1));  // tail P(N >= k_max)
    const ChiSquareResult chi = chi_square(observed, expected);
    rep.require("chi-square p-value vs geometric law", chi.p_value, ">", opts.min_p_value);
    rep.metadata["chi_square"] = {{"statistic", chi.statistic}, {"dof", chi.dof}, {"p_value", chi.p_value}};
  }
  rep.finalize();
  return rep;
}

CheckReport check_w_law(const BranchingModel& model, const WLawOptions& opts, const CheckContext& ctx) {
  CheckReport rep;
  rep.kind = "w_law";
  const WSample w = estimate_W(model, opts.t, opts.n_reps, derive_key(ctx.seed, kTreeSide), ctx.jobs,
                               opts.build_trees, ctx.caps);
  rep.set_primary(w.summary, McEstimate::exact(1.0), opts.z_max);
  std::vector<double> sorted = w.samples;
  const std::size_t extinct = static_cast<std::size_t>(std::count(sorted.begin(), sorted.end(), 0.0));
  if (model.offspring.prob(2) == 1.0) {
    const double ks = ks_distance(sorted, [](double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); });
    rep.require("KS(W proxy, Exp(1))", ks, "<", opts.ks_max);
  } else {
    std::sort(sorted.begin(), sorted.end());
  }
  const double hi = sorted.empty() ? 1.0 : std::max(sorted.back(), 1e-12);
  const Histogram h = histogram(sorted, 64, 0.0, hi);
  Series hist{"w_histogram", "bin_center", "mass", {}};
  for (std::size_t b = 0; b < h.mass.size(); ++b) {
    hist.points.emplace_back((static_cast<double>(b) + 0.5) * hi / 64.0, h.mass[b]);
  }
  rep.series.push_back(std::move(hist));
  rep.metadata = {{"t", opts.t},
                  {"n_reps", opts.n_reps},
                  {"fast_path", w.fast_path},
                  {"extinct_replicas", extinct},
                  {"model", model_meta(model)}};
  rep.finalize();
  return rep;
}

CheckReport check_many_to_one_fixed(const BranchingModel& model, const LineageFn& f, const FixedTimeOptions& opts,
                                    const CheckContext& ctx) {
  CheckReport rep;
  rep.kind = "many_to_one_fixed";
  const double t = opts.t;
  const double en = expected_alive(model, t);
  const auto lhs_values = run_replicas<double>(opts.n_tree, ctx.jobs, [&](std::size_t i) {
    const auto pop = simulate_population_from(model, t, ctx.caps, RecordSpec::terminal_only(), tree_root_key(ctx, i));
    double acc = 0.0;
    for (const auto& v : pop.alive_lineages(t)) acc += f(v);
    return acc / en;
  });
  const Spine spine(model);
  const auto rhs_values = run_replicas<double>(opts.n_spine, ctx.jobs, [&](std::size_t i) {
    Stream rng(replica_key(ctx, kSpineSide, i));
    SpineState s = spine.start(rng);
    spine.advance_to(s, t, rng);
    return f(s.view());
  });
  const McEstimate lhs = estimate(lhs_values);
  const McEstimate rhs = estimate(rhs_values);
  rep.set_primary(lhs, rhs, opts.z_max);
  if (opts.exact) {
    rep.require("z(lhs, closed form)", two_sample_z(lhs, McEstimate::exact(*opts.exact)).z, "<=", opts.z_max);
    rep.require("z(rhs, closed form)", two_sample_z(rhs, McEstimate::exact(*opts.exact)).z, "<=", opts.z_max);
  }
  rep.metadata = {{"t", t}, {"E[N_t]", en}, {"n_tree", opts.n_tree}, {"n_spine", opts.n_spine},
                  {"model", model_meta(model)}};
  if (opts.exact) rep.metadata["closed_form"] = *opts.exact;
  rep.finalize();
  return rep;
}

CheckReport check_many_to_one_tree(const BranchingModel& model, const TimedLineageFn& f, const WholeTreeOptions& opts,
                                   const CheckContext& ctx) {
  if (opts.quad_points < 2) throw Error(ErrorCode::InvalidArgument, "whole-tree quadrature needs >= 2 points");
  CheckReport rep;
  rep.kind = "many_to_one_tree";
  const double horizon = opts.horizon;
  const double c = model.malthus();

  const auto lhs_values = run_replicas<double>(opts.n_tree, ctx.jobs, [&](std::size_t i) {
    const auto pop =
        simulate_population_from(model, horizon, ctx.caps, RecordSpec::terminal_only(), tree_root_key(ctx, i));
    double acc = 0.0;
    for (const auto& v : pop.dead_lineages(horizon)) acc += f(v.time, v);
    return acc;
  });

  // One spine ensemble on the doubled grid; the base grid is every other node.
  const int q = opts.quad_points;
  const int fine = 2 * q - 1;
  const double h_fine = horizon / static_cast<double>(fine - 1);
  std::vector<double> times(static_cast<std::size_t>(fine));
  for (int k = 0; k < fine; ++k) times[static_cast<std::size_t>(k)] = k == fine - 1 ? horizon : k * h_fine;
  const Spine spine(model);
  const auto rhs_rows = run_replicas<std::array<double, 2>>(opts.n_spine, ctx.jobs, [&](std::size_t i) {
    Stream rng(replica_key(ctx, kSpineSide, i));
    SpineState s = spine.start(rng);
    std::vector<double> values(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
      spine.advance_to(s, times[k], rng);
      values[k] = std::exp(c * times[k]) * f(times[k], s.view());
    }
    std::vector<double> coarse;
    for (std::size_t k = 0; k < values.size(); k += 2) coarse.push_back(values[k]);
    return std::array<double, 2>{model.rate * trapezoid(coarse, 2.0 * h_fine), model.rate * trapezoid(values, h_fine)};
  });
  std::vector<double> coarse_vals;
  std::vector<double> fine_vals;
  for (const auto& row : rhs_rows) {
    coarse_vals.push_back(row[0]);
    fine_vals.push_back(row[1]);
  }
  const McEstimate lhs = estimate(lhs_values);
  const McEstimate rhs = estimate(coarse_vals);
  const McEstimate rhs_fine = estimate(fine_vals);
  rep.set_primary(lhs, rhs, opts.z_max);

  // Quadrature audit: doubling the points must not move the right side by
  // more than one standard error of the comparison.
  const double comparison_se = std::sqrt(lhs.se * lhs.se + rhs.se * rhs.se);
  const double shift = std::abs(rhs_fine.mean - rhs.mean);
  const double shift_in_se = comparison_se > 0.0 ? shift / comparison_se : (shift == 0.0 ? 0.0 : HUGE_VAL);
  if (!rep.require("quadrature shift on doubling / SE", shift_in_se, "<=", 1.0)) {
    rep.error = std::string(to_string(ErrorCode::QuadratureUnderResolved)) +
                ": doubling the quadrature points moved the right side by " + std::to_string(shift_in_se) + " SE";
  }
  if (opts.exact) {
    const double zl = two_sample_z(lhs, McEstimate::exact(*opts.exact)).z;
    rep.require("z(lhs, closed form)", zl, "<=", opts.exact_z_max.value_or(opts.z_max));
    rep.metadata["closed_form"] = *opts.exact;
    rep.metadata["quadrature_relative_error"] = std::abs(rhs.mean - *opts.exact) / std::abs(*opts.exact);
  }
  rep.metadata.update({{"T", horizon},
                       {"quad_points", q},
                       {"rhs_doubled_grid", to_json(rhs_fine)},
                       {"n_tree", opts.n_tree},
                       {"n_spine", opts.n_spine},
                       {"malthus", c},
                       {"model", model_meta(model)}});
  rep.finalize();
  return rep;
}

CheckReport check_fork_second_moment(const BranchingModel& model, const StateFn& f, const StateFn& g,
                                     const ForkOptions& opts, const CheckContext& ctx) {
  CheckReport rep;
  rep.kind = "fork_second_moment";
  const double t = opts.t;
  if (!(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "fork check needs t > 0");
  const auto& d = model.offspring;
  rep.metadata = {{"t", t}, {"n_tree", opts.n_tree}, {"n_spine", opts.n_spine}, {"model", model_meta(model)}};
  if (!d.has_pairs()) {
    rep.set_primary(McEstimate::exact(0.0), McEstimate::exact(0.0), opts.z_max);
    rep.metadata["note"] = std::string(to_string(ErrorCode::DegeneratePairs)) + ": no k >= 2, both sides vanish";
    rep.finalize();
    return rep;
  }
  const double c = model.malthus();
  const double en = expected_alive(model, t);

  const auto lhs_values = run_replicas<double>(opts.n_tree, ctx.jobs, [&](std::size_t i) {
    const auto pop = simulate_population_from(model, t, ctx.caps, RecordSpec::terminal_only(), tree_root_key(ctx, i));
    return sum_over_forks(pop, t, f, g).value / (en * en);
  });

  // Right side: r int_0^t e^{-ca} E[J2(Q_{t-a} f x Q_{t-a} g)(Y_a)] da. Draw a
  // with density proportional to e^{-ca} on [0, t] and H with weight
  // h (h - 1) p_h; each sample then carries the constant weight
  // C = sum_h h (h - 1) p_h * r int_0^t e^{-ca} da.
  const double time_mass = c == 0.0 ? t : -std::expm1(-c * t) / c;
  const double normalizer = d.factorial_moment2() * model.rate * time_mass;
  const Quadrature rule = gauss_legendre(64, 0.0, t);
  double audit = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    audit += rule.weights[k] * d.factorial_moment2() * model.rate * std::exp(-c * rule.nodes[k]);
  }
  const double audit_rel = std::abs(audit - normalizer) / normalizer;
  rep.require("weight audit |C - quadrature| / C", audit_rel, "<=", 1e-9);

  const Spine spine(model);
  const auto rhs_values = run_replicas<double>(opts.n_spine, ctx.jobs, [&](std::size_t i) {
    Stream rng(replica_key(ctx, kSpineSide, i));
    const double u = rng.uniform();
    const double a = c == 0.0 ? u * t : std::min(t, -std::log1p(u * std::expm1(-c * t)) / c);
    SpineState s = spine.start(rng);
    spine.advance_to(s, a, rng);
    auto [left, right] = spine.fork(s, rng);
    spine.advance_to(left, t, rng);
    spine.advance_to(right, t, rng);
    return normalizer * f(left.state) * g(right.state);
  });
  const McEstimate lhs = estimate(lhs_values);
  const McEstimate rhs = estimate(rhs_values);
  rep.set_primary(lhs, rhs, opts.z_max);
  if (opts.closed_form) {
    const TreeMoments m = expected_moments(d, model.rate, t);
    const double exact = (m.second_moment_alive - m.mean_alive) / (m.mean_alive * m.mean_alive);
    rep.require("z(lhs, closed form)", two_sample_z(lhs, McEstimate::exact(exact)).z, "<=", opts.z_max);
    rep.require("z(rhs, closed form)", two_sample_z(rhs, McEstimate::exact(exact)).z, "<=", opts.z_max);
    rep.metadata["closed_form"] = exact;
  }
  rep.metadata["normalizer"] = normalizer;
  rep.metadata["normalizer_quadrature"] = audit;
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------

CheckReport check_lln_alive(const BranchingModel& model, const LlnAliveOptions& opts, const CheckContext& ctx) {
  CheckReport rep;
  rep.kind = "lln_alive";
  if (opts.times.empty()) throw Error(ErrorCode::InvalidArgument, "LLN check needs at least one time");
  std::vector<double> times = opts.times;
  std::sort(times.begin(), times.end());
  const double horizon = times.back();

  using Row = std::vector<std::vector<double>>;
  const auto rows = run_replicas<Row>(opts.n_reps, ctx.jobs, [&](std::size_t i) {
    const auto pop = simulate_population_from(model, horizon, ctx.caps, RecordSpec::at(times), tree_root_key(ctx, i));
    Row out;
    for (double t : times) {
      const auto& snap = pop.snapshot(t);
      std::vector<double> xs;
      xs.reserve(snap.states.size());
      for (const State& s : snap.states) xs.push_back(s.x);
      out.push_back(std::move(xs));
    }
    return out;
  });

  std::size_t survivors = 0;
  for (const auto& row : rows) survivors += row.back().empty() ? 0 : 1;
  rep.metadata = {{"times", times}, {"n_reps", opts.n_reps}, {"surviving", survivors}, {"model", model_meta(model)}};
  if (survivors == 0) {
    rep.error = std::string(to_string(ErrorCode::AllExtinct)) + ": no replica survives to t=" + std::to_string(horizon);
    rep.finalize();
    return rep;
  }

  std::optional<StationaryEstimate> stationary;
  std::function<double(double)> oracle_cdf = opts.analytic_cdf;
  if (!oracle_cdf) {
    Stream rng(derive_key(ctx.seed, kOracleSide));
    stationary = estimate_stationary(model, opts.stationary, rng);
    rep.metadata["oracle"] = {{"kind", "stationary_run"},
                              {"run_length", opts.stationary.run_length},
                              {"samples", stationary->samples.size()},
                              {"moments", {to_json(stationary->moments[0]), to_json(stationary->moments[1]),
                                           to_json(stationary->moments[2]), to_json(stationary->moments[3])}}};
  } else {
    rep.metadata["oracle"] = {{"kind", "analytic"}, {"law", opts.analytic_label}};
  }

  Series ks_series{"lln_ks", "t", "ks_distance", {}};
  std::vector<double> ks_values;
  nlohmann::json per_time = nlohmann::json::array();
  double sup_second_moment = 0.0;
  for (std::size_t j = 0; j < times.size(); ++j) {
    std::vector<double> pooled;
    std::vector<double> num_x, num_x2, num_gauss, den;
    for (const auto& row : rows) {
      if (row.back().empty() || row[j].empty()) continue;
      const auto& xs = row[j];
      pooled.insert(pooled.end(), xs.begin(), xs.end());
      double sx = 0.0, sx2 = 0.0, sg = 0.0;
      for (double x : xs) {
        sx += x;
        sx2 += x * x;
        sg += std::exp(-x * x);
      }
      num_x.push_back(sx);
      num_x2.push_back(sx2);
      num_gauss.push_back(sg);
      den.push_back(static_cast<double>(xs.size()));
    }
    std::sort(pooled.begin(), pooled.end());
    const double ks = stationary ? ks_distance_sorted(pooled, stationary->sorted) : ks_distance(pooled, oracle_cdf);
    ks_values.push_back(ks);
    ks_series.points.emplace_back(times[j], ks);
    nlohmann::json entry = {{"t", times[j]}, {"ks", ks}, {"particles", pooled.size()}};
    if (!den.empty()) {
      const McEstimate mx = ratio_estimate(num_x, den);
      const McEstimate mx2 = ratio_estimate(num_x2, den);
      const McEstimate mg = ratio_estimate(num_gauss, den);
      sup_second_moment = std::max(sup_second_moment, mx2.mean);
      entry["battery"] = {{"x", to_json(mx)}, {"x2", to_json(mx2)}, {"gauss", to_json(mg)}};
      if (stationary) {
        const McEstimate px = stationary->mean_of([](const State& s) { return s.x; });
        const McEstimate px2 = stationary->mean_of([](const State& s) { return s.x * s.x; });
        const McEstimate pg = stationary->mean_of([](const State& s) { return std::exp(-s.x * s.x); });
        entry["battery_z"] = {{"x", number(two_sample_z(mx, px).z)},
                              {"x2", number(two_sample_z(mx2, px2).z)},
                              {"gauss", number(two_sample_z(mg, pg).z)}};
      }
    }
    per_time.push_back(std::move(entry));
  }
  rep.metadata["per_time"] = std::move(per_time);
  rep.metadata["advisory"] = {{"sup_t mean x^2 per particle", sup_second_moment}};
  rep.series.push_back(std::move(ks_series));

  rep.require("surviving replicas", static_cast<double>(survivors), ">=", static_cast<double>(opts.min_surviving));
  rep.require("KS at t=" + std::to_string(horizon), ks_values.back(), "<", opts.ks_max);
  if (ks_values.size() > 1) {
    double worst_rise = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j < ks_values.size(); ++j) worst_rise = std::max(worst_rise, ks_values[j] - ks_values[j - 1]);
    rep.require("largest KS increase between successive times", worst_rise, "<=", opts.trend_slack);
    rep.require("KS(last) - KS(first)", ks_values.back() - ks_values.front(), "<", 0.0);
  }
  rep.lhs = McEstimate::exact(ks_values.back());
  rep.rhs = McEstimate::exact(0.0);
  rep.z_max = opts.ks_max;
  rep.z = ks_values.back();
  rep.finalize();
  return rep;
}

CheckReport check_lln_dead(const BranchingModel& model, const LlnDeadOptions& opts, const CheckContext& ctx) {
  CheckReport rep;
  rep.kind = "lln_dead";
  if (!(model.offspring.mean() > 1.0)) throw Error(ErrorCode::Subcritical, "dead-population LLN needs m > 1");
  const double t = opts.t;
  const SmoothFunction fn = smooth_function(opts.function);
  const StateFn f = [&fn](const State& s) { return fn.f(s.x); };
  const double ed = expected_moments(model.offspring, model.rate, t).mean_deaths;

  const auto rows = run_replicas<std::array<double, 3>>(opts.n_reps, ctx.jobs, [&](std::size_t i) {
    const auto pop = simulate_population_from(model, t, ctx.caps, RecordSpec::terminal_only(), tree_root_key(ctx, i));
    double at_death = 0.0;
    double at_birth = 0.0;
    const auto nodes = pop.tree().nodes();
    for (NodeIndex k = 0; k < nodes.size(); ++k) {
      if (nodes[k].death < t) {
        at_death += f(pop.end_state(k));
        at_birth += f(pop.birth_state(k));
      }
    }
    return std::array<double, 3>{at_death / ed, at_birth / ed, w_proxy(model, pop.tree().count_alive(t), t)};
  });
  std::vector<double> dead, born, w;
  for (const auto& row : rows) {
    dead.push_back(row[0]);
    born.push_back(row[1]);
    w.push_back(row[2]);
  }

  Stream rng(derive_key(ctx.seed, kOracleSide));
  const StationaryEstimate pi = estimate_stationary(model, opts.stationary, rng);
  const McEstimate pi_f = pi.mean_of(f, opts.stationary.batches);
  // Lifetime-start functional: <pi, J1 f> / m, with J1 exact.
  Stream j1_rng(derive_key(ctx.seed, kOracleSide + 1));
  const double m = model.offspring.mean();
  const McEstimate pi_j1 = pi.mean_of(
      [&](const State& s) { return apply_j1(model, f, s, OperatorMode::Exact, 2, j1_rng).mean / m; },
      opts.stationary.batches);
  const McEstimate w_est = estimate(w);
  auto scaled = [&](const McEstimate& a) {
    McEstimate out;
    out.mean = a.mean * w_est.mean;
    out.se = std::hypot(a.mean * w_est.se, w_est.mean * a.se);
    out.n = w_est.n;
    return out;
  };
  const McEstimate rhs = scaled(pi_f);
  const McEstimate rhs_j1 = scaled(pi_j1);
  const McEstimate lhs = estimate(dead);
  const McEstimate lhs_j1 = estimate(born);
  rep.set_primary(lhs, rhs, opts.z_max);
  rep.require("z(lifetime-start sum, <pi, J1 f>/m W)", nan_to_inf(two_sample_z(lhs_j1, rhs_j1).z), "<=", opts.z_max);
  rep.metadata = {{"t", t},
                  {"function", fn.name},
                  {"E[D_t]", ed},
                  {"n_reps", opts.n_reps},
                  {"<pi,f>", to_json(pi_f)},
                  {"<pi,J1 f>/m", to_json(pi_j1)},
                  {"W", to_json(w_est)},
                  {"lifetime_start_lhs", to_json(lhs_j1)},
                  {"lifetime_start_rhs", to_json(rhs_j1)},
                  {"model", model_meta(model)}};
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------

LevyMoments levy_clt_moments(const BranchingModel& model) {
  double drift = 0.0;
  double variance = 0.0;
  if (const auto& levy = model.motion.levy_parameters()) {
    double total = 0.0;
    for (const auto& a : levy->jumps) total += a.prob;
    drift = levy->drift;
    variance = levy->vol * levy->vol;
    for (const auto& a : levy->jumps) {
      const double mass = levy->jump_rate * a.prob / total;
      if (std::abs(a.size) >= 1.0) drift += mass * a.size;
      variance += mass * a.size * a.size;
    }
  } else if (const auto* bm = std::get_if<BrownianMotion>(&model.motion.base()); bm && !model.motion.has_jumps()) {
    drift = bm->drift;
    variance = bm->vol * bm->vol;
  } else {
    throw Error(ErrorCode::InvalidArgument, "the Levy CLT needs a Brownian or finite-activity Levy motion");
  }
  // Displacements at branching, read off the kernel at x = 0.
  const Quadrature& rule = gauss_legendre(64, 0.0, 1.0);
  for (const auto& atom : model.offspring.support()) {
    if (atom.k == 0) continue;
    double s1 = 0.0;
    double s2 = 0.0;
    auto add = [&](double weight, const std::vector<State>& children) {
      for (const State& c : children) {
        s1 += weight * c.x;
        s2 += weight * c.x * c.x;
      }
    };
    if (model.kernel.theta_free()) {
      add(1.0, model.kernel.positions_at_uniform(State{0.0, 0}, atom.k, 0.5));
    } else if (model.kernel.has_uniform_form()) {
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        add(rule.weights[i], model.kernel.positions_at_uniform(State{0.0, 0}, atom.k, rule.nodes[i]));
      }
    } else {
      throw Error(ErrorCode::InvalidArgument, "the Levy CLT needs a kernel with an integrable displacement law");
    }
    drift += model.rate * atom.p * s1;
    variance += model.rate * atom.p * s2;
  }
  return {drift, variance};
}

CheckReport check_levy_clt(const BranchingModel& model, const LevyCltOptions& opts, const CheckContext& ctx) {
  CheckReport rep;
  rep.kind = "levy_clt";
  const double t = opts.t;
  const LevyMoments lm = levy_clt_moments(model);
  const double root_t = std::sqrt(t);
  const auto rows = run_replicas<std::vector<double>>(opts.n_reps, ctx.jobs, [&](std::size_t i) {
    const auto pop = simulate_population_from(model, t, ctx.caps, RecordSpec::terminal_only(), tree_root_key(ctx, i));
    const auto& snap = pop.snapshot(t);
    std::vector<double> zs;
    zs.reserve(snap.states.size());
    for (const State& s : snap.states) zs.push_back((s.x - lm.drift * t) / root_t);
    return zs;
  });
  std::vector<double> pooled, s1, s2, n;
  for (const auto& zs : rows) {
    if (zs.empty()) continue;
    double a = 0.0, b = 0.0;
    for (double z : zs) {
      a += z;
      b += z * z;
    }
    s1.push_back(a);
    s2.push_back(b);
    n.push_back(static_cast<double>(zs.size()));
    pooled.insert(pooled.end(), zs.begin(), zs.end());
  }
  rep.metadata = {{"t", t}, {"n_reps", opts.n_reps}, {"drift", lm.drift}, {"variance", lm.variance},
                  {"surviving", n.size()}, {"particles", pooled.size()}, {"model", model_meta(model)}};
  if (n.size() < 2) {
    rep.error = std::string(to_string(ErrorCode::AllExtinct)) + ": fewer than two surviving replicas";
    rep.finalize();
    return rep;
  }
  const McEstimate mean = ratio_estimate(s1, n);
  const McEstimate second = ratio_estimate(s2, n);
  const double var = second.mean - mean.mean * mean.mean;
  rep.set_primary(mean, McEstimate::exact(0.0), opts.z_max);
  rep.require("|pooled variance / Sigma - 1|", std::abs(var / lm.variance - 1.0), "<=", opts.var_rel_tol);
  std::sort(pooled.begin(), pooled.end());
  const double sd = std::sqrt(lm.variance);
  std::vector<double> copy = pooled;
  const double ks = ks_distance(copy, [sd](double x) { return normal_cdf(x, 0.0, sd); });
  rep.require("KS(pooled, N(0, Sigma))", ks, "<", opts.ks_max);
  Series qq{"clt_qq", "theoretical", "empirical", {}};
  for (int k = 1; k <= 99; ++k) {
    const double p = k / 100.0;
    qq.points.emplace_back(sd * normal_quantile(p), quantile_sorted(pooled, p));
  }
  rep.series.push_back(std::move(qq));
  rep.metadata["pooled_variance"] = var;
  rep.metadata["pooled_second_moment"] = to_json(second);
  rep.metadata["ks"] = ks;
  rep.finalize();
  return rep;
}

CheckReport check_fluctuation_bracket(const BranchingModel& model, const FluctuationOptions& opts,
                                      const CheckContext& ctx) {
  CheckReport rep;
  rep.kind = "fluctuation_bracket";
  if (model.offspring.prob(2) != 1.0) throw Error(ErrorCode::InvalidArgument, "fluctuation check needs binary splitting");
  if (!model.kernel.has_uniform_form()) {
    throw Error(ErrorCode::InvalidArgument, "fluctuation check needs a kernel driven by one uniform");
  }
  if (model.motion.has_jumps()) throw Error(ErrorCode::InvalidArgument, "fluctuation check needs a pure diffusion");
  if (!(opts.grid > 0.0) || opts.t < 0.0) throw Error(ErrorCode::InvalidArgument, "bad fluctuation grid or time");

  const SmoothFunction fn = smooth_function(opts.function);
  const double r = model.rate;
  const auto steps = static_cast<std::size_t>(std::llround(opts.t / opts.grid));
  if (std::abs(static_cast<double>(steps) * opts.grid - opts.t) > 1e-9 * std::max(1.0, opts.t)) {
    throw Error(ErrorCode::InvalidArgument, "t must be a multiple of the grid");
  }
  std::vector<double> times(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) times[k] = k == steps ? opts.T + opts.t : opts.T + static_cast<double>(k) * opts.grid;
  const Quadrature rule = gauss_legendre(opts.quad_points, 0.0, 1.0);

  // (L + J) f with J f = -(3r/2) f + r int (f(F_1) + f(F_2)) du, and the
  // bracket density r int (f(F_1) + f(F_2) - f)^2 du + sigma^2 f'^2.
  auto local_terms = [&](const State& s) {
    const double fx = fn.f(s.x);
    const double d1 = fn.df(s.x);
    const double b = model.motion.drift_at(s);
    const double sigma = model.motion.vol_at(s);
    double split = 0.0;
    double jump_sq = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const auto children = model.kernel.positions_at_uniform(s, 2, rule.nodes[i]);
      const double fa = fn.f(children[0].x);
      const double fb = fn.f(children[1].x);
      split += rule.weights[i] * (fa + fb);
      jump_sq += rule.weights[i] * (fa + fb - fx) * (fa + fb - fx);
    }
    const double drift_term = b * d1 + 0.5 * sigma * sigma * fn.d2f(s.x) - 1.5 * r * fx + r * split;
    const double bracket = r * jump_sq + sigma * sigma * d1 * d1;
    return std::pair<double, double>{drift_term, bracket};
  };

  const bool halvable = steps >= 2 && steps % 2 == 0;
  // Row: M at grid h, bracket at h, M at grid 2h, W proxy at T.
  const auto rows = run_replicas<std::array<double, 4>>(opts.n_reps, ctx.jobs, [&](std::size_t i) {
    const auto pop =
        simulate_population_from(model, opts.T + opts.t, ctx.caps, RecordSpec::at(times), tree_root_key(ctx, i));
    std::vector<double> drift_vals(times.size());
    std::vector<double> bracket_vals(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
      double a = 0.0;
      double b = 0.0;
      for (const State& s : pop.snapshot(times[k]).states) {
        const auto [da, db] = local_terms(s);
        a += da;
        b += db;
      }
      drift_vals[k] = a * std::exp(-0.5 * r * times[k]);
      bracket_vals[k] = b * std::exp(-r * times[k]);
    }
    auto total_f = [&](double t) {
      double acc = 0.0;
      for (const State& s : pop.snapshot(t).states) acc += fn.f(s.x);
      return acc;
    };
    const double start = total_f(times.front()) * std::exp(-0.5 * r * times.front());
    const double end = total_f(times.back()) * std::exp(-0.5 * r * times.back());
    const double m_fine = end - start - trapezoid(drift_vals, opts.grid);
    double m_coarse = m_fine;
    if (halvable) {
      std::vector<double> coarse;
      for (std::size_t k = 0; k < drift_vals.size(); k += 2) coarse.push_back(drift_vals[k]);
      m_coarse = end - start - trapezoid(coarse, 2.0 * opts.grid);
    }
    const double w = w_proxy(model, pop.snapshot(times.front()).nodes.size(), opts.T);
    return std::array<double, 4>{m_fine, trapezoid(bracket_vals, opts.grid), m_coarse, w};
  });

  std::vector<double> m_vals, br_vals, m2_vals, w_vals;
  for (const auto& row : rows) {
    m_vals.push_back(row[0]);
    br_vals.push_back(row[1]);
    m2_vals.push_back(row[2]);
    w_vals.push_back(row[3]);
  }
  const McEstimate m_est = estimate(m_vals);
  const McEstimate br_est = estimate(br_vals);
  const McEstimate m2_est = estimate(m2_vals);
  const double var_m = m_est.se * m_est.se * static_cast<double>(m_est.n);
  const double var_m2 = m2_est.se * m2_est.se * static_cast<double>(m2_est.n);
  rep.set_primary(m_est, McEstimate::exact(0.0), opts.z_max);
  auto rel = [](double a, double b) {
    if (a == 0.0 && b == 0.0) return 0.0;
    return std::abs(a - b) / std::abs(b);
  };
  rep.require("|Var(M) - mean bracket| / mean bracket", rel(var_m, br_est.mean), "<=", opts.tol_rel);
  if (halvable) {
    const double shift = rel(var_m2, var_m);
    if (!rep.require("|Var(M, 2h) - Var(M, h)| / Var(M, h)", shift, "<=", opts.tol_rel / 2.0)) {
      rep.error = std::string(to_string(ErrorCode::GridUnderResolved)) + ": variance moved by " +
                  std::to_string(shift) + " between grids h and 2h";
    }
  }
  rep.metadata = {{"T", opts.T},
                  {"t", opts.t},
                  {"grid", opts.grid},
                  {"function", fn.name},
                  {"n_reps", opts.n_reps},
                  {"var_M", var_m},
                  {"var_M_coarse", var_m2},
                  {"bracket", to_json(br_est)},
                  {"W_T", to_json(estimate(w_vals))},
                  {"diffusion_convention", "dX = b dt + sigma dB, L f = b f' + sigma^2 f'' / 2"},
                  {"model", model_meta(model)}};
  if (opts.stationary_variance) {
    // Informational: V(f) = <pi, bracket density>, compared with bracket / (t W).
    Stream rng(derive_key(ctx.seed, kOracleSide));
    const StationaryEstimate pi = estimate_stationary(model, opts.stationary, rng);
    const McEstimate v = pi.mean_of([&](const State& s) { return local_terms(s).second; }, opts.stationary.batches);
    const double wt = estimate(w_vals).mean;
    rep.metadata["V(f)"] = to_json(v);
    rep.metadata["V(f) t mean(W)"] = v.mean * opts.t * wt;
  }
  rep.finalize();
  return rep;
}

CheckReport check_ancestral_window(const BranchingModel& model, const WindowOptions& opts, const CheckContext& ctx) {
  CheckReport rep;
  rep.kind = "ancestral_window";
  const double t = opts.t;
  const double from = t - opts.window;
  const double en = expected_alive(model, t);
  const auto lhs_values = run_replicas<double>(opts.n_tree, ctx.jobs, [&](std::size_t i) {
    RecordSpec rec = RecordSpec::paths(opts.grid);
    const auto pop = simulate_population_from(model, t, ctx.caps, rec, tree_root_key(ctx, i));
    return ancestral_window_functional(pop, t, opts.window,
                                       [](const LineageWindow& w) { return w.branch_times.empty() ? 0.0 : 1.0; })
               .value /
           en;
  });
  const Spine spine(model);
  const auto rhs_values = run_replicas<double>(opts.n_spine, ctx.jobs, [&](std::size_t i) {
    Stream rng(replica_key(ctx, kSpineSide, i));
    SpineState s = spine.start(rng);
    spine.advance_to(s, t, rng);
    return s.last_jump > from ? 1.0 : 0.0;
  });
  const McEstimate lhs = estimate(lhs_values);
  const McEstimate rhs = estimate(rhs_values);
  const double exact = -std::expm1(-spine.jump_rate() * opts.window);
  rep.set_primary(lhs, rhs, opts.z_max);
  rep.require("z(rhs, 1 - exp(-r m T))", two_sample_z(rhs, McEstimate::exact(exact)).z, "<=", opts.z_max);
  rep.metadata = {{"t", t}, {"window", opts.window}, {"grid", opts.grid}, {"closed_form", exact},
                  {"n_tree", opts.n_tree}, {"n_spine", opts.n_spine}, {"model", model_meta(model)}};
  rep.finalize();
  return rep;
}

}  // namespace gwspine
