#include "gwspine/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "gwspine/models.hpp"

namespace gwspine {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

// ---- YAML <-> JSON ---------------------------------------------------------

json scalar_to_json(const YAML::Node& node) {
  const std::string& s = node.Scalar();
  if (node.Tag() == "!") return s;  // quoted
  if (s == "~" || s == "null" || s == "Null" || s == "NULL") return nullptr;
  if (s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "False" || s == "FALSE") return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && s[0] != '+') {
    std::int64_t i = 0;
    if (auto [p, ec] = std::from_chars(first, last, i); ec == std::errc() && p == last) return i;
    std::uint64_t u = 0;
    if (auto [p, ec] = std::from_chars(first, last, u); ec == std::errc() && p == last) return u;
    double d = 0.0;
    if (auto [p, ec] = std::from_chars(first, last, d); ec == std::errc() && p == last) return d;
  }
  if (s == ".inf" || s == ".Inf") return std::numeric_limits<double>::infinity();
  return s;
}

json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Scalar:
      return scalar_to_json(node);
    case YAML::NodeType::Sequence: {
      json out = json::array();
      for (const auto& item : node) out.push_back(yaml_to_json(item));
      return out;
    }
    case YAML::NodeType::Map: {
      json out = json::object();
      for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (out.contains(key)) config_error("duplicate key '" + key + "'");
        out[key] = yaml_to_json(kv.second);
      }
      return out;
    }
  }
  return nullptr;
}

std::string format_double(double v) {
  if (!std::isfinite(v)) config_error("non-finite numbers cannot be written to a config");
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, p);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

void emit_json(YAML::Emitter& out, const json& j) {
  switch (j.type()) {
    case json::value_t::null:
      out << YAML::Null;
      break;
    case json::value_t::boolean:
      out << j.get<bool>();
      break;
    case json::value_t::number_integer:
      out << j.get<std::int64_t>();
      break;
    case json::value_t::number_unsigned:
      out << j.get<std::uint64_t>();
      break;
    case json::value_t::number_float:
      out << format_double(j.get<double>());
      break;
    case json::value_t::string:
      out << YAML::DoubleQuoted << j.get<std::string>();
      break;
    case json::value_t::array: {
      const bool flat = std::all_of(j.begin(), j.end(), [](const json& v) { return v.is_primitive(); });
      if (flat) out << YAML::Flow;
      out << YAML::BeginSeq;
      for (const auto& v : j) emit_json(out, v);
      out << YAML::EndSeq;
      break;
    }
    case json::value_t::object: {
      out << YAML::BeginMap;
      for (const auto& [k, v] : j.items()) {
        out << YAML::Key << YAML::DoubleQuoted << k << YAML::Value;
        emit_json(out, v);
      }
      out << YAML::EndMap;
      break;
    }
    default:
      config_error("value cannot be written to a config");
  }
}

// ---- typed access --------------------------------------------------------

void only_keys(const json& obj, std::initializer_list<std::string_view> keys, const std::string& where) {
  for (const auto& [k, v] : obj.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) config_error("unknown key '" + k + "' in " + where);
  }
}

std::string get_string(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_string()) config_error(std::string(key) + " in " + where + " must be a string");
  return v.get<std::string>();
}

json get_map(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return json::object();
  const json& v = obj.at(key);
  if (!v.is_object()) config_error(std::string(key) + " in " + where + " must be a map");
  return v;
}

template <class T>
T param(const json& p, const char* key, T fallback) {
  if (!p.contains(key)) return fallback;
  const json& v = p.at(key);
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, int>) {
      if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d != std::floor(d) || d < 0.0) throw Error(ErrorCode::ConfigError, std::string(key) + " must be a count");
        return static_cast<T>(d);
      }
      if (v.is_number_integer() && v.get<std::int64_t>() < 0) {
        throw Error(ErrorCode::ConfigError, std::string(key) + " must be nonnegative");
      }
    }
    return v.get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ConfigError, std::string("parameter ") + key + " has the wrong type");
  }
}

// ---- check kinds ----------------------------------------------------------

const std::vector<std::pair<std::string, std::vector<std::string>>> kKinds = {
    {"tree_moments", {"offspring", "rate", "t", "n_reps", "z_max", "min_p_value"}},
    {"w_law", {"t", "n_reps", "ks_max", "z_max", "build_trees"}},
    {"many_to_one_fixed", {"function", "t", "n_tree", "n_spine", "z_max", "exact"}},
    {"many_to_one_tree",
     {"function", "discount", "horizon", "n_tree", "n_spine", "quad_points", "z_max", "exact", "exact_deaths",
      "exact_z_max"}},
    {"fork_second_moment", {"f", "g", "t", "n_tree", "n_spine", "z_max", "closed_form"}},
    {"lln_alive",
     {"times", "n_reps", "min_surviving", "ks_max", "trend_slack", "analytic", "run_length", "burn_in", "spacing",
      "batches"}},
    {"lln_dead", {"t", "n_reps", "z_max", "function", "run_length", "burn_in", "spacing", "batches"}},
    {"levy_clt", {"t", "n_reps", "z_max", "var_rel_tol", "ks_max"}},
    {"fluctuation_bracket",
     {"T", "t", "grid", "n_reps", "tol_rel", "z_max", "quad_points", "function", "stationary_variance", "run_length",
      "burn_in", "spacing", "batches"}},
    {"ancestral_window", {"t", "window", "grid", "n_tree", "n_spine", "z_max"}},
};

const std::vector<std::string>* kind_keys(std::string_view kind) {
  for (const auto& [k, keys] : kKinds) {
    if (k == kind) return &keys;
  }
  return nullptr;
}

bool needs_model(std::string_view kind) { return kind != "tree_moments"; }

void validate_check(const CheckConfig& c) {
  const std::string where = "check '" + c.name + "'";
  if (c.name.empty()) config_error("every check needs a name");
  const auto* keys = kind_keys(c.kind);
  if (!keys) config_error("unknown check kind '" + c.kind + "' in " + where);
  for (const auto& [k, v] : c.params.items()) {
    if (k != "max_nodes" && std::find(keys->begin(), keys->end(), k) == keys->end()) {
      config_error("unknown parameter '" + k + "' for kind " + c.kind + " in " + where);
    }
  }
  if (needs_model(c.kind) && c.model.empty()) config_error(where + " needs a model");
  if (!needs_model(c.kind) && !c.model.empty()) config_error(where + " takes no model");
  if (!c.model.empty()) {
    try {
      (void)build_model(c.model, c.model_overrides);
    } catch (const Error& e) {
      config_error(std::string(e.what()) + " in " + where);
    }
  }
}

StationaryOptions stationary_options(const json& p, StationaryOptions base) {
  base.run_length = param(p, "run_length", base.run_length);
  base.burn_in = param(p, "burn_in", base.burn_in);
  base.spacing = param(p, "spacing", base.spacing);
  base.batches = param(p, "batches", base.batches);
  return base;
}

CheckReport dispatch(const CheckConfig& c, const CheckContext& ctx) {
  const json& p = c.params;
  if (c.kind == "tree_moments") {
    OffspringDistribution d = OffspringDistribution::yule();
    if (p.contains("offspring")) {
      // Reuse the catalog's parser through a model override.
      d = build_model("yule_equal_split", json{{"offspring", p.at("offspring")}}).model.offspring;
    }
    TreeMomentsOptions o;
    o.t = param(p, "t", o.t);
    o.n_reps = param(p, "n_reps", o.n_reps);
    o.z_max = param(p, "z_max", o.z_max);
    o.min_p_value = param(p, "min_p_value", o.min_p_value);
    return check_tree_moments(d, param(p, "rate", 1.0), o, ctx);
  }

  const BuiltModel built = build_model(c.model, c.model_overrides);
  const BranchingModel& model = built.model;
  CheckReport rep;

  if (c.kind == "w_law") {
    WLawOptions o;
    o.t = param(p, "t", o.t);
    o.n_reps = param(p, "n_reps", o.n_reps);
    o.ks_max = param(p, "ks_max", o.ks_max);
    o.z_max = param(p, "z_max", o.z_max);
    o.build_trees = param(p, "build_trees", o.build_trees);
    rep = check_w_law(model, o, ctx);
  } else if (c.kind == "many_to_one_fixed") {
    FixedTimeOptions o;
    o.t = param(p, "t", o.t);
    o.n_tree = param(p, "n_tree", o.n_tree);
    o.n_spine = param(p, "n_spine", o.n_spine);
    o.z_max = param(p, "z_max", o.z_max);
    if (p.contains("exact")) o.exact = param(p, "exact", 0.0);
    const SmoothFunction fn = smooth_function(param<std::string>(p, "function", "x2"));
    rep = check_many_to_one_fixed(model, [&](const LineageView& v) { return fn.f(v.state.x); }, o, ctx);
    rep.metadata["function"] = fn.name;
  } else if (c.kind == "many_to_one_tree") {
    WholeTreeOptions o;
    o.horizon = param(p, "horizon", o.horizon);
    o.n_tree = param(p, "n_tree", o.n_tree);
    o.n_spine = param(p, "n_spine", o.n_spine);
    o.quad_points = param(p, "quad_points", o.quad_points);
    o.z_max = param(p, "z_max", o.z_max);
    if (p.contains("exact")) o.exact = param(p, "exact", 0.0);
    if (param(p, "exact_deaths", false)) {
      o.exact = expected_moments(model.offspring, model.rate, o.horizon).mean_deaths;
    }
    if (p.contains("exact_z_max")) o.exact_z_max = param(p, "exact_z_max", 1.0);
    const SmoothFunction fn = smooth_function(param<std::string>(p, "function", "x2"));
    const double discount = param(p, "discount", 0.0);
    rep = check_many_to_one_tree(
        model, [&](double s, const LineageView& v) { return std::exp(-discount * s) * fn.f(v.state.x); }, o, ctx);
    rep.metadata["function"] = "exp(-" + format_double(discount) + " s) " + fn.name;
  } else if (c.kind == "fork_second_moment") {
    ForkOptions o;
    o.t = param(p, "t", o.t);
    o.n_tree = param(p, "n_tree", o.n_tree);
    o.n_spine = param(p, "n_spine", o.n_spine);
    o.z_max = param(p, "z_max", o.z_max);
    o.closed_form = param(p, "closed_form", o.closed_form);
    const SmoothFunction f = smooth_function(param<std::string>(p, "f", "one"));
    const SmoothFunction g = smooth_function(param<std::string>(p, "g", "one"));
    rep = check_fork_second_moment(
        model, [&](const State& s) { return f.f(s.x); }, [&](const State& s) { return g.f(s.x); }, o, ctx);
    rep.metadata["f"] = f.name;
    rep.metadata["g"] = g.name;
  } else if (c.kind == "lln_alive") {
    LlnAliveOptions o;
    o.times = param(p, "times", o.times);
    o.n_reps = param(p, "n_reps", o.n_reps);
    o.min_surviving = param(p, "min_surviving", o.min_surviving);
    o.ks_max = param(p, "ks_max", o.ks_max);
    o.trend_slack = param(p, "trend_slack", o.trend_slack);
    o.stationary = stationary_options(p, o.stationary);
    const auto analytic = param<std::string>(p, "analytic", "");
    if (analytic == "ou") {
      if (c.model != "yule_splitted_ou") {
        throw Error(ErrorCode::InvalidArgument, "the analytic OU law needs the yule_splitted_ou model");
      }
      const double k = built.parameters.at("ou_rate").get<double>();
      const double mu = built.parameters.at("ou_mean").get<double>();
      const double vol = built.parameters.at("vol").get<double>();
      const double sd = vol / std::sqrt(2.0 * k);
      o.analytic_cdf = [mu, sd](double x) { return normal_cdf(x, mu, sd); };
      o.analytic_label = "N(" + format_double(mu) + ", " + format_double(sd * sd) + ")";
    } else if (!analytic.empty()) {
      throw Error(ErrorCode::InvalidArgument, "unknown analytic law '" + analytic + "'");
    }
    rep = check_lln_alive(model, o, ctx);
  } else if (c.kind == "lln_dead") {
    LlnDeadOptions o;
    o.t = param(p, "t", o.t);
    o.n_reps = param(p, "n_reps", o.n_reps);
    o.z_max = param(p, "z_max", o.z_max);
    o.function = param(p, "function", o.function);
    o.stationary = stationary_options(p, o.stationary);
    rep = check_lln_dead(model, o, ctx);
  } else if (c.kind == "levy_clt") {
    LevyCltOptions o;
    o.t = param(p, "t", o.t);
    o.n_reps = param(p, "n_reps", o.n_reps);
    o.z_max = param(p, "z_max", o.z_max);
    o.var_rel_tol = param(p, "var_rel_tol", o.var_rel_tol);
    o.ks_max = param(p, "ks_max", o.ks_max);
    rep = check_levy_clt(model, o, ctx);
  } else if (c.kind == "fluctuation_bracket") {
    FluctuationOptions o;
    o.T = param(p, "T", o.T);
    o.t = param(p, "t", o.t);
    o.grid = param(p, "grid", o.grid);
    o.n_reps = param(p, "n_reps", o.n_reps);
    o.tol_rel = param(p, "tol_rel", o.tol_rel);
    o.z_max = param(p, "z_max", o.z_max);
    o.quad_points = param(p, "quad_points", o.quad_points);
    o.function = param(p, "function", o.function);
    o.stationary_variance = param(p, "stationary_variance", o.stationary_variance);
    o.stationary = stationary_options(p, o.stationary);
    rep = check_fluctuation_bracket(model, o, ctx);
  } else if (c.kind == "ancestral_window") {
    WindowOptions o;
    o.t = param(p, "t", o.t);
    o.window = param(p, "window", o.window);
    o.grid = param(p, "grid", o.grid);
    o.n_tree = param(p, "n_tree", o.n_tree);
    o.n_spine = param(p, "n_spine", o.n_spine);
    o.z_max = param(p, "z_max", o.z_max);
    rep = check_ancestral_window(model, o, ctx);
  } else {
    throw Error(ErrorCode::UnknownCheck, "unknown check kind '" + c.kind + "'");
  }
  rep.metadata["model_parameters"] = built.parameters;
  if (!built.warnings.empty()) rep.metadata["warnings"] = built.warnings;
  return rep;
}

json check_to_json(const CheckConfig& c) {
  json out = {{"name", c.name}, {"kind", c.kind}};
  if (!c.model.empty()) out["model"] = c.model;
  if (!c.model_overrides.empty()) out["model_overrides"] = c.model_overrides;
  if (!c.params.empty()) out["params"] = c.params;
  return out;
}

}  // namespace

// ---- config ---------------------------------------------------------------

const std::vector<std::pair<std::string, std::vector<std::string>>>& check_kinds() { return kKinds; }

ExperimentConfig ExperimentConfig::parse(std::string_view yaml) {
  json root;
  try {
    root = yaml_to_json(YAML::Load(std::string(yaml)));
  } catch (const YAML::Exception& e) {
    config_error(std::string("YAML: ") + e.what());
  }
  if (root.is_null()) root = json::object();
  if (!root.is_object()) config_error("the config must be a map");
  only_keys(root, {"seed", "jobs", "out_dir", "max_nodes", "suite", "checks", "simulate"}, "the config");

  ExperimentConfig cfg;
  try {
    if (root.contains("seed")) {
      const json& s = root.at("seed");
      if (!s.is_number_integer()) config_error("seed must be an integer");
      cfg.seed = s.is_number_unsigned() ? s.get<std::uint64_t>() : static_cast<std::uint64_t>(s.get<std::int64_t>());
    }
    if (root.contains("jobs")) {
      const json& j = root.at("jobs");
      if (!j.is_number_integer() || j.get<std::int64_t>() < 1) config_error("jobs must be a positive integer");
      cfg.jobs = j.get<unsigned>();
    }
    if (root.contains("out_dir")) cfg.out_dir = get_string(root, "out_dir", "the config");
    if (root.contains("max_nodes")) {
      const json& m = root.at("max_nodes");
      if (!m.is_number_integer() || m.get<std::int64_t>() < 1) config_error("max_nodes must be a positive integer");
      cfg.max_nodes = m.get<std::size_t>();
    }
    if (root.contains("suite") && !root.at("suite").is_null()) {
      cfg.suite = get_string(root, "suite", "the config");
      const auto names = suite_names();
      if (std::find(names.begin(), names.end(), cfg.suite) == names.end()) config_error("unknown suite '" + cfg.suite + "'");
    }
    if (root.contains("checks") && !root.at("checks").is_null()) {
      const json& checks = root.at("checks");
      if (!checks.is_array()) config_error("checks must be a list");
      for (const auto& item : checks) {
        if (!item.is_object()) config_error("each check must be a map");
        only_keys(item, {"name", "kind", "model", "model_overrides", "params"}, "a check");
        if (!item.contains("name") || !item.contains("kind")) config_error("each check needs a name and a kind");
        CheckConfig c;
        c.name = get_string(item, "name", "a check");
        c.kind = get_string(item, "kind", "check '" + c.name + "'");
        if (item.contains("model")) c.model = get_string(item, "model", "check '" + c.name + "'");
        c.model_overrides = get_map(item, "model_overrides", "check '" + c.name + "'");
        c.params = get_map(item, "params", "check '" + c.name + "'");
        cfg.checks.push_back(std::move(c));
      }
    }
    if (root.contains("simulate") && !root.at("simulate").is_null()) {
      const json& s = root.at("simulate");
      if (!s.is_object()) config_error("simulate must be a map");
      only_keys(s, {"model", "model_overrides", "horizon", "replicas", "times"}, "simulate");
      SimulateConfig sim;
      if (s.contains("model")) sim.model = get_string(s, "model", "simulate");
      sim.model_overrides = get_map(s, "model_overrides", "simulate");
      sim.horizon = param(s, "horizon", sim.horizon);
      sim.replicas = param(s, "replicas", sim.replicas);
      sim.times = param(s, "times", sim.times);
      if (!(sim.horizon > 0.0)) config_error("simulate.horizon must be positive");
      for (double t : sim.times) {
        if (t < 0.0 || t > sim.horizon) config_error("simulate.times must lie in [0, horizon]");
      }
      try {
        (void)build_model(sim.model, sim.model_overrides);
      } catch (const Error& e) {
        config_error(std::string(e.what()) + " in simulate");
      }
      cfg.simulate = std::move(sim);
    }
  } catch (const json::exception& e) {
    config_error(std::string("ill-typed value: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    config_error(e.what());
  }
  std::set<std::string> names;
  for (const auto& c : resolve_checks(cfg)) {
    if (!names.insert(c.name).second) config_error("duplicate check name '" + c.name + "'");
  }
  for (const auto& c : cfg.checks) validate_check(c);
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string ExperimentConfig::to_yaml() const {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << seed;
  out << YAML::Key << "jobs" << YAML::Value << jobs;
  out << YAML::Key << "out_dir" << YAML::Value << YAML::DoubleQuoted << out_dir;
  out << YAML::Key << "max_nodes" << YAML::Value << static_cast<std::uint64_t>(max_nodes);
  if (!suite.empty()) out << YAML::Key << "suite" << YAML::Value << YAML::DoubleQuoted << suite;
  out << YAML::Key << "checks" << YAML::Value << YAML::BeginSeq;
  for (const auto& c : checks) emit_json(out, check_to_json(c));
  out << YAML::EndSeq;
  if (simulate) {
    json s = {{"model", simulate->model},
              {"model_overrides", simulate->model_overrides},
              {"horizon", simulate->horizon},
              {"replicas", simulate->replicas},
              {"times", simulate->times}};
    out << YAML::Key << "simulate" << YAML::Value;
    emit_json(out, s);
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

// ---- suites ---------------------------------------------------------------

std::vector<std::string> suite_names() { return {"paper-core"}; }

std::vector<CheckConfig> suite_checks(std::string_view suite) {
  if (suite != "paper-core") throw Error(ErrorCode::UnknownCheck, "unknown suite '" + std::string(suite) + "'");
  const json yule_bm = json::object();
  const json subcritical = {{"offspring", {{"0", 0.75}, {"2", 0.25}}}};
  return {
      {"yule_moments", "tree_moments", "", json::object(), {{"t", 1.0}, {"n_reps", 100000}}},
      {"general_moments", "tree_moments", "", json::object(),
       {{"offspring", {{"0", 0.25}, {"2", 0.75}}}, {"t", 1.0}, {"n_reps", 100000}}},
      {"w_law", "w_law", "yule_splitted_bm", json::object(), {{"t", 8.0}, {"n_reps", 10000}}},
      {"many_to_one_fixed_bm", "many_to_one_fixed", "yule_splitted_bm", yule_bm,
       {{"function", "x2"}, {"t", 2.0}, {"n_tree", 100000}, {"n_spine", 100000}}},
      {"many_to_one_fixed_exact", "many_to_one_fixed", "yule_equal_split", json::object(),
       {{"function", "x"}, {"t", 2.0}, {"n_tree", 100000}, {"n_spine", 100000}, {"exact", std::exp(-2.0)}}},
      {"many_to_one_tree_bm", "many_to_one_tree", "yule_splitted_bm", yule_bm,
       {{"function", "x2"}, {"discount", 1.0}, {"horizon", 2.0}, {"quad_points", 64}}},
      {"many_to_one_tree_deaths", "many_to_one_tree", "yule_splitted_bm", yule_bm,
       {{"function", "one"}, {"discount", 0.0}, {"horizon", 2.0}, {"quad_points", 64}, {"exact_deaths", true},
        {"exact_z_max", 1.0}}},
      {"many_to_one_tree_subcritical", "many_to_one_tree", "yule_splitted_bm", subcritical,
       {{"function", "x2"}, {"discount", 1.0}, {"horizon", 2.0}, {"quad_points", 64}}},
      {"fork_closed_form", "fork_second_moment", "yule_splitted_bm", yule_bm,
       {{"f", "one"}, {"g", "one"}, {"t", 1.0}, {"closed_form", true}}},
      {"fork_bm", "fork_second_moment", "yule_splitted_bm", yule_bm, {{"f", "x"}, {"g", "x"}, {"t", 1.0}}},
      {"lln_alive_ou", "lln_alive", "yule_splitted_ou", {{"x0", 4.0}},
       {{"times", {2.0, 4.0, 6.0, 10.0}}, {"n_reps", 200}, {"run_length", 10000.0}}},
      {"lln_alive_ou_control", "lln_alive", "yule_splitted_ou", {{"x0", 4.0}, {"kernel", {{"name", "local"}}}},
       {{"times", {2.0, 4.0, 6.0, 10.0}}, {"n_reps", 200}, {"analytic", "ou"}}},
      {"lln_dead", "lln_dead", "yule_equal_split", json::object(),
       {{"t", 12.0}, {"n_reps", 200}, {"function", "gauss"}, {"max_nodes", 4000000}}},
      {"levy_clt", "levy_clt", "branching_levy", json::object(), {{"t", 8.0}, {"n_reps", 400}}},
      {"fluctuation_bracket", "fluctuation_bracket", "yule_splitted_bm", yule_bm,
       {{"T", 1.0}, {"t", 1.0}, {"grid", 1.0 / 256.0}, {"n_reps", 10000}, {"function", "gauss"}}},
      {"ancestral_window", "ancestral_window", "yule_splitted_bm", yule_bm,
       {{"t", 3.0}, {"window", 1.0}, {"grid", 0.25}}},
  };
}

std::vector<CheckConfig> resolve_checks(const ExperimentConfig& config) {
  std::vector<CheckConfig> out;
  if (!config.suite.empty()) out = suite_checks(config.suite);
  out.insert(out.end(), config.checks.begin(), config.checks.end());
  return out;
}

// ---- running --------------------------------------------------------------

CheckReport run_check(const CheckConfig& check, std::uint64_t seed, unsigned jobs, const TreeCaps& caps) {
  const auto start = std::chrono::steady_clock::now();
  CheckReport rep;
  try {
    CheckContext ctx{derive_key(seed, hash_tag(check.name)), jobs, caps};
    ctx.caps.max_nodes = param(check.params, "max_nodes", caps.max_nodes);
    rep = dispatch(check, ctx);
  } catch (const Error& e) {
    rep = CheckReport{};
    rep.kind = check.kind;
    rep.error = e.what();
    rep.finalize();
  }
  rep.name = check.name;
  rep.metadata["config"] = check_to_json(check);
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::optional<std::string> only, std::ostream* log) {
  auto checks = resolve_checks(config);
  if (only) {
    const auto it = std::find_if(checks.begin(), checks.end(), [&](const CheckConfig& c) { return c.name == *only; });
    if (it == checks.end()) throw Error(ErrorCode::UnknownCheck, "no check named '" + *only + "'");
    checks = {*it};
  }
  TreeCaps caps;
  caps.max_nodes = config.max_nodes;
  ExperimentResult result;
  json list = json::array();
  for (const auto& c : checks) {
    if (log) *log << "[run] " << c.name << " ..." << std::flush;
    CheckReport rep = run_check(c, config.seed, config.jobs, caps);
    if (log) *log << (rep.pass ? " pass" : " FAIL") << " (" << std::fixed << std::setprecision(1) << rep.runtime_seconds
                  << " s)" << std::defaultfloat << '\n';
    result.pass = result.pass && rep.pass;
    list.push_back(to_json(rep));
    result.reports.push_back(std::move(rep));
  }
  result.report = {{"seed", config.seed},
                   {"suite", config.suite},
                   {"checks", std::move(list)},
                   {"pass", result.pass},
                   {"passed", std::count_if(result.reports.begin(), result.reports.end(),
                                            [](const CheckReport& r) { return r.pass; })},
                   {"total", result.reports.size()}};
  return result;
}

std::string report_text(const nlohmann::json& report) { return report.dump(2) + "\n"; }

void print_summary(std::ostream& os, const ExperimentResult& result) {
  os << std::left << std::setw(32) << "check" << std::setw(22) << "kind" << std::right << std::setw(14) << "lhs"
     << std::setw(14) << "rhs" << std::setw(10) << "z" << std::setw(9) << "time(s)" << "  result\n";
  for (const auto& r : result.reports) {
    std::ostringstream z;
    z << std::setprecision(3) << r.z;
    os << std::left << std::setw(32) << r.name << std::setw(22) << r.kind << std::right << std::setprecision(6)
       << std::setw(14) << r.lhs.mean << std::setw(14) << r.rhs.mean << std::setw(10) << z.str() << std::fixed
       << std::setprecision(1) << std::setw(9) << r.runtime_seconds << std::defaultfloat << "  "
       << (r.pass ? "PASS" : "FAIL") << '\n';
    if (r.error) os << "    error: " << *r.error << '\n';
    for (const auto& c : r.criteria) {
      if (!c.pass) os << "    failed: " << c.label << " = " << c.value << " (needs " << c.relation << ' ' << c.threshold << ")\n";
    }
  }
  const auto passed = std::count_if(result.reports.begin(), result.reports.end(), [](const CheckReport& r) { return r.pass; });
  os << passed << '/' << result.reports.size() << " checks passed\n";
}

std::vector<std::string> series_ids(const nlohmann::json& report) {
  std::vector<std::string> out;
  for (const auto& c : report.at("checks")) {
    for (const auto& s : c.at("series")) out.push_back(c.at("name").get<std::string>() + "/" + s.at("name").get<std::string>());
  }
  return out;
}

void emit_plot_data(const nlohmann::json& report, std::string_view which, std::ostream& os) {
  std::ostringstream out;
  out.precision(17);
  out << "series,x,y\n";
  bool found = false;
  for (const auto& c : report.at("checks")) {
    const auto check = c.at("name").get<std::string>();
    for (const auto& s : c.at("series")) {
      const auto name = s.at("name").get<std::string>();
      const std::string id = check + "/" + name;
      if (which != "all" && which != id && which != name) continue;
      found = true;
      for (const auto& pt : s.at("points")) {
        out << id << ',' << pt[0].dump() << ',' << pt[1].dump() << '\n';
      }
    }
  }
  if (!found) throw Error(ErrorCode::UnknownSeries, "no series named '" + std::string(which) + "'");
  os << out.str();
}

void write_outputs(const ExperimentResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream(fs::path(dir) / "report.json") << report_text(result.report);
  for (const auto& id : series_ids(result.report)) {
    std::string file = id;
    std::replace(file.begin(), file.end(), '/', '_');
    std::ofstream out(fs::path(dir) / (file + ".csv"));
    emit_plot_data(result.report, id, out);
  }
}

}  // namespace gwspine
