#include "gwspine/models.hpp"

#include <cmath>
#include <map>

namespace gwspine {

namespace {

using nlohmann::json;

json yule() { return json{{"2", 1.0}}; }

const std::vector<ModelInfo>& catalog() {
  static const std::vector<ModelInfo> entries = {
      {"yule_splitted_bm",
       "binary splitting, Brownian motion, uniform random fraction at division",
       "real",
       {{"rate", 1.0}, {"offspring", yule()}, {"drift", 0.0}, {"vol", 1.0}, {"x0", 1.0},
        {"kernel", {{"name", "uniform_fraction"}}}}},
      {"yule_splitted_ou",
       "binary splitting, Ornstein-Uhlenbeck motion b(x) = -k (x - mean), uniform random fraction",
       "real",
       {{"rate", 1.0}, {"offspring", yule()}, {"ou_rate", 1.0}, {"ou_mean", 0.0}, {"vol", 1.0}, {"x0", 0.0},
        {"kernel", {{"name", "uniform_fraction"}}}}},
      {"yule_linear_growth",
       "binary splitting, deterministic growth b = g, uniform random fraction",
       "real",
       {{"rate", 1.0}, {"offspring", yule()}, {"growth", 1.0}, {"x0", 1.0}, {"kernel", {{"name", "uniform_fraction"}}}}},
      {"yule_equal_split",
       "binary splitting, no motion, equal split",
       "real",
       {{"rate", 1.0}, {"offspring", yule()}, {"drift", 0.0}, {"vol", 0.0}, {"x0", 1.0},
        {"kernel", {{"name", "equal_split"}}}}},
      {"cellular_aging",
       "two-type cell aging: constant trait, affine maps at division and replacement",
       "real x type",
       {{"rate", 1.0}, {"p0", 0.1}, {"p1", 0.1}, {"p01", 0.75},
        {"alpha0", 0.5}, {"alpha1", 0.5}, {"beta0", 0.5}, {"beta1", 0.5},
        {"alpha0_split", 0.6}, {"alpha1_split", 0.4}, {"beta0_split", 1.0}, {"beta1_split", 0.9},
        {"sigma", 0.1}, {"rho", 0.3}, {"sigma0", 0.1}, {"sigma1", 0.1}, {"x0", 1.0}, {"type0", 0}}},
      {"branching_levy",
       "Levy motion (Brownian part plus compound Poisson jumps), additive displacements at division",
       "real",
       {{"rate", 1.0}, {"offspring", yule()}, {"drift", 0.0}, {"vol", 1.0}, {"jump_rate", 0.0},
        {"jumps", json::array()}, {"x0", 0.0}, {"kernel", {{"name", "additive"}, {"deltas", {0.5, -0.5}}}}}},
  };
  return entries;
}

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidParameters, what); }

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

double num(const json& p, const char* key) {
  const json& v = p.at(key);
  if (!v.is_number()) bad(std::string(key) + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad(std::string(key) + " must be finite");
  return x;
}

OffspringDistribution parse_offspring(const json& j) {
  if (!j.is_object()) bad("offspring must be a map {k: weight}");
  std::map<int, double> raw;
  for (const auto& [k, w] : j.items()) {
    std::size_t used = 0;
    int kk = 0;
    try {
      kk = std::stoi(k, &used);
    } catch (const std::exception&) {
      bad("offspring key '" + k + "' is not an integer");
    }
    if (used != k.size()) bad("offspring key '" + k + "' is not an integer");
    if (!w.is_number()) bad("offspring weight for " + k + " must be a number");
    raw[kk] = w.get<double>();
  }
  try {
    return OffspringDistribution::validate(raw);
  } catch (const Error& e) {
    bad(e.what());
  }
}

BranchingKernel parse_kernel(const json& j) {
  if (!j.is_object() || !j.contains("name") || !j.at("name").is_string()) bad("kernel must be an object with a name");
  const auto name = j.at("name").get<std::string>();
  auto only = [&](std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : j.items()) {
      if (k == "name") continue;
      bool known = false;
      for (const char* allowed : keys) known = known || k == allowed;
      if (!known) bad("kernel " + name + " has no parameter '" + k + "'");
    }
  };
  if (name == "equal_split") {
    only({});
    return BranchingKernel::equal_split();
  }
  if (name == "uniform_fraction") {
    only({});
    return BranchingKernel::uniform_fraction();
  }
  if (name == "local") {
    only({});
    return BranchingKernel::local();
  }
  if (name == "beta_fraction") {
    only({"a", "b"});
    const double a = num(j, "a");
    const double b = num(j, "b");
    if (!(a > 0.0 && b > 0.0)) bad("beta_fraction needs a, b > 0");
    return BranchingKernel::beta_fraction(a, b);
  }
  if (name == "additive") {
    only({"deltas"});
    const json& d = j.at("deltas");
    if (!d.is_array() || d.empty()) bad("additive needs a nonempty deltas array");
    std::vector<double> deltas;
    for (const auto& v : d) {
      if (!v.is_number()) bad("deltas must be numbers");
      deltas.push_back(v.get<double>());
    }
    return BranchingKernel::additive(std::move(deltas));
  }
  bad("unknown kernel '" + name + "'");
}

InitialLaw point(const json& p) {
  const int type = p.contains("type0") ? p.at("type0").get<int>() : 0;
  return InitialLaw::at(State{num(p, "x0"), type});
}

void finish(BuiltModel& out) {
  try {
    out.model.validate();
  } catch (const Error& e) {
    bad(e.what());
  }
}

}  // namespace

const std::vector<ModelInfo>& model_catalog() { return catalog(); }

AgingRates aging_rates(double rate, const AgingParameters& a) {
  const double single = a.p0 + a.p1;
  AgingRates out;
  out.branching_rate = rate * (1.0 - single);
  out.replacement_rate = rate * single;
  out.p_zero = (1.0 - single - a.p01) / (1.0 - single);
  out.p_two = a.p01 / (1.0 - single);
  return out;
}

BuiltModel build_model(std::string_view name, const nlohmann::json& overrides) {
  const ModelInfo* info = nullptr;
  for (const auto& m : catalog()) {
    if (m.name == name) info = &m;
  }
  if (!info) throw Error(ErrorCode::UnknownModel, "no catalog model named '" + std::string(name) + "'");
  if (!overrides.is_null() && !overrides.is_object()) bad("model overrides must be a map");

  BuiltModel out;
  out.parameters = info->defaults;
  if (overrides.is_object()) {
    for (const auto& [k, v] : overrides.items()) {
      if (!info->defaults.contains(k)) bad(info->name + " has no parameter '" + k + "'");
      if (!same_kind(info->defaults.at(k), v)) bad("parameter '" + k + "' has the wrong type");
      out.parameters[k] = v;
    }
  }
  const json& p = out.parameters;
  BranchingModel& m = out.model;
  m.name = info->name;
  m.rate = num(p, "rate");

  if (info->name == "cellular_aging") {
    AgingParameters a;
    a.p0 = num(p, "p0");
    a.p1 = num(p, "p1");
    a.p01 = num(p, "p01");
    a.alpha0 = num(p, "alpha0");
    a.alpha1 = num(p, "alpha1");
    a.beta0 = num(p, "beta0");
    a.beta1 = num(p, "beta1");
    a.alpha0_split = num(p, "alpha0_split");
    a.alpha1_split = num(p, "alpha1_split");
    a.beta0_split = num(p, "beta0_split");
    a.beta1_split = num(p, "beta1_split");
    a.sigma = num(p, "sigma");
    a.rho = num(p, "rho");
    a.sigma0 = num(p, "sigma0");
    a.sigma1 = num(p, "sigma1");
    if (a.p0 < 0.0 || a.p1 < 0.0 || a.p01 < 0.0 || a.p0 + a.p1 + a.p01 > 1.0) {
      bad("aging probabilities must be nonnegative with p0 + p1 + p01 <= 1");
    }
    if (!(a.p0 + a.p1 < 1.0)) bad("aging model needs p0 + p1 < 1");
    if (!(a.p01 > 0.0)) bad("aging model needs p01 > 0");
    if (std::abs(a.rho) > 1.0) bad("rho must lie in [-1, 1]");
    if (a.sigma < 0.0 || a.sigma0 < 0.0 || a.sigma1 < 0.0) bad("noise scales must be nonnegative");
    const AgingRates rates = aging_rates(m.rate, a);
    m.rate = rates.branching_rate;
    std::map<int, double> law{{2, rates.p_two}};
    if (rates.p_zero > 0.0) law[0] = rates.p_zero;
    m.offspring = OffspringDistribution::validate(law);
    m.motion = MotionModel::still();
    if (rates.replacement_rate > 0.0) m.motion = m.motion.with_jumps(aging_replacement_jump(a, rates.replacement_rate));
    m.kernel = BranchingKernel::aging(a);
    const json& t0 = p.at("type0");
    if (!t0.is_number_integer() || (t0.get<int>() != 0 && t0.get<int>() != 1)) bad("type0 must be 0 or 1");
    m.initial = point(p);
    finish(out);
    return out;
  }

  m.offspring = parse_offspring(p.at("offspring"));
  m.kernel = parse_kernel(p.at("kernel"));
  m.initial = point(p);
  if (info->name == "yule_splitted_bm" || info->name == "yule_equal_split") {
    const double vol = num(p, "vol");
    if (vol < 0.0) bad("vol must be nonnegative");
    m.motion = MotionModel::brownian(num(p, "drift"), vol);
  } else if (info->name == "yule_splitted_ou") {
    const double k = num(p, "ou_rate");
    const double vol = num(p, "vol");
    if (vol < 0.0) bad("vol must be nonnegative");
    m.motion = MotionModel::ornstein_uhlenbeck(k, num(p, "ou_mean"), vol);
    // Ergodicity of the spine needs b(x)/x < r far out; here b(x)/x -> -k.
    if (-k >= m.rate) {
      out.warnings.push_back("drift condition fails: b(x)/x -> " + std::to_string(-k) + " >= r = " +
                             std::to_string(m.rate) + "; the spine may not be ergodic");
    }
  } else if (info->name == "yule_linear_growth") {
    m.motion = MotionModel::deterministic(num(p, "growth"));
  } else if (info->name == "branching_levy") {
    LevyParameters lp;
    lp.drift = num(p, "drift");
    lp.vol = num(p, "vol");
    lp.jump_rate = num(p, "jump_rate");
    if (lp.vol < 0.0) bad("vol must be nonnegative");
    for (const auto& atom : p.at("jumps")) {
      if (!atom.is_array() || atom.size() != 2 || !atom[0].is_number() || !atom[1].is_number()) {
        bad("jumps must be a list of [size, prob] pairs");
      }
      lp.jumps.push_back({atom[0].get<double>(), atom[1].get<double>()});
    }
    try {
      m.motion = MotionModel::levy(lp);
    } catch (const Error& e) {
      bad(e.what());
    }
  }
  finish(out);
  return out;
}

}  // namespace gwspine
