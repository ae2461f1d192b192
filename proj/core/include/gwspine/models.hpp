#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gwspine/branching_sim.hpp"

namespace gwspine {

/// A catalog entry: its default parameters double as the override schema.
struct ModelInfo {
  std::string name;
  std::string summary;
  std::string state_space;  ///< "real" or "real x type"
  nlohmann::json defaults;
};

const std::vector<ModelInfo>& model_catalog();

struct BuiltModel {
  BranchingModel model;
  nlohmann::json parameters;          ///< defaults merged with overrides
  std::vector<std::string> warnings;  ///< e.g. the OU drift condition
};

/// Builds a catalog model. Overrides must name known parameters with values of
/// the default's type. Throws UnknownModel or InvalidParameters.
///
/// Kernels are objects {name, ...}: equal_split, uniform_fraction,
/// beta_fraction {a, b}, additive {deltas}, local. The aging kernel is fixed by
/// the cellular_aging parameters.
BuiltModel build_model(std::string_view name, const nlohmann::json& overrides = nlohmann::json::object());

/// The aging model's single-child events become motion jumps: the branching
/// rate drops to r (1 - p0 - p1) and the offspring law renormalizes over {0, 2}.
struct AgingRates {
  double branching_rate = 0.0;
  double replacement_rate = 0.0;
  double p_zero = 0.0;
  double p_two = 0.0;
};
AgingRates aging_rates(double rate, const AgingParameters& params);

}  // namespace gwspine
