#include <gtest/gtest.h>

#include <cmath>

#include "gwspine/error.hpp"
#include "gwspine/models.hpp"

namespace gwspine {
namespace {

TEST(Catalog, EveryModelSimulates) {
  ASSERT_EQ(model_catalog().size(), 6u);
  for (const auto& info : model_catalog()) {
    const auto built = build_model(info.name);
    EXPECT_EQ(built.parameters, info.defaults) << info.name;
    EXPECT_TRUE(built.warnings.empty()) << info.name;
    Stream rng(hash_tag(info.name));
    std::size_t nodes = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto pop = simulate_population(built.model, 2.0, {}, RecordSpec::terminal_only(), rng);
      nodes += pop.tree().size();
      for (NodeIndex k = 0; k < pop.tree().size(); ++k) ASSERT_TRUE(std::isfinite(pop.end_state(k).x)) << info.name;
    }
    EXPECT_GT(nodes, 1000u) << info.name;
  }
}

TEST(Catalog, UnknownModel) {
  try {
    build_model("no_such_model");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownModel);
  }
}

TEST(Catalog, BadOverrides) {
  for (const auto& overrides : {nlohmann::json{{"nope", 1.0}}, nlohmann::json{{"vol", "high"}},
                                nlohmann::json{{"vol", -1.0}}, nlohmann::json{{"offspring", {{"1", 1.0}}}},
                                nlohmann::json{{"kernel", {{"name", "spiral"}}}}}) {
    try {
      build_model("yule_splitted_bm", overrides);
      ADD_FAILURE() << overrides.dump();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidParameters) << overrides.dump();
    }
  }
}

TEST(Catalog, OverridesApply) {
  const auto built = build_model("yule_splitted_bm", {{"rate", 2.0}, {"offspring", {{"0", 0.25}, {"3", 0.75}}},
                                                      {"kernel", {{"name", "equal_split"}}}});
  EXPECT_EQ(built.model.rate, 2.0);
  EXPECT_DOUBLE_EQ(built.model.offspring.mean(), 2.25);
  EXPECT_EQ(built.model.kernel.name(), "equal_split");
}

TEST(Catalog, OuDriftWarning) {
  EXPECT_TRUE(build_model("yule_splitted_ou", {{"ou_rate", 0.5}}).warnings.empty());
  EXPECT_EQ(build_model("yule_splitted_ou", {{"ou_rate", -1.5}}).warnings.size(), 1u);
}

TEST(Aging, RatesPreserveTotalEventRate) {
  AgingParameters p;
  p.p0 = 0.15;
  p.p1 = 0.05;
  p.p01 = 0.6;
  const auto r = aging_rates(2.0, p);
  EXPECT_DOUBLE_EQ(r.branching_rate + r.replacement_rate, 2.0);
  EXPECT_NEAR(r.p_zero + r.p_two, 1.0, 1e-15);
  EXPECT_NEAR(r.p_two * r.branching_rate, 0.6 * 2.0, 1e-12);
  EXPECT_NEAR(r.p_zero * r.branching_rate, 0.2 * 2.0, 1e-12);
}

TEST(Aging, DivisionsProduceBothTypes) {
  const auto built = build_model("cellular_aging");
  EXPECT_EQ(built.model.offspring.prob(1), 0.0);
  Stream rng(3);
  const auto pop = simulate_population(built.model, 4.0, {}, RecordSpec::terminal_only(), rng);
  const auto nodes = pop.tree().nodes();
  for (NodeIndex i = 0; i < nodes.size(); ++i) {
    if (nodes[i].nu == 2 && nodes[i].expanded()) {
      EXPECT_EQ(pop.birth_state(nodes[i].first_child).type, 0);
      EXPECT_EQ(pop.birth_state(nodes[i].first_child + 1).type, 1);
    }
  }
}

}  // namespace
}  // namespace gwspine
