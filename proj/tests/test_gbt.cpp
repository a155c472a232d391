#include <gtest/gtest.h>

#include <cmath>

#include "coalshap/games.hpp"
#include "coalshap/gbt.hpp"
#include "coalshap/sampling.hpp"
#include "test_util.hpp"

using namespace coalshap;

namespace {

SurrogateModel stump_model(std::size_t n, double left, double right, double lr, int copies = 1) {
  SurrogateModel m;
  m.n_players = n;
  m.learning_rate = lr;
  for (int c = 0; c < copies; ++c) {
    Tree t;
    t.nodes = {{0, 1, 2, 0.0}, {-1, -1, -1, left}, {-1, -1, -1, right}};
    m.trees.push_back(t);
  }
  return m;
}

SampledDataset and_table() {
  SampledDataset d;
  for (const char* s : {"00", "01", "10", "11"}) d.add(parse_mask(s), std::string(s) == "11" ? 1.0 : 0.0);
  return d;
}

std::vector<int> path_features_repeat_check(const Tree& t) {
  std::vector<int> repeats;
  auto visit = [&](auto&& self, int id, std::vector<int> path) -> void {
    const auto& nd = t.nodes[id];
    if (nd.is_leaf()) return;
    if (std::find(path.begin(), path.end(), nd.feature) != path.end()) repeats.push_back(nd.feature);
    path.push_back(nd.feature);
    self(self, nd.left, path);
    self(self, nd.right, path);
  };
  visit(visit, 0, {});
  return repeats;
}

}  // namespace

TEST(Predict, EmptyEnsembleIsBase) {
  SurrogateModel m;
  m.n_players = 3;
  m.base_score = 1.75;
  EXPECT_EQ(predict(m, parse_mask("101")), 1.75);
}

TEST(Predict, SingleStump) {
  const auto m = stump_model(3, 2.0, 5.0, 1.0);
  EXPECT_EQ(predict(m, parse_mask("100")), 5.0);
  EXPECT_EQ(predict(m, parse_mask("011")), 2.0);
  EXPECT_THROW(predict(m, parse_mask("10")), std::invalid_argument);
}

TEST(Predict, TwoHalfStumpsEqualOne) {
  const auto one = stump_model(3, 2.0, 5.0, 1.0);
  const auto two = stump_model(3, 2.0, 5.0, 0.5, 2);
  for (std::uint64_t c = 0; c < 8; ++c) {
    const auto m = CoalitionMask::from_code(c, 3);
    EXPECT_DOUBLE_EQ(predict(one, m), predict(two, m));
  }
}

TEST(FitGbt, ConstantTargetsExact) {
  SampledDataset d;
  for (std::uint64_t c = 0; c < 16; c += 3) d.add(CoalitionMask::from_code(c, 4), 0.1);
  const auto m = fit_gbt(d, {3, 20, 0.05, 0.0}, 1);
  for (std::uint64_t c = 0; c < 16; ++c) EXPECT_EQ(predict(m, CoalitionMask::from_code(c, 4)), 0.1);
  for (const auto& t : m.trees) EXPECT_EQ(t.nodes.size(), 1u);
}

TEST(FitGbt, AndTableDepthTwo) {
  const auto d = and_table();
  const auto m = fit_gbt(d, {2, 100, 0.05, 0.0}, 0);
  EXPECT_LE(mean_squared_error(m, d), 1e-3);
}

TEST(FitGbt, StrongL1KillsLeaves) {
  const auto d = and_table();  // every |G| <= 1 at every leaf
  const auto m = fit_gbt(d, {2, 10, 0.05, 10.0}, 0);
  for (const auto& t : m.trees) {
    for (const auto& nd : t.nodes) {
      if (nd.is_leaf()) {
        EXPECT_EQ(nd.value, 0.0);
      }
    }
  }
  for (std::uint64_t c = 0; c < 4; ++c) EXPECT_EQ(predict(m, CoalitionMask::from_code(c, 2)), m.base_score);
}

TEST(FitGbt, SoftThreshold) {
  EXPECT_EQ(detail::soft_threshold(3.0, 1.0), 2.0);
  EXPECT_EQ(detail::soft_threshold(-3.0, 1.0), -2.0);
  EXPECT_EQ(detail::soft_threshold(0.5, 1.0), 0.0);
  EXPECT_EQ(detail::soft_threshold(-0.5, 0.0), -0.5);
}

TEST(FitGbt, MonotoneTrainingLossWithoutL1) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SyntheticGame g(SyntheticGameSpec::make(SyntheticKind::kInteraction, draw_weights(8, seed)));
    const auto data = build_dataset(g, sample_coalitions(8, {SamplingKind::kShapleyKernel, 150}, seed));
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    SurrogateModel partial;
    partial.n_players = 8;
    partial.learning_rate = 0.1;
    partial.base_score = detail::shifted_mean(data, rows);
    double prev = mean_squared_error(partial, data);
    detail::boost(data, rows, {3, 60, 0.1, 0.0}, 60, [&](int, const Tree& t) {
      partial.trees.push_back(t);
      const double mse = mean_squared_error(partial, data);
      EXPECT_LE(mse, prev + 1e-15);
      prev = mse;
    });
  }
}

TEST(FitGbt, NoFeatureRepeatsOnAPath) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = test_support::random_table_game(5, seed);
    const auto m = fit_gbt(test_support::full_table(g), {10, 30, 0.05, 0.0}, seed);
    for (const auto& t : m.trees) {
      EXPECT_TRUE(path_features_repeat_check(t).empty());
      EXPECT_NO_THROW(t.validate(5));
    }
  }
}

TEST(FitGbt, DepthTenInterpolatesFullTable) {
  // Depth >= n lets every tree isolate every mask.
  const auto g = test_support::random_table_game(6, 3);
  const auto d = test_support::full_table(g);
  const auto m = fit_gbt(d, {10, 900, 0.05, 0.0}, 0);
  EXPECT_LE(mean_squared_error(m, d), 1e-12);
}

TEST(FitGbt, Deterministic) {
  const SyntheticGame g(SyntheticGameSpec::make(SyntheticKind::kNonlinear, draw_weights(9, 2)));
  const auto data = build_dataset(g, sample_coalitions(9, {SamplingKind::kShapleyKernel, 200}, 4));
  const auto a = fit_gbt(data, {5, 50, 0.05, 10.0}, 1);
  const auto b = fit_gbt(data, {5, 50, 0.05, 10.0}, 1);
  EXPECT_EQ(model_to_json(a).dump(), model_to_json(b).dump());
}

TEST(FitGbt, EqualGainsPickLowestFeature) {
  // v = z0 + z1: both features give the same gain at the root.
  SampledDataset d;
  for (std::uint64_t c = 0; c < 4; ++c) {
    const auto m = CoalitionMask::from_code(c, 2);
    d.add(m, static_cast<double>(m.count()));
  }
  const auto model = fit_gbt(d, {1, 1, 1.0, 0.0}, 0);
  EXPECT_EQ(model.trees[0].nodes[0].feature, 0);
}

TEST(FitGbt, RejectsBadInput) {
  EXPECT_THROW(fit_gbt(SampledDataset{}, {}, 0), std::invalid_argument);
  EXPECT_THROW(fit_gbt(and_table(), {0, 10, 0.05, 0.0}, 0), std::invalid_argument);
  EXPECT_THROW(fit_gbt(and_table(), {3, 10, 0.0, 0.0}, 0), std::invalid_argument);
  EXPECT_THROW(fit_gbt(and_table(), {3, 10, 0.05, -1.0}, 0), std::invalid_argument);
}

TEST(TreeValidate, RejectsMalformedTrees) {
  Tree t;
  t.nodes = {{0, 1, 2, 0.0}, {0, 3, 4, 0.0}, {-1, -1, -1, 1.0}, {-1, -1, -1, 0.0}, {-1, -1, -1, 0.0}};
  EXPECT_THROW(t.validate(2), std::invalid_argument);  // feature 0 repeated
  t.nodes = {{0, 1, 1, 0.0}, {-1, -1, -1, 1.0}};
  EXPECT_THROW(t.validate(2), std::invalid_argument);  // node reached twice
  t.nodes = {{0, 1, 5, 0.0}, {-1, -1, -1, 1.0}};
  EXPECT_THROW(t.validate(2), std::invalid_argument);  // child out of range
  t.nodes = {{3, 1, 2, 0.0}, {-1, -1, -1, 1.0}, {-1, -1, -1, 1.0}};
  EXPECT_THROW(t.validate(2), std::invalid_argument);  // feature out of range
  t.nodes = {{-1, -1, -1, 1.0}, {-1, -1, -1, 1.0}};
  EXPECT_THROW(t.validate(2), std::invalid_argument);  // unreachable
  t.nodes = {{-1, -1, -1, std::nan("")}};
  EXPECT_THROW(t.validate(2), std::invalid_argument);
}

TEST(Folds, PartitionRows) {
  const auto folds = make_folds(23, 5, 7);
  ASSERT_EQ(folds.size(), 5u);
  std::vector<int> seen(23, 0);
  for (const auto& f : folds) {
    EXPECT_GE(f.size(), 4u);
    EXPECT_LE(f.size(), 5u);
    for (auto r : f) seen[r]++;
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_EQ(make_folds(23, 5, 7), folds);
  EXPECT_THROW(make_folds(3, 5, 0), std::invalid_argument);
}

TEST(GridSearch, SingleElementGrid) {
  const SyntheticGame g(SyntheticGameSpec::make(SyntheticKind::kLinear, draw_weights(6, 1)));
  const auto data = build_dataset(g, sample_coalitions(6, {SamplingKind::kShapleyKernel, 60}, 1));
  const HyperParams hp{3, 50, 0.05, 0.0};
  const auto r = grid_search_cv(data, {hp}, 5, 2);
  EXPECT_EQ(r.best, hp);
  EXPECT_EQ(r.cv_mse.size(), 1u);
  EXPECT_EQ(model_to_json(r.model).dump(), model_to_json(fit_gbt(data, hp, 2)).dump());
}

TEST(GridSearch, BestIsGridMemberWithMinimalCvError) {
  const SyntheticGame g(SyntheticGameSpec::make(SyntheticKind::kInteraction, draw_weights(8, 5)));
  const auto data = build_dataset(g, sample_coalitions(8, {SamplingKind::kShapleyKernel, 120}, 5));
  const std::vector<HyperParams> grid = {{3, 50, 0.05, 0.0}, {3, 150, 0.05, 0.0}, {5, 50, 0.05, 10.0}, {2, 20, 0.01, 0.0}};
  const auto r = grid_search_cv(data, grid, 5, 3);
  ASSERT_EQ(r.cv_mse.size(), grid.size());
  const auto it = std::find(grid.begin(), grid.end(), r.best);
  ASSERT_NE(it, grid.end());
  const double best = r.cv_mse[static_cast<std::size_t>(it - grid.begin())];
  for (double x : r.cv_mse) EXPECT_LE(best, x);
}

TEST(GridSearch, PrefixSharingMatchesIndependentFits) {
  // cv_mse for (d, 150) must equal the CV error of an independent 150-tree fit.
  const SyntheticGame g(SyntheticGameSpec::make(SyntheticKind::kNonlinear, draw_weights(7, 6)));
  const auto data = build_dataset(g, sample_coalitions(7, {SamplingKind::kShapleyKernel, 90}, 6));
  const std::vector<HyperParams> grid = {{3, 40, 0.05, 0.0}, {3, 150, 0.05, 0.0}};
  const auto shared = grid_search_cv(data, grid, 5, 9);
  const auto alone = grid_search_cv(data, {grid[1]}, 5, 9);
  EXPECT_DOUBLE_EQ(shared.cv_mse[1], alone.cv_mse[0]);
  const auto alone0 = grid_search_cv(data, {grid[0]}, 5, 9);
  EXPECT_DOUBLE_EQ(shared.cv_mse[0], alone0.cv_mse[0]);
}

TEST(GridSearch, SelectedModelNoWorseThanWorstMember) {
  const SyntheticGame g(SyntheticGameSpec::make(SyntheticKind::kLinear, draw_weights(8, 8)));
  const auto data = test_support::full_table(g);
  const std::vector<HyperParams> grid = {{3, 100, 0.01, 0.0}, {3, 300, 0.05, 0.0}, {5, 100, 0.05, 10.0}};
  const auto r = grid_search_cv(data, grid, 5, 1);
  double worst = 0.0;
  for (const auto& hp : grid) worst = std::max(worst, mean_squared_error(fit_gbt(data, hp, 0), data));
  EXPECT_LE(mean_squared_error(r.model, data), worst);
}

TEST(ModelJson, RoundTrip) {
  const SyntheticGame g(SyntheticGameSpec::make(SyntheticKind::kInteraction, draw_weights(8, 1)));
  const auto data = build_dataset(g, sample_coalitions(8, {SamplingKind::kShapleyKernel, 100}, 1));
  const auto m = fit_gbt(data, {5, 30, 0.05, 0.0}, 77);
  const auto back = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(back.hyperparams, m.hyperparams);
  for (std::uint64_t c = 0; c < 256; ++c) {
    const auto mask = CoalitionMask::from_code(c, 8);
    EXPECT_EQ(predict(back, mask), predict(m, mask));
  }
}

TEST(ModelJson, RejectsBadDocuments) {
  EXPECT_THROW(model_from_json({{"format", "other"}}), std::invalid_argument);
  EXPECT_THROW(hyperparams_from_json({{"max_depth", 3}, {"n_trees", 1}, {"learning_rate", 0.1}, {"l1_alpha", 0}, {"x", 1}}),
               std::invalid_argument);
  auto doc = model_to_json(stump_model(2, 1.0, 2.0, 1.0));
  doc["trees"][0]["left"] = {{"feature", 0}, {"left", {{"leaf", 0.0}}}, {"right", {{"leaf", 0.0}}}};
  EXPECT_THROW(model_from_json(doc), std::invalid_argument);
}

TEST(DefaultGrid, Shape) {
  const auto grid = default_grid();
  EXPECT_EQ(grid.size(), 36u);
  for (const auto& hp : grid) EXPECT_NO_THROW(hp.validate());
}
