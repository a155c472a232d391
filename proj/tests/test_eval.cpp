#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "coalshap/eval.hpp"
#include "coalshap/games.hpp"
#include "coalshap/shap.hpp"

using namespace coalshap;

namespace {

Attribution att(std::vector<double> phi, double v_full = 0.0, double v_empty = 0.0) {
  Attribution a;
  a.phi = std::move(phi);
  a.v_full = v_full;
  a.v_empty = v_empty;
  return a;
}

}  // namespace

TEST(RelativeError, Examples) {
  EXPECT_EQ(relative_l2_error(att({1, 2}), att({1, 2})), 0.0);
  EXPECT_DOUBLE_EQ(relative_l2_error(att({0, 1}), att({1, 0})), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(relative_l2_error(att({3, 1}), att({1, 2})), relative_l2_error(att({6, 2}), att({2, 4})));
  EXPECT_THROW(relative_l2_error(att({1}), att({0})), std::invalid_argument);
  EXPECT_THROW(relative_l2_error(att({1}), att({1, 2})), std::invalid_argument);
}

TEST(EfficiencyGap, Examples) {
  EXPECT_DOUBLE_EQ(efficiency_gap(att({0.5, 0.25}, 1.0, 0.25)), 0.0);
  EXPECT_DOUBLE_EQ(efficiency_gap(att({0.5, 0.5}, 1.0, 0.25)), 0.25);
  const SyntheticGame g(SyntheticGameSpec::make(SyntheticKind::kInteraction, draw_weights(10, 3)));
  EXPECT_LE(efficiency_gap(exact_shapley(g)), 1e-10);
}

TEST(BiasVariance, IdenticalTrials) {
  const auto oracle = att({1, 1});
  const auto bv = bias_variance({att({2, 1}), att({2, 1})}, oracle);
  EXPECT_DOUBLE_EQ(bv.bias, 1.0);
  EXPECT_EQ(bv.variance, 0.0);
}

TEST(BiasVariance, SymmetricTrials) {
  const auto oracle = att({1, 1});
  const auto bv = bias_variance({att({1.5, 0.0}), att({0.5, 2.0})}, oracle);
  EXPECT_NEAR(bv.bias, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(bv.variance, 0.25 + 1.0);
}

TEST(BiasVariance, IdentityOnRandomTrials) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<Attribution> trials;
    for (int t = 0; t < 2 + rep % 7; ++t) {
      std::vector<double> phi(5);
      for (auto& x : phi) x = normal(rng) * 3 + 1;
      trials.push_back(att(phi));
    }
    const auto bv = bias_variance(trials, att({1, 2, 3, 4, 5}));
    EXPECT_NEAR(bv.bias * bv.bias + bv.variance, bv.mse, 1e-10);
  }
}

TEST(Spearman, Examples) {
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3}, {10, 20, 30}), 1.0);
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3}, {3, 2, 1}), -1.0);
  EXPECT_NEAR(spearman({1, 2, 2, 3}, {1, 2, 3, 4}), 4.5 / std::sqrt(22.5), 1e-12);
  EXPECT_NEAR(spearman({1, 2, 2, 3}, {1, 2, 3, 4}), 0.9487, 1e-4);
  EXPECT_THROW(spearman({1, 1, 1}, {1, 2, 3}), std::invalid_argument);
  const auto r = average_ranks({10, 30, 20, 20});
  EXPECT_EQ(r, (std::vector<double>{1, 4, 2.5, 2.5}));
}

TEST(Lds, AdditiveGame) {
  const SyntheticGame g(SyntheticGameSpec::make(SyntheticKind::kLinear, draw_weights(10, 1)));
  const auto exact = exact_shapley(g);
  auto neg = exact;
  for (auto& x : neg.phi) x = -x;
  for (double alpha : {0.25, 0.5, 0.75}) {
    EXPECT_NEAR(lds(exact, g, {alpha, 100, 7}), 100.0, 1e-9);
    EXPECT_NEAR(lds(neg, g, {alpha, 100, 7}), -100.0, 1e-9);
  }
}

TEST(Lds, InvariantUnderMonotoneTransform) {
  const SyntheticGame g(SyntheticGameSpec::make(SyntheticKind::kInteraction, draw_weights(10, 2)));
  FunctionGame warped(10, [&](const CoalitionMask& m) { return std::exp(2.0 * g.utility(m)) - 5.0; });
  const auto tau = exact_shapley(g);
  for (double alpha : {0.25, 0.5, 0.75}) {
    EXPECT_DOUBLE_EQ(lds(tau, g, {alpha, 100, 3}), lds(tau, warped, {alpha, 100, 3}));
  }
}

TEST(Lds, RandomTauHasZeroMean) {
  // tau -> -tau symmetry makes the mean zero; the spread is mostly the
  // correlation of tau with the game, so use the empirical standard error.
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int reps = 200;
  std::vector<double> xs;
  for (int r = 0; r < reps; ++r) {
    const SyntheticGame g(SyntheticGameSpec::make(SyntheticKind::kNonlinear, draw_weights(10, 1000 + r)));
    std::vector<double> tau(10);
    for (auto& x : tau) x = normal(rng);
    xs.push_back(lds(att(tau), g, {0.5, 100, static_cast<std::uint64_t>(r)}));
  }
  const auto s = summarize(xs);
  const double mean = s.mean;
  const double se = s.std / std::sqrt(static_cast<double>(reps));
  EXPECT_LE(std::abs(mean), 3 * se);
}

TEST(Lds, SubsetSampling) {
  const auto distinct = lds_subsets(10, {0.5, 100, 1});
  EXPECT_EQ(std::set<CoalitionMask>(distinct.begin(), distinct.end()).size(), 100u);
  for (const auto& m : distinct) EXPECT_EQ(m.count(), 5u);
  const auto small = lds_subsets(4, {0.5, 20, 1});  // only C(4,2) = 6 subsets exist
  EXPECT_EQ(small.size(), 20u);
  EXPECT_THROW(lds_subsets(10, {0.0, 100, 1}), std::invalid_argument);
  EXPECT_THROW(lds_subsets(3, {0.2, 100, 1}), std::invalid_argument);
}

TEST(Counterfactual, AdditiveTopOne) {
  const SyntheticGame g(SyntheticGameSpec::make(SyntheticKind::kLinear, {0.5, 2.0, 1.0, 0.25, 0.75}, 0.25));
  const auto phi = exact_shapley(g);
  const double v_full = g.utility(CoalitionMask::full(5));
  const double delta = counterfactual_delta(g, phi, 0.2, RemovalDirection::kTop);
  EXPECT_NEAR(delta, 100.0 * -2.0 / v_full, 1e-12);
  EXPECT_NEAR(counterfactual_delta(g, phi, 0.2, RemovalDirection::kBottom), 100.0 * -0.25 / v_full, 1e-12);
}

TEST(Counterfactual, NullPlayerRemoval) {
  const auto base = std::make_shared<SyntheticGame>(SyntheticGameSpec::make(SyntheticKind::kLinear, {1.0, 2.0, 3.0, 4.0}));
  const auto g = with_null_player(base);
  EXPECT_EQ(removal_delta(*g, {4}), 0.0);
}

TEST(Counterfactual, SelectionTiesToLowerIndex) {
  const auto a = att({1.0, 3.0, 3.0, 0.0, 0.0});
  EXPECT_EQ(select_players(a, 2, RemovalDirection::kTop), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(select_players(a, 1, RemovalDirection::kTop), (std::vector<std::size_t>{1}));
  EXPECT_EQ(select_players(a, 1, RemovalDirection::kBottom), (std::vector<std::size_t>{3}));
}

TEST(Counterfactual, Errors) {
  FunctionGame zero(5, [](const CoalitionMask&) { return 0.0; });
  EXPECT_THROW(removal_delta(zero, {0}), std::invalid_argument);
  EXPECT_THROW(removal_count(5, 0.0), std::invalid_argument);
  EXPECT_THROW(removal_count(2, 0.1), std::invalid_argument);
  EXPECT_EQ(removal_count(10, 0.2), 2u);
}

TEST(Counterfactual, TopBelowBottomForMonotoneGames) {
  double top = 0.0, bottom = 0.0;
  const int seeds = 30;
  for (int s = 0; s < seeds; ++s) {
    auto w = draw_weights(10, 500 + s);
    for (auto& x : w) x = std::abs(x);  // monotone
    const SyntheticGame g(SyntheticGameSpec::make(SyntheticKind::kNonlinear, w));
    const auto phi = exact_shapley(g);
    top += counterfactual_delta(g, phi, 0.2, RemovalDirection::kTop);
    bottom += counterfactual_delta(g, phi, 0.2, RemovalDirection::kBottom);
  }
  EXPECT_LE(top / seeds, bottom / seeds);
}

TEST(Fidelity, Examples) {
  const auto same = fidelity_metrics({0.0, 1.0, 2.0}, {0.0, 1.0, 2.0});
  EXPECT_EQ(same.nmae, 0.0);
  EXPECT_EQ(same.nrmse, 0.0);
  EXPECT_EQ(same.mae, 0.0);
  const auto m = fidelity_metrics({0.1, 0.9}, {0.0, 1.0});
  EXPECT_NEAR(m.mae, 0.1, 1e-15);
  EXPECT_NEAR(m.nmae, 0.1, 1e-15);
  EXPECT_NEAR(m.rmse, 0.1, 1e-15);
  EXPECT_THROW(fidelity_metrics({1.0, 2.0}, {1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(fidelity_metrics({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST(Fidelity, AffineInvariance) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> p(50), r(50);
  for (std::size_t i = 0; i < 50; ++i) {
    r[i] = normal(rng);
    p[i] = r[i] + 0.1 * normal(rng);
  }
  const auto base = fidelity_metrics(p, r);
  for (auto [a, b] : {std::pair{2.0, 1.0}, std::pair{-0.5, 3.0}, std::pair{100.0, -7.0}}) {
    std::vector<double> p2(50), r2(50);
    for (std::size_t i = 0; i < 50; ++i) {
      p2[i] = a * p[i] + b;
      r2[i] = a * r[i] + b;
    }
    const auto t = fidelity_metrics(p2, r2);
    EXPECT_NEAR(t.nmae, base.nmae, 1e-12);
    EXPECT_NEAR(t.nrmse, base.nrmse, 1e-12);
  }
}

TEST(Summary, Basics) {
  const auto s = summarize({1.0, 2.0, 3.0, 10.0});
  EXPECT_DOUBLE_EQ(s.mean, 4.0);
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_NEAR(s.std, std::sqrt(((9 + 4 + 1 + 36)) / 3.0), 1e-12);
  EXPECT_EQ(s.count, 4u);
  const auto one = summarize({0.3});
  EXPECT_EQ(one.mean, 0.3);
  EXPECT_EQ(one.median, 0.3);
  EXPECT_EQ(one.std, 0.0);
}

TEST(TrialReport, SingleTrialAggregateEqualsTrial) {
  const auto r = make_trial_report({{att({1.0, 2.0}), att({1.0, 1.0})}});
  EXPECT_EQ(r.rel_error.mean, r.rel_errors[0]);
  EXPECT_EQ(r.rel_error.median, r.rel_errors[0]);
  EXPECT_FALSE(r.has_decomposition);
}

TEST(TrialReport, DecompositionMatchesFixedGame) {
  const auto oracle = att({2.0, 0.0});
  const std::vector<Attribution> est = {att({2.5, 0.0}), att({1.5, 1.0}), att({2.0, -0.5})};
  std::vector<TrialRecord> recs;
  for (const auto& e : est) recs.push_back({e, oracle});
  const auto r = make_trial_report(recs);
  const auto bv = bias_variance(est, oracle);
  ASSERT_TRUE(r.has_decomposition);
  EXPECT_NEAR(r.decomposition.mse, bv.mse / 4.0, 1e-15);
  EXPECT_NEAR(r.decomposition.variance, bv.variance / 4.0, 1e-15);
  EXPECT_NEAR(r.decomposition.bias, bv.bias / 2.0, 1e-15);
}
