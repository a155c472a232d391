#ifndef COALSHAP_SHAP_HPP_
#define COALSHAP_SHAP_HPP_

// Shapley estimators: exact enumeration, constrained KernelSHAP regression,
// single-reference TreeSHAP on a boosted surrogate, and the end-to-end
// sample -> fit -> explain pipeline.

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "coalshap/core.hpp"
#include "coalshap/eval.hpp"
#include "coalshap/gbt.hpp"
#include "coalshap/sampling.hpp"
#include "json.hpp"

namespace coalshap {

inline constexpr std::size_t kDefaultEnumerationCap = 20;

// One pass over all 2^n coalitions. A coalition T contributes
// +w(|T|-1) v(T) to each member and -w(|T|) v(T) to each non-member, with
// w(s) = s! (n-s-1)! / n!.
inline Attribution exact_shapley(const Game& game, std::size_t enumeration_cap = kDefaultEnumerationCap) {
  const std::size_t n = game.n_players();
  if (n > enumeration_cap || n > 62) {
    throw std::invalid_argument("exact_shapley: n=" + std::to_string(n) + " exceeds the enumeration cap of " +
                                std::to_string(enumeration_cap));
  }
  std::vector<double> weight(n);
  for (std::size_t s = 0; s < n; ++s) weight[s] = 1.0 / (static_cast<double>(n) * binomial(n - 1, s));

  Attribution att;
  att.phi.assign(n, 0.0);
  att.estimator_name = "exact";
  const std::uint64_t total = std::uint64_t{1} << n;
  att.budget_m = total;
  std::vector<double> v(total);
  for (std::uint64_t code = 0; code < total; ++code) v[code] = game.utility(CoalitionMask::from_code(code, n));
  att.v_empty = v.front();
  att.v_full = v.back();
  // Marginal form, so a null player gets exactly zero.
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    double acc = 0.0;
    for (std::uint64_t code = 0; code < total; ++code) {
      if (code & bit) continue;
      acc += weight[static_cast<std::size_t>(std::popcount(code))] * (v[code | bit] - v[code]);
    }
    att.phi[i] = acc;
  }
  return att;
}

class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// KernelSHAP on pre-evaluated coalitions: least squares of z^T phi against
// v(S) - v(empty) over interior rows with uniform weights, subject to
// sum(phi) = v(N) - v(empty); the constraint is eliminated through the last
// player. The Shapley kernel enters only through the sampling distribution.
inline Attribution kernel_shap_from_dataset(const SampledDataset& data) {
  const std::size_t n = data.n;
  if (n < 2) throw std::invalid_argument("kernel_shap: n must be >= 2");
  const auto* empty = data.find(CoalitionMask::empty(n));
  const auto* full = data.find(CoalitionMask::full(n));
  if (!empty || !full) throw std::invalid_argument("kernel_shap: dataset lacks a boundary coalition");
  const double v0 = empty->utility;
  const double delta = full->utility - v0;

  std::vector<const DatasetRow*> interior;
  for (const auto& r : data.rows) {
    if (!r.mask.is_empty() && !r.mask.is_full()) interior.push_back(&r);
  }
  const auto p = static_cast<Eigen::Index>(n - 1);
  if (interior.size() < n - 1) {
    throw SingularSystemError("kernel_shap: " + std::to_string(interior.size()) +
                              " interior samples for " + std::to_string(n - 1) +
                              " unknowns; increase the budget");
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(interior.size()), p);
  Eigen::VectorXd y(static_cast<Eigen::Index>(interior.size()));
  for (std::size_t r = 0; r < interior.size(); ++r) {
    const auto& m = interior[r]->mask;
    const double last = m[n - 1] ? 1.0 : 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = (m[i] ? 1.0 : 0.0) - last;
    y(static_cast<Eigen::Index>(r)) = interior[r]->utility - v0 - last * delta;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < p) {
    throw SingularSystemError("kernel_shap: sampled coalitions do not determine all " + std::to_string(n) +
                              " attributions (rank " + std::to_string(qr.rank()) + "); increase the budget");
  }
  const Eigen::VectorXd beta = qr.solve(y);

  Attribution att;
  att.estimator_name = "kernel_shap";
  att.phi.resize(n);
  double partial = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    att.phi[i] = beta(static_cast<Eigen::Index>(i));
    partial += att.phi[i];
  }
  att.phi[n - 1] = delta - partial;
  att.v_full = full->utility;
  att.v_empty = v0;
  att.budget_m = data.size();
  return att;
}

inline Attribution kernel_shap(const Game& game, std::uint64_t budget_m, std::uint64_t seed) {
  const std::size_t n = game.n_players();
  if (n < 2) throw std::invalid_argument("kernel_shap: n must be >= 2");
  if (budget_m < 2) throw std::invalid_argument("kernel_shap: budget_m must be >= 2");
  const auto masks = sample_coalitions(n, {SamplingKind::kShapleyKernel, budget_m}, derive_seed(seed, "sample", 0));
  auto att = kernel_shap_from_dataset(build_dataset(game, masks));
  att.seed = seed;
  att.budget_m = budget_m;
  return att;
}

namespace detail {

// 1 / (a * C(a + b, a)) == (a-1)! b! / (a+b)!
inline double path_coefficient(std::size_t a, std::size_t b) {
  return 1.0 / (static_cast<double>(a) * binomial(a + b, a));
}

// Each leaf is reached by the hybrid input (1 on S, 0 elsewhere) iff every
// right-branch feature A of its path is in S and no left-branch feature B
// is. The Shapley value of that indicator is (|A|-1)!|B|!/(|A|+|B|)! for
// members of A and -|A|!(|B|-1)!/(|A|+|B|)! for members of B.
inline void accumulate_tree(const Tree& tree, std::vector<double>& phi) {
  std::vector<std::size_t> right_feats;
  std::vector<std::size_t> left_feats;
  auto visit = [&](auto&& self, int id) -> void {
    const auto& nd = tree.nodes[id];
    if (nd.is_leaf()) {
      const std::size_t a = right_feats.size();
      const std::size_t b = left_feats.size();
      if (a > 0) {
        const double c = nd.value * path_coefficient(a, b);
        for (auto f : right_feats) phi[f] += c;
      }
      if (b > 0) {
        const double c = nd.value * path_coefficient(b, a);
        for (auto f : left_feats) phi[f] -= c;
      }
      return;
    }
    const auto f = static_cast<std::size_t>(nd.feature);
    left_feats.push_back(f);
    self(self, nd.left);
    left_feats.pop_back();
    right_feats.push_back(f);
    self(self, nd.right);
    right_feats.pop_back();
  };
  visit(visit, 0);
}

}  // namespace detail

// Exact Shapley values of S -> predict(model, 1_S), i.e. interventional
// TreeSHAP with foreground all-ones and the single background all-zeros.
inline Attribution tree_shap(const SurrogateModel& model) {
  const std::size_t n = model.n_players;
  if (n == 0) throw std::invalid_argument("tree_shap: model has no players");
  for (const auto& t : model.trees) t.validate(n);
  std::vector<double> raw(n, 0.0);
  for (const auto& t : model.trees) detail::accumulate_tree(t, raw);
  Attribution att;
  att.estimator_name = "tree_shap";
  att.phi.resize(n);
  for (std::size_t i = 0; i < n; ++i) att.phi[i] = model.learning_rate * raw[i];
  att.v_full = predict(model, CoalitionMask::full(n));
  att.v_empty = predict(model, CoalitionMask::empty(n));
  att.seed = model.seed;
  return att;
}

struct SurrogateShapResult {
  Attribution attribution;
  SurrogateModel model;
  SampledDataset dataset;
  std::vector<double> cv_mse;
};

inline constexpr std::size_t kCvFolds = 5;

// Grid search + TreeSHAP over recorded utilities. Boundary values come from
// the first empty/full rows; no game queries.
inline SurrogateShapResult shapley_of_dataset(SampledDataset data, const std::vector<HyperParams>& grid,
                                              std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("shapley_of_dataset: empty dataset");
  const auto* empty = data.find(CoalitionMask::empty(data.n));
  const auto* full = data.find(CoalitionMask::full(data.n));
  if (!empty) throw std::invalid_argument("shapley_of_dataset: dataset lacks the all-zeros coalition");
  if (!full) throw std::invalid_argument("shapley_of_dataset: dataset lacks the all-ones coalition");
  const double v_empty = empty->utility;
  const double v_full = full->utility;
  auto search = grid_search_cv(data, grid, kCvFolds, derive_seed(seed, "cv", 0));
  SurrogateShapResult out;
  out.attribution = tree_shap(search.model);
  out.attribution.estimator_name = "surrogate_shap";
  out.attribution.seed = seed;
  out.attribution.budget_m = data.size();
  out.attribution.v_empty = v_empty;
  out.attribution.v_full = v_full;
  out.model = std::move(search.model);
  out.cv_mse = std::move(search.cv_mse);
  out.dataset = std::move(data);
  return out;
}

// Kernel-distributed sampling with forced boundaries, utility queries,
// cross-validated boosted surrogate, TreeSHAP. budget_m counts utility
// queries only.
inline SurrogateShapResult surrogate_shap(const Game& game, std::uint64_t budget_m,
                                          const std::vector<HyperParams>& grid, std::uint64_t seed) {
  const std::size_t n = game.n_players();
  if (n < 2) throw std::invalid_argument("surrogate_shap: n must be >= 2");
  if (budget_m < 2) throw std::invalid_argument("surrogate_shap: budget_m must be >= 2");
  const auto masks = sample_coalitions(n, {SamplingKind::kShapleyKernel, budget_m}, derive_seed(seed, "sample", 0));
  auto out = shapley_of_dataset(build_dataset(game, masks), grid, seed);
  out.attribution.budget_m = budget_m;
  return out;
}

enum class EstimatorKind { kExact, kKernelShap, kSurrogateShap };

inline std::string_view to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::kExact: return "exact";
    case EstimatorKind::kKernelShap: return "kernel_shap";
    case EstimatorKind::kSurrogateShap: return "surrogate_shap";
  }
  throw std::invalid_argument("unknown estimator kind");
}

inline EstimatorKind parse_estimator_kind(std::string_view s) {
  if (s == "exact") return EstimatorKind::kExact;
  if (s == "kernel_shap") return EstimatorKind::kKernelShap;
  if (s == "surrogate_shap") return EstimatorKind::kSurrogateShap;
  throw std::invalid_argument("unknown estimator '" + std::string(s) + "'");
}

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::kSurrogateShap;
  std::uint64_t budget_m = 0;  // ignored by exact
  std::vector<HyperParams> grid = default_grid();
  std::uint64_t seed = 0;
  std::size_t enumeration_cap = kDefaultEnumerationCap;
};

struct EstimateResult {
  Attribution attribution;
  std::optional<SurrogateModel> model;
};

inline EstimateResult estimate(const Game& game, const EstimatorConfig& cfg) {
  EstimateResult r;
  switch (cfg.kind) {
    case EstimatorKind::kExact:
      r.attribution = exact_shapley(game, cfg.enumeration_cap);
      r.attribution.seed = cfg.seed;
      break;
    case EstimatorKind::kKernelShap:
      r.attribution = kernel_shap(game, cfg.budget_m, cfg.seed);
      break;
    case EstimatorKind::kSurrogateShap: {
      auto s = surrogate_shap(game, cfg.budget_m, cfg.grid, cfg.seed);
      r.attribution = std::move(s.attribution);
      r.model = std::move(s.model);
      break;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Attribution document: {"format", "estimator", "variant"?, "n", "budget_m",
// "seed", "phi", "v_full", "v_empty", "efficiency_gap", "hyperparams"?}.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kKernelShapVariant = "kernel_sampling_uniform_weights";

inline nlohmann::json attribution_to_json(const Attribution& att, const std::optional<HyperParams>& hp = std::nullopt) {
  nlohmann::json j = {{"format", "coalshap.attribution/1"},
                      {"estimator", att.estimator_name},
                      {"n", att.n()},
                      {"budget_m", att.budget_m},
                      {"seed", att.seed},
                      {"phi", att.phi},
                      {"v_full", att.v_full},
                      {"v_empty", att.v_empty},
                      {"efficiency_gap", efficiency_gap(att)}};
  if (att.estimator_name == "kernel_shap") j["variant"] = kKernelShapVariant;
  if (hp) j["hyperparams"] = hyperparams_to_json(*hp);
  return j;
}

inline Attribution attribution_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "coalshap.attribution/1") {
    throw std::invalid_argument("attribution document: unknown format");
  }
  Attribution att;
  att.estimator_name = j.at("estimator").get<std::string>();
  att.budget_m = j.at("budget_m").get<std::uint64_t>();
  att.seed = j.at("seed").get<std::uint64_t>();
  att.phi = j.at("phi").get<std::vector<double>>();
  att.v_full = j.at("v_full").get<double>();
  att.v_empty = j.at("v_empty").get<double>();
  if (j.at("n").get<std::size_t>() != att.phi.size()) {
    throw std::invalid_argument("attribution document: n does not match phi length");
  }
  return att;
}

}  // namespace coalshap

#endif  // COALSHAP_SHAP_HPP_
