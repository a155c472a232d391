#ifndef COALSHAP_EXPERIMENTS_HPP_
#define COALSHAP_EXPERIMENTS_HPP_

// Batch experiment runner behind the command line tool.
//
// A run is (config document, base seed, thread count) -> tables. Work is
// split into independent jobs whose results land in fixed slots, and tables
// are assembled in job order afterwards, so the bytes written never depend on
// the thread count.

#include <algorithm>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coalshap/core.hpp"
#include "coalshap/eval.hpp"
#include "coalshap/games.hpp"
#include "coalshap/gbt.hpp"
#include "coalshap/parallel.hpp"
#include "coalshap/sampling.hpp"
#include "coalshap/shap.hpp"
#include "json.hpp"

namespace coalshap {

inline constexpr std::string_view kVersion = "0.1.0";

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& path, const std::string& msg)
      : std::invalid_argument("config: " + (path.empty() ? std::string("<root>") : path) + ": " + msg) {}
};

namespace detail {

// Object reader that rejects unknown keys and reports field paths.
class Fields {
 public:
  Fields(const nlohmann::json& j, std::string path, std::initializer_list<std::string_view> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    for (const auto& [k, v] : j_.items()) {
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
        throw ConfigError(sub(k), "unknown key");
      }
    }
  }

  bool has(std::string_view key) const { return j_.contains(key) && !j_.at(std::string(key)).is_null(); }
  std::string sub(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }
  const nlohmann::json& at(std::string_view key) const {
    if (!has(key)) throw ConfigError(sub(key), "missing required field");
    return j_.at(std::string(key));
  }

  template <typename T>
  T get(std::string_view key) const {
    const auto& v = at(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(sub(key), "expected a number");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw ConfigError(sub(key), "expected an integer");
        if (std::is_unsigned_v<T> && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
          throw ConfigError(sub(key), "expected a non-negative integer");
        }
      }
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(sub(key), "wrong type");
    }
  }

  template <typename T>
  T get(std::string_view key, T fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
};

inline std::string index_path(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

inline const nlohmann::json& require_array(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array");
  return j;
}

template <typename T>
std::vector<T> read_list(const nlohmann::json& j, const std::string& path) {
  require_array(j, path);
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& v = j[i];
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(index_path(path, i), "expected a number");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ConfigError(index_path(path, i), "expected a non-negative integer");
      }
    } else {
      if (!v.is_string()) throw ConfigError(index_path(path, i), "expected a string");
    }
    out.push_back(v.get<T>());
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct GameConfig {
  enum class Source { kSynthetic, kMixture, kDataset };

  std::string name;
  Source source = Source::kSynthetic;

  // synthetic
  SyntheticKind synthetic_kind = SyntheticKind::kLinear;
  std::size_t n = 0;
  std::optional<std::vector<double>> weights;  // drawn per trial when absent
  double b = 0.25;
  double saturation_scale = 3.0;
  std::optional<std::vector<PairTerm>> pairs;
  std::optional<std::optional<TripleTerm>> tri;

  // mixture: either a fixed spec or random draws per trial
  std::optional<MixtureGameSpec> mixture;
  std::size_t labels_per_player = 2;
  std::size_t dim = 4;
  double sigma = 1.0;
  double epsilon = 0.0;
  bool frechet = false;
  double sigma_ref = 1.0;
  DriftMagnitude drift_magnitude = DriftMagnitude::kExact;

  // dataset
  std::string path;

  std::size_t n_players() const {
    switch (source) {
      case Source::kSynthetic: return n;
      case Source::kMixture: return mixture ? mixture->n_players : n;
      case Source::kDataset: return 0;
    }
    return 0;
  }
};

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::kSurrogateShap;
  std::vector<std::uint64_t> budgets;  // empty for exact
};

struct ChecksConfig {
  double exact_efficiency_gap_max = 1e-10;
  std::optional<double> efficiency_gap_max;  // median per (estimator, budget)
  std::uint64_t efficiency_gap_min_budget = 64;
  std::optional<double> null_player_max;  // median at the largest budget
  bool null_player_monotone = false;
  bool fidelity_bound = true;
};

struct ExperimentConfig {
  std::vector<GameConfig> games;
  std::vector<EstimatorSpec> estimators;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::string out = "out";
  std::vector<HyperParams> grid = default_grid();
  std::size_t enumeration_cap = kDefaultEnumerationCap;
  bool null_player = true;
  std::vector<double> lds_alphas = {0.25, 0.5, 0.75};
  std::size_t lds_subsets = 100;
  double k_frac = 0.2;
  std::size_t fidelity_coalitions = 100;
  std::vector<double> fidelity_epsilons = {0.0, 0.1, 1.0};
  std::vector<std::string> metrics = {"rel_l2_error", "efficiency_gap", "max_abs_error"};
  ChecksConfig checks;
  std::uint64_t config_hash = 0;
};

namespace detail {

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base_dir) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  return path.lexically_normal().string();
}

inline MixtureGameSpec parse_mixture_spec(const Fields& f, const GameConfig& g) {
  MixtureGameSpec spec;
  spec.n_players = f.get<std::size_t>("n_players");
  spec.labels = read_list<std::string>(f.at("labels"), f.sub("labels"));
  spec.counts = read_list<double>(f.at("counts"), f.sub("counts"));
  spec.owner = read_list<std::size_t>(f.at("owner"), f.sub("owner"));
  const auto& mu = require_array(f.at("mu"), f.sub("mu"));
  for (std::size_t y = 0; y < mu.size(); ++y) spec.mu.push_back(read_list<double>(mu[y], index_path(f.sub("mu"), y)));
  spec.sigma = g.sigma;
  spec.epsilon = g.epsilon;
  spec.drift_magnitude = g.drift_magnitude;
  spec.drift_seed = f.get<std::uint64_t>("drift_seed", 0);
  spec.empty_utility = f.get<double>("empty_utility", 0.0);
  if (g.frechet) {
    spec.scorer = FrechetToReference{read_list<double>(f.at("mu_ref"), f.sub("mu_ref")), g.sigma_ref};
  } else {
    spec.scorer = LinearMeanScore{read_list<double>(f.at("a"), f.sub("a"))};
  }
  return spec;
}

inline GameConfig parse_game(const nlohmann::json& j, const std::string& path, const std::filesystem::path& base_dir) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw ConfigError(path + ".kind", "missing or not a string");
  }
  const std::string kind = j.at("kind").get<std::string>();
  GameConfig g;
  if (kind == "dataset") {
    Fields f(j, path, {"kind", "name", "path"});
    g.source = GameConfig::Source::kDataset;
    g.path = resolve_path(f.get<std::string>("path"), base_dir);
    if (!std::filesystem::is_regular_file(g.path)) throw ConfigError(f.sub("path"), "file not found: " + g.path);
    g.name = f.get<std::string>("name", "dataset");
    return g;
  }
  if (kind == "mixture") {
    Fields f(j, path,
             {"kind", "name", "n_players", "labels_per_player", "dim", "sigma", "epsilon", "scorer", "sigma_ref",
              "drift_magnitude", "labels", "counts", "owner", "mu", "a", "mu_ref", "drift_seed", "empty_utility"});
    g.source = GameConfig::Source::kMixture;
    g.name = f.get<std::string>("name", "mixture");
    g.n = f.get<std::size_t>("n_players");
    g.labels_per_player = f.get<std::size_t>("labels_per_player", 2);
    g.dim = f.get<std::size_t>("dim", 4);
    g.sigma = f.get<double>("sigma", 1.0);
    g.epsilon = f.get<double>("epsilon", 0.0);
    g.sigma_ref = f.get<double>("sigma_ref", 1.0);
    const auto scorer = f.get<std::string>("scorer", "linear");
    if (scorer != "linear" && scorer != "frechet") throw ConfigError(f.sub("scorer"), "expected 'linear' or 'frechet'");
    g.frechet = scorer == "frechet";
    const auto drift = f.get<std::string>("drift_magnitude", "exact");
    if (drift != "exact" && drift != "uniform") {
      throw ConfigError(f.sub("drift_magnitude"), "expected 'exact' or 'uniform'");
    }
    g.drift_magnitude = drift == "exact" ? DriftMagnitude::kExact : DriftMagnitude::kUniform;
    if (g.n < 2) throw ConfigError(f.sub("n_players"), "must be >= 2");
    if (g.labels_per_player < 1) throw ConfigError(f.sub("labels_per_player"), "must be >= 1");
    if (g.dim < 1) throw ConfigError(f.sub("dim"), "must be >= 1");
    if (!(g.sigma >= 0.0)) throw ConfigError(f.sub("sigma"), "must be >= 0");
    if (!(g.epsilon >= 0.0)) throw ConfigError(f.sub("epsilon"), "must be >= 0");
    if (!(g.sigma_ref >= 0.0)) throw ConfigError(f.sub("sigma_ref"), "must be >= 0");
    if (f.has("mu")) {
      auto spec = parse_mixture_spec(f, g);
      try {
        spec.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
      }
      g.mixture = std::move(spec);
    }
    return g;
  }
  Fields f(j, path, {"kind", "name", "n", "weights", "b", "saturation_scale", "pairs", "tri"});
  g.source = GameConfig::Source::kSynthetic;
  try {
    g.synthetic_kind = parse_synthetic_kind(kind);
  } catch (const std::invalid_argument&) {
    throw ConfigError(f.sub("kind"), "unknown game kind '" + kind + "'");
  }
  g.name = f.get<std::string>("name", kind);
  g.b = f.get<double>("b", 0.25);
  g.saturation_scale = f.get<double>("saturation_scale", 3.0);
  if (f.has("weights")) {
    g.weights = read_list<double>(f.at("weights"), f.sub("weights"));
    g.n = g.weights->size();
    if (f.has("n") && f.get<std::size_t>("n") != g.n) throw ConfigError(f.sub("weights"), "length differs from n");
  } else {
    g.n = f.get<std::size_t>("n");
  }
  if (g.n < 2) throw ConfigError(f.sub("n"), "must be >= 2");
  if (f.has("pairs")) {
    const auto& arr = require_array(f.at("pairs"), f.sub("pairs"));
    std::vector<PairTerm> pairs;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto v = read_list<double>(arr[i], index_path(f.sub("pairs"), i));
      if (v.size() != 3 || v[0] < 0 || v[1] < 0) {
        throw ConfigError(index_path(f.sub("pairs"), i), "expected [i, j, alpha]");
      }
      pairs.push_back({static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]), v[2]});
    }
    g.pairs = std::move(pairs);
  }
  if (j.contains("tri")) {
    if (j.at("tri").is_null()) {
      g.tri = std::optional<TripleTerm>{};
    } else {
      const auto v = read_list<double>(j.at("tri"), f.sub("tri"));
      if (v.size() != 4 || v[0] < 0 || v[1] < 0 || v[2] < 0) throw ConfigError(f.sub("tri"), "expected [i, j, k, alpha]");
      g.tri = std::optional<TripleTerm>(
          TripleTerm{static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]), static_cast<std::size_t>(v[2]), v[3]});
    }
  }
  return g;
}

inline std::vector<HyperParams> parse_grid(const nlohmann::json& j, const std::string& path) {
  Fields f(j, path, {"max_depth", "n_trees", "learning_rate", "l1_alpha"});
  const auto depths = read_list<std::size_t>(f.at("max_depth"), f.sub("max_depth"));
  const auto trees = read_list<std::size_t>(f.at("n_trees"), f.sub("n_trees"));
  const auto lrs = read_list<double>(f.at("learning_rate"), f.sub("learning_rate"));
  const auto alphas = read_list<double>(f.at("l1_alpha"), f.sub("l1_alpha"));
  std::vector<HyperParams> grid;
  for (auto d : depths) {
    for (auto t : trees) {
      for (double lr : lrs) {
        for (double a : alphas) {
          HyperParams hp{static_cast<int>(d), static_cast<int>(t), lr, a};
          try {
            hp.validate();
          } catch (const std::invalid_argument& e) {
            throw ConfigError(path, e.what());
          }
          grid.push_back(hp);
        }
      }
    }
  }
  if (grid.empty()) throw ConfigError(path, "empty grid");
  return grid;
}

}  // namespace detail

// Parses a config document. Relative dataset paths resolve against base_dir.
// The config hash covers everything except the output directory.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using detail::Fields;
  Fields f(j, "",
           {"games", "estimators", "trials", "seed", "out", "grid", "enumeration_cap", "null_player", "lds",
            "counterfactual", "fidelity", "metrics", "checks"});
  ExperimentConfig cfg;
  const auto& games = detail::require_array(f.at("games"), "games");
  if (games.empty()) throw ConfigError("games", "at least one game is required");
  std::set<std::string> names;
  for (std::size_t i = 0; i < games.size(); ++i) {
    auto g = detail::parse_game(games[i], detail::index_path("games", i), base_dir);
    if (!names.insert(g.name).second) {
      throw ConfigError(detail::index_path("games", i) + ".name", "duplicate game name '" + g.name + "'");
    }
    cfg.games.push_back(std::move(g));
  }
  if (f.has("estimators")) {
    const auto& ests = detail::require_array(f.at("estimators"), "estimators");
    for (std::size_t i = 0; i < ests.size(); ++i) {
      const std::string p = detail::index_path("estimators", i);
      Fields ef(ests[i], p, {"kind", "budgets"});
      EstimatorSpec e;
      try {
        e.kind = parse_estimator_kind(ef.get<std::string>("kind"));
      } catch (const std::invalid_argument& ex) {
        if (dynamic_cast<const ConfigError*>(&ex)) throw;
        throw ConfigError(ef.sub("kind"), ex.what());
      }
      if (e.kind != EstimatorKind::kExact) {
        e.budgets = detail::read_list<std::uint64_t>(ef.at("budgets"), ef.sub("budgets"));
        if (e.budgets.empty()) throw ConfigError(ef.sub("budgets"), "at least one budget is required");
        for (std::size_t b = 0; b < e.budgets.size(); ++b) {
          if (e.budgets[b] < 2) throw ConfigError(detail::index_path(ef.sub("budgets"), b), "budget must be >= 2");
        }
      } else if (ef.has("budgets")) {
        throw ConfigError(ef.sub("budgets"), "the exact estimator takes no budgets");
      }
      cfg.estimators.push_back(std::move(e));
    }
  }
  cfg.trials = f.get<std::size_t>("trials", 1);
  if (cfg.trials < 1) throw ConfigError("trials", "must be >= 1");
  cfg.seed = f.get<std::uint64_t>("seed", 0);
  cfg.out = f.get<std::string>("out", "out");
  if (f.has("grid")) cfg.grid = detail::parse_grid(f.at("grid"), "grid");
  cfg.enumeration_cap = f.get<std::size_t>("enumeration_cap", kDefaultEnumerationCap);
  if (cfg.enumeration_cap < 1 || cfg.enumeration_cap > 30) throw ConfigError("enumeration_cap", "must be in [1, 30]");
  cfg.null_player = f.get<bool>("null_player", true);
  if (f.has("lds")) {
    Fields lf(f.at("lds"), "lds", {"alphas", "n_subsets"});
    if (lf.has("alphas")) cfg.lds_alphas = detail::read_list<double>(lf.at("alphas"), "lds.alphas");
    for (std::size_t i = 0; i < cfg.lds_alphas.size(); ++i) {
      if (!(cfg.lds_alphas[i] > 0.0 && cfg.lds_alphas[i] < 1.0)) {
        throw ConfigError(detail::index_path("lds.alphas", i), "must be in (0, 1)");
      }
    }
    cfg.lds_subsets = lf.get<std::size_t>("n_subsets", 100);
    if (cfg.lds_subsets < 2) throw ConfigError("lds.n_subsets", "must be >= 2");
  }
  if (f.has("counterfactual")) {
    Fields cf(f.at("counterfactual"), "counterfactual", {"k_frac"});
    cfg.k_frac = cf.get<double>("k_frac", 0.2);
    if (!(cfg.k_frac > 0.0 && cfg.k_frac < 1.0)) throw ConfigError("counterfactual.k_frac", "must be in (0, 1)");
  }
  if (f.has("fidelity")) {
    Fields ff(f.at("fidelity"), "fidelity", {"n_coalitions", "epsilons"});
    cfg.fidelity_coalitions = ff.get<std::size_t>("n_coalitions", 100);
    if (cfg.fidelity_coalitions < 2) throw ConfigError("fidelity.n_coalitions", "must be >= 2");
    if (ff.has("epsilons")) cfg.fidelity_epsilons = detail::read_list<double>(ff.at("epsilons"), "fidelity.epsilons");
    for (std::size_t i = 0; i < cfg.fidelity_epsilons.size(); ++i) {
      if (!(cfg.fidelity_epsilons[i] >= 0.0)) throw ConfigError(detail::index_path("fidelity.epsilons", i), "must be >= 0");
    }
  }
  if (f.has("metrics")) {
    cfg.metrics = detail::read_list<std::string>(f.at("metrics"), "metrics");
    for (std::size_t i = 0; i < cfg.metrics.size(); ++i) {
      const auto& m = cfg.metrics[i];
      if (m != "rel_l2_error" && m != "efficiency_gap" && m != "max_abs_error") {
        throw ConfigError(detail::index_path("metrics", i), "unknown metric '" + m + "'");
      }
    }
  }
  if (f.has("checks")) {
    Fields cf(f.at("checks"), "checks",
              {"exact_efficiency_gap_max", "efficiency_gap_max", "efficiency_gap_min_budget", "null_player_max",
               "null_player_monotone", "fidelity_bound"});
    cfg.checks.exact_efficiency_gap_max = cf.get<double>("exact_efficiency_gap_max", 1e-10);
    if (cf.has("efficiency_gap_max")) cfg.checks.efficiency_gap_max = cf.get<double>("efficiency_gap_max");
    cfg.checks.efficiency_gap_min_budget = cf.get<std::uint64_t>("efficiency_gap_min_budget", 64);
    if (cf.has("null_player_max")) cfg.checks.null_player_max = cf.get<double>("null_player_max");
    cfg.checks.null_player_monotone = cf.get<bool>("null_player_monotone", false);
    cfg.checks.fidelity_bound = cf.get<bool>("fidelity_bound", true);
  }
  auto hashed = j;
  hashed.erase("out");
  cfg.config_hash = detail::fnv1a64(hashed.dump());
  return cfg;
}

// Default documents per subcommand.
inline nlohmann::json default_config_json(std::string_view subcommand) {
  using nlohmann::json;
  const json budgets = json::array({64, 128, 256, 512, 1024});
  const json synthetic = json::array({{{"kind", "linear"}, {"n", 10}},
                                      {{"kind", "nonlinear"}, {"n", 10}},
                                      {{"kind", "interaction"}, {"n", 10}}});
  if (subcommand == "bench") {
    return {{"games", synthetic},
            {"estimators", json::array({{{"kind", "kernel_shap"}, {"budgets", budgets}},
                                        {{"kind", "surrogate_shap"}, {"budgets", budgets}}})},
            {"trials", 60}};
  }
  if (subcommand == "axioms") {
    return {{"games", synthetic},
            {"estimators", json::array({{{"kind", "exact"}}, {{"kind", "surrogate_shap"}, {"budgets", budgets}}})},
            {"trials", 60},
            {"null_player", true},
            {"checks", {{"efficiency_gap_max", 0.01}, {"null_player_max", 1e-3}, {"null_player_monotone", true}}}};
  }
  if (subcommand == "fidelity") {
    return {{"games", json::array({{{"kind", "mixture"}, {"n_players", 10}, {"labels_per_player", 2}, {"dim", 4}}})},
            {"fidelity", {{"n_coalitions", 100}, {"epsilons", json::array({0.0, 0.1, 1.0})}}}};
  }
  if (subcommand == "attribute") {
    return {{"games", json::array({{{"kind", "interaction"}, {"n", 10}}})},
            {"estimators", json::array({{{"kind", "surrogate_shap"}, {"budgets", json::array({512})}}})}};
  }
  if (subcommand == "lds") {
    return {{"games", synthetic},
            {"estimators", json::array({{{"kind", "exact"}},
                                        {{"kind", "kernel_shap"}, {"budgets", json::array({512})}},
                                        {{"kind", "surrogate_shap"}, {"budgets", json::array({512})}}})},
            {"trials", 5}};
  }
  if (subcommand == "counterfactual") {
    return {{"games", json::array({{{"kind", "interaction"}, {"n", 10}}})},
            {"estimators", json::array({{{"kind", "exact"}}})},
            {"trials", 30}};
  }
  throw std::invalid_argument("unknown subcommand '" + std::string(subcommand) + "'");
}

// ---------------------------------------------------------------------------
// Game instantiation
// ---------------------------------------------------------------------------

inline std::uint64_t trial_seed(std::uint64_t base, std::size_t t) { return derive_seed(base, "trial", t); }

inline SyntheticGameSpec synthetic_spec(const GameConfig& g, std::uint64_t tseed) {
  auto w = g.weights ? *g.weights : draw_weights(g.n, derive_seed(tseed, "weights", 0));
  SyntheticGameSpec spec;
  spec.kind = g.synthetic_kind;
  spec.n = g.n;
  spec.w = std::move(w);
  spec.b = g.b;
  spec.saturation_scale = g.saturation_scale;
  if (g.synthetic_kind == SyntheticKind::kInteraction) {
    spec.pairs = g.pairs ? *g.pairs : SyntheticGameSpec::default_pairs();
    spec.tri = g.tri ? *g.tri : std::optional<TripleTerm>(SyntheticGameSpec::default_tri());
  } else {
    if (g.pairs) spec.pairs = *g.pairs;
    if (g.tri) spec.tri = *g.tri;
  }
  spec.validate();
  return spec;
}

inline MixtureGameSpec mixture_spec(const GameConfig& g, std::uint64_t tseed, std::optional<double> epsilon = {}) {
  MixtureGameSpec spec;
  if (g.mixture) {
    spec = *g.mixture;
  } else {
    const std::uint64_t s = derive_seed(tseed, "mixture", 0);
    spec = make_random_mixture(g.n, g.labels_per_player, g.dim, g.sigma, g.epsilon, s);
    spec.drift_magnitude = g.drift_magnitude;
    if (g.frechet) {
      std::mt19937_64 rng(derive_seed(s, "reference", 0));
      std::normal_distribution<double> normal(0.0, 1.0);
      std::vector<double> ref(g.dim);
      for (auto& x : ref) x = normal(rng);
      spec.scorer = FrechetToReference{std::move(ref), g.sigma_ref};
    }
  }
  if (epsilon) spec.epsilon = *epsilon;
  spec.validate();
  return spec;
}

inline std::shared_ptr<const Game> make_game(const GameConfig& g, std::uint64_t tseed) {
  switch (g.source) {
    case GameConfig::Source::kSynthetic: return std::make_shared<SyntheticGame>(synthetic_spec(g, tseed));
    case GameConfig::Source::kMixture:
      return std::make_shared<MixtureGame>(mixture_spec(g, tseed), MixtureGame::Mode::kProxy);
    case GameConfig::Source::kDataset: break;
  }
  throw std::invalid_argument("game '" + g.name + "' is an external dataset and cannot be queried");
}

// ---------------------------------------------------------------------------
// Outcome of a run: tables to write, checks, and stdout lines.
// ---------------------------------------------------------------------------

struct Table {
  std::string file;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

struct Check {
  std::string name;
  bool passed = true;
  std::string detail;
};

// Per (game, estimator, budget) trial values; filled by bench and axioms.
struct CellResult {
  std::string game;
  std::string estimator;
  std::uint64_t budget_m = 0;
  std::vector<double> rel_errors;
  std::vector<double> efficiency_gaps;
  std::vector<double> null_abs;  // axioms only
  std::vector<double> max_abs_errors;
};

struct FidelityResult {
  std::string game;
  double epsilon = 0.0;
  std::size_t trial = 0;
  FidelityMetrics metrics;
  std::size_t violations = 0;
  double max_rms_drift = 0.0;
  bool has_bound = false;
};

struct Outcome {
  std::vector<Table> tables;
  std::vector<Check> checks;
  std::vector<std::string> messages;
  std::vector<CellResult> cells;
  std::vector<FidelityResult> fidelity;
  std::vector<std::pair<std::string, std::string>> json_files;  // (file, text)

  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
  const CellResult* cell(std::string_view game, std::string_view estimator, std::uint64_t budget) const {
    for (const auto& c : cells) {
      if (c.game == game && c.estimator == estimator && c.budget_m == budget) return &c;
    }
    return nullptr;
  }
};

inline std::string header_line(const ExperimentConfig& cfg, std::string_view prefix = "#") {
  char buf[128];
  std::snprintf(buf, sizeof(buf), " coalshap %.*s config_hash=%016" PRIx64 " seed=%" PRIu64,
                static_cast<int>(kVersion.size()), kVersion.data(), cfg.config_hash, cfg.seed);
  return std::string(prefix) + buf;
}

// Writes every table and document under `dir`; returns the paths written.
inline std::vector<std::string> write_outcome(const Outcome& outcome, const ExperimentConfig& cfg,
                                              const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;
  auto open = [&](const std::string& name) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    written.push_back(path.string());
    return out;
  };
  for (const auto& t : outcome.tables) {
    auto out = open(t.file);
    out << header_line(cfg) << '\n';
    for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << t.columns[c];
    out << '\n';
    for (const auto& row : t.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
      out << '\n';
    }
    if (!out) throw std::runtime_error("write failed for '" + t.file + "'");
  }
  for (const auto& [name, text] : outcome.json_files) {
    auto out = open(name);
    out << header_line(cfg, "//") << '\n' << text << '\n';
    if (!out) throw std::runtime_error("write failed for '" + name + "'");
  }
  return written;
}

// Reads a JSON document written by write_outcome (leading // comment allowed).
inline nlohmann::json read_json_document(std::istream& in) {
  return nlohmann::json::parse(in, nullptr, true, true);
}

namespace detail {

inline std::string fmt(double x) { return format_double(x); }
inline std::string fmt(std::uint64_t x) { return std::to_string(x); }

inline void require_queryable(const ExperimentConfig& cfg, std::string_view what, bool need_oracle) {
  for (std::size_t i = 0; i < cfg.games.size(); ++i) {
    const auto& g = cfg.games[i];
    const std::string p = index_path("games", i);
    if (g.source == GameConfig::Source::kDataset) {
      throw ConfigError(p + ".kind", std::string(what) + " needs a queryable game, not a dataset");
    }
    if (need_oracle && g.n_players() + (what == "axioms" && cfg.null_player ? 1 : 0) > cfg.enumeration_cap) {
      throw ConfigError(p, "n exceeds enumeration_cap; the exact oracle is required");
    }
  }
}

inline void require_estimators(const ExperimentConfig& cfg) {
  if (cfg.estimators.empty()) throw ConfigError("estimators", "at least one estimator is required");
}

struct Cell {
  EstimatorKind kind;
  std::uint64_t budget;  // 0 for exact
};

inline std::vector<Cell> cells_of(const ExperimentConfig& cfg) {
  std::vector<Cell> out;
  for (const auto& e : cfg.estimators) {
    if (e.kind == EstimatorKind::kExact) {
      out.push_back({e.kind, 0});
    } else {
      for (auto b : e.budgets) out.push_back({e.kind, b});
    }
  }
  return out;
}

inline Attribution run_estimator(const Game& game, const Cell& cell, const ExperimentConfig& cfg, std::uint64_t tseed) {
  EstimatorConfig ec;
  ec.kind = cell.kind;
  ec.budget_m = cell.budget;
  ec.grid = cfg.grid;
  ec.enumeration_cap = cfg.enumeration_cap;
  // Kernel and surrogate estimators at the same budget share a seed, hence
  // the same sampled coalitions.
  ec.seed = derive_seed(tseed, "estimate", cell.budget);
  return estimate(game, ec).attribution;
}

inline double max_abs_error(const Attribution& est, const Attribution& oracle) {
  double m = 0.0;
  for (std::size_t i = 0; i < est.n(); ++i) m = std::max(m, std::abs(est.phi[i] - oracle.phi[i]));
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// bench: relative L2 error vs the exact oracle, per (estimator, budget, trial)
// ---------------------------------------------------------------------------

inline Outcome run_bench(const ExperimentConfig& cfg, std::size_t threads) {
  detail::require_queryable(cfg, "bench", true);
  detail::require_estimators(cfg);
  const auto cells = detail::cells_of(cfg);
  Outcome outcome;
  for (const auto& g : cfg.games) {
    const std::size_t T = cfg.trials;
    std::vector<std::shared_ptr<const Game>> games(T);
    std::vector<Attribution> oracles(T);
    parallel_for(T, threads, [&](std::size_t t) {
      games[t] = make_game(g, trial_seed(cfg.seed, t));
      oracles[t] = exact_shapley(*games[t], cfg.enumeration_cap);
    });
    std::vector<Attribution> results(T * cells.size());
    parallel_for(results.size(), threads, [&](std::size_t job) {
      const std::size_t c = job / T;
      const std::size_t t = job % T;
      results[job] = detail::run_estimator(*games[t], cells[c], cfg, trial_seed(cfg.seed, t));
    });

    Table rows{"bench_" + g.name + ".csv", {"game", "estimator", "budget_m", "trial", "trial_seed"}, {}};
    for (const auto& m : cfg.metrics) rows.columns.push_back(m);
    Table summary{"bench_" + g.name + "_summary.csv",
                  {"game", "estimator", "budget_m", "trials", "rel_l2_mean", "rel_l2_std", "rel_l2_median", "bias",
                   "variance", "mse", "efficiency_gap_median"},
                  {}};
    for (std::size_t c = 0; c < cells.size(); ++c) {
      CellResult cell;
      cell.game = g.name;
      cell.estimator = std::string(to_string(cells[c].kind));
      std::vector<TrialRecord> records;
      for (std::size_t t = 0; t < T; ++t) {
        const auto& att = results[c * T + t];
        cell.budget_m = att.budget_m;
        const double rel = relative_l2_error(att, oracles[t]);
        const double gap = efficiency_gap(att);
        const double mx = detail::max_abs_error(att, oracles[t]);
        cell.rel_errors.push_back(rel);
        cell.efficiency_gaps.push_back(gap);
        cell.max_abs_errors.push_back(mx);
        std::vector<std::string> row = {g.name, cell.estimator, detail::fmt(att.budget_m), std::to_string(t),
                                        detail::fmt(trial_seed(cfg.seed, t))};
        for (const auto& m : cfg.metrics) {
          row.push_back(detail::fmt(m == "rel_l2_error" ? rel : m == "efficiency_gap" ? gap : mx));
        }
        rows.rows.push_back(std::move(row));
        records.push_back({att, oracles[t]});
      }
      const auto report = make_trial_report(std::move(records));
      const auto gaps = summarize(cell.efficiency_gaps);
      auto opt = [&](double x) { return report.has_decomposition ? detail::fmt(x) : std::string(); };
      summary.rows.push_back({g.name, cell.estimator, detail::fmt(cell.budget_m), std::to_string(T),
                              detail::fmt(report.rel_error.mean), detail::fmt(report.rel_error.std),
                              detail::fmt(report.rel_error.median), opt(report.decomposition.bias),
                              opt(report.decomposition.variance), opt(report.decomposition.mse),
                              detail::fmt(gaps.median)});
      outcome.messages.push_back(g.name + " " + cell.estimator + " M=" + std::to_string(cell.budget_m) +
                                 " rel_l2 mean=" + detail::fmt(report.rel_error.mean) +
                                 " std=" + detail::fmt(report.rel_error.std));
      outcome.cells.push_back(std::move(cell));
    }
    outcome.tables.push_back(std::move(rows));
    outcome.tables.push_back(std::move(summary));
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// axioms: efficiency gap against the true boundaries and |phi_null| vs budget
// ---------------------------------------------------------------------------

inline Outcome run_axioms(const ExperimentConfig& cfg, std::size_t threads) {
  detail::require_queryable(cfg, "axioms", true);
  detail::require_estimators(cfg);
  const auto cells = detail::cells_of(cfg);
  Outcome outcome;
  for (const auto& g : cfg.games) {
    const std::size_t T = cfg.trials;
    std::vector<std::shared_ptr<const Game>> games(T);
    std::vector<Attribution> oracles(T);
    std::vector<std::pair<double, double>> bounds(T);
    parallel_for(T, threads, [&](std::size_t t) {
      auto base = make_game(g, trial_seed(cfg.seed, t));
      games[t] = cfg.null_player ? with_null_player(base) : base;
      oracles[t] = exact_shapley(*games[t], cfg.enumeration_cap);
      const std::size_t n = games[t]->n_players();
      bounds[t] = {games[t]->utility(CoalitionMask::empty(n)), games[t]->utility(CoalitionMask::full(n))};
    });
    std::vector<Attribution> results(T * cells.size());
    parallel_for(results.size(), threads, [&](std::size_t job) {
      const std::size_t c = job / T;
      const std::size_t t = job % T;
      results[job] = detail::run_estimator(*games[t], cells[c], cfg, trial_seed(cfg.seed, t));
    });

    const std::size_t null_idx = games.front()->n_players() - 1;
    Table rows{"axioms_" + g.name + ".csv",
               {"game", "estimator", "budget_m", "trial", "efficiency_gap", "null_abs", "rel_l2_error"},
               {}};
    if (!cfg.null_player) rows.columns[5] = "null_abs_unused";
    Table summary{"axioms_" + g.name + "_summary.csv",
                  {"game", "estimator", "budget_m", "trials", "efficiency_gap_median", "efficiency_gap_max",
                   "null_abs_median", "rel_l2_mean"},
                  {}};
    std::map<std::string, std::vector<std::pair<std::uint64_t, double>>> null_curve;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      CellResult cell;
      cell.game = g.name;
      cell.estimator = std::string(to_string(cells[c].kind));
      for (std::size_t t = 0; t < T; ++t) {
        const auto& att = results[c * T + t];
        cell.budget_m = att.budget_m;
        double sum = 0.0;
        for (double x : att.phi) sum += x;
        const double gap = std::abs(sum - (bounds[t].second - bounds[t].first));
        const double null_abs = cfg.null_player ? std::abs(att.phi[null_idx]) : 0.0;
        const double rel = relative_l2_error(att, oracles[t]);
        cell.efficiency_gaps.push_back(gap);
        cell.null_abs.push_back(null_abs);
        cell.rel_errors.push_back(rel);
        rows.rows.push_back({g.name, cell.estimator, detail::fmt(att.budget_m), std::to_string(t), detail::fmt(gap),
                             detail::fmt(null_abs), detail::fmt(rel)});
      }
      const auto gap_s = summarize(cell.efficiency_gaps);
      const auto null_s = summarize(cell.null_abs);
      const auto rel_s = summarize(cell.rel_errors);
      const double gap_max = *std::max_element(cell.efficiency_gaps.begin(), cell.efficiency_gaps.end());
      summary.rows.push_back({g.name, cell.estimator, detail::fmt(cell.budget_m), std::to_string(T),
                              detail::fmt(gap_s.median), detail::fmt(gap_max), detail::fmt(null_s.median),
                              detail::fmt(rel_s.mean)});
      const std::string label = g.name + " " + cell.estimator + " M=" + std::to_string(cell.budget_m);
      outcome.messages.push_back(label + " gap median=" + detail::fmt(gap_s.median) +
                                 " null median=" + detail::fmt(null_s.median));
      if (cells[c].kind == EstimatorKind::kExact) {
        outcome.checks.push_back({label + " exact efficiency", gap_max <= cfg.checks.exact_efficiency_gap_max,
                                  "max gap " + detail::fmt(gap_max)});
      } else {
        if (cfg.checks.efficiency_gap_max && cell.budget_m >= cfg.checks.efficiency_gap_min_budget) {
          outcome.checks.push_back({label + " efficiency", gap_s.median <= *cfg.checks.efficiency_gap_max,
                                    "median gap " + detail::fmt(gap_s.median)});
        }
        null_curve[cell.estimator].push_back({cell.budget_m, null_s.median});
      }
      outcome.cells.push_back(std::move(cell));
    }
    if (cfg.null_player) {
      for (auto& [est, curve] : null_curve) {
        std::stable_sort(curve.begin(), curve.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        const std::string label = g.name + " " + est;
        if (cfg.checks.null_player_monotone) {
          bool mono = true;
          for (std::size_t i = 1; i < curve.size(); ++i) mono = mono && curve[i].second <= curve[i - 1].second;
          outcome.checks.push_back({label + " null-player monotone", mono, "median |phi_null| non-increasing in M"});
        }
        if (cfg.checks.null_player_max && !curve.empty()) {
          outcome.checks.push_back({label + " null-player at M=" + std::to_string(curve.back().first),
                                    curve.back().second <= *cfg.checks.null_player_max,
                                    "median " + detail::fmt(curve.back().second)});
        }
      }
    }
    outcome.tables.push_back(std::move(rows));
    outcome.tables.push_back(std::move(summary));
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// fidelity: proxy vs retrain utilities on kernel-distributed coalitions
// ---------------------------------------------------------------------------

inline Outcome run_fidelity(const ExperimentConfig& cfg, std::size_t threads) {
  for (std::size_t i = 0; i < cfg.games.size(); ++i) {
    if (cfg.games[i].source != GameConfig::Source::kMixture) {
      throw ConfigError(detail::index_path("games", i) + ".kind", "fidelity needs a mixture game");
    }
  }
  if (cfg.fidelity_epsilons.empty()) throw ConfigError("fidelity.epsilons", "at least one epsilon is required");
  Outcome outcome;
  for (const auto& g : cfg.games) {
    const std::size_t E = cfg.fidelity_epsilons.size();
    const std::size_t T = cfg.trials;
    struct Job {
      std::vector<CoalitionMask> masks;
      std::vector<double> proxy, retrain, drift;
      double bound = 0.0;
      bool has_bound = false;
    };
    std::vector<Job> jobs(E * T);
    parallel_for(jobs.size(), threads, [&](std::size_t job) {
      const std::size_t e = job / T;
      const std::size_t t = job % T;
      const std::uint64_t tseed = trial_seed(cfg.seed, t);
      const auto spec = mixture_spec(g, tseed, cfg.fidelity_epsilons[e]);
      auto masks = sample_coalitions(spec.n_players,
                                     {SamplingKind::kShapleyKernel, cfg.fidelity_coalitions + 2},
                                     derive_seed(tseed, "fidelity", 0));
      masks.erase(masks.begin(), masks.begin() + 2);
      Job& out = jobs[job];
      out.has_bound = std::holds_alternative<LinearMeanScore>(spec.scorer);
      if (out.has_bound) out.bound = lipschitz_constant(spec) * spec.epsilon;
      for (const auto& m : masks) {
        out.proxy.push_back(proxy_utility(spec, m));
        out.retrain.push_back(retrain_utility(spec, m));
        out.drift.push_back(rms_drift(spec, m));
      }
      out.masks = std::move(masks);
    });

    Table rows{"fidelity_" + g.name + ".csv",
               {"game", "epsilon", "trial", "coalition", "mask", "proxy", "retrain", "abs_delta", "rms_drift", "bound",
                "violation"},
               {}};
    Table summary{"fidelity_" + g.name + "_summary.csv",
                  {"game", "epsilon", "trial", "n_coalitions", "nmae", "nrmse", "mae", "rmse", "max_rms_drift",
                   "violations"},
                  {}};
    for (std::size_t job = 0; job < jobs.size(); ++job) {
      const auto& j = jobs[job];
      const double eps = cfg.fidelity_epsilons[job / T];
      const std::size_t t = job % T;
      FidelityResult fr;
      fr.game = g.name;
      fr.epsilon = eps;
      fr.trial = t;
      fr.has_bound = j.has_bound;
      for (std::size_t k = 0; k < j.masks.size(); ++k) {
        const double d = std::abs(j.retrain[k] - j.proxy[k]);
        const bool viol = j.has_bound && d > j.bound + 1e-9;
        fr.violations += viol ? 1 : 0;
        fr.max_rms_drift = std::max(fr.max_rms_drift, j.drift[k]);
        rows.rows.push_back({g.name, detail::fmt(eps), std::to_string(t), std::to_string(k), render_mask(j.masks[k]),
                             detail::fmt(j.proxy[k]), detail::fmt(j.retrain[k]), detail::fmt(d),
                             detail::fmt(j.drift[k]), j.has_bound ? detail::fmt(j.bound) : std::string(),
                             viol ? "1" : "0"});
      }
      fr.metrics = fidelity_metrics(j.proxy, j.retrain);
      summary.rows.push_back({g.name, detail::fmt(eps), std::to_string(t), std::to_string(j.masks.size()),
                              detail::fmt(fr.metrics.nmae), detail::fmt(fr.metrics.nrmse), detail::fmt(fr.metrics.mae),
                              detail::fmt(fr.metrics.rmse), detail::fmt(fr.max_rms_drift),
                              std::to_string(fr.violations)});
      const std::string label = g.name + " eps=" + detail::fmt(eps) + " trial=" + std::to_string(t);
      outcome.messages.push_back(label + " nmae=" + detail::fmt(fr.metrics.nmae) +
                                 " violations=" + std::to_string(fr.violations));
      if (cfg.checks.fidelity_bound && j.has_bound) {
        outcome.checks.push_back({label + " bound", fr.violations == 0, std::to_string(fr.violations) + " violations"});
      }
      outcome.fidelity.push_back(fr);
    }
    outcome.tables.push_back(std::move(rows));
    outcome.tables.push_back(std::move(summary));
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// attribute: one attribution document from a dataset file or the first game
// ---------------------------------------------------------------------------

struct AttributeRequest {
  std::optional<std::string> dataset_path;
  std::optional<EstimatorKind> estimator;
  std::optional<std::uint64_t> budget;
};

inline Outcome run_attribute(const ExperimentConfig& cfg, const AttributeRequest& req) {
  Outcome outcome;
  std::optional<std::string> dataset = req.dataset_path;
  const GameConfig* game_cfg = nullptr;
  if (!dataset) {
    game_cfg = &cfg.games.front();
    if (game_cfg->source == GameConfig::Source::kDataset) dataset = game_cfg->path;
  }
  EstimatorKind kind = EstimatorKind::kSurrogateShap;
  std::uint64_t budget = 0;
  if (!cfg.estimators.empty()) {
    kind = cfg.estimators.front().kind;
    if (!cfg.estimators.front().budgets.empty()) budget = cfg.estimators.front().budgets.front();
  }
  if (req.estimator) kind = *req.estimator;
  if (req.budget) budget = *req.budget;

  Attribution att;
  std::optional<SurrogateModel> model;
  std::optional<SampledDataset> sampled;
  if (dataset) {
    auto data = load_dataset_game(*dataset);
    if (kind == EstimatorKind::kExact) throw std::invalid_argument("attribute: the exact estimator needs a game, not a dataset");
    if (kind == EstimatorKind::kKernelShap) {
      att = kernel_shap_from_dataset(data);
      att.seed = cfg.seed;
    } else {
      auto r = shapley_of_dataset(std::move(data), cfg.grid, cfg.seed);
      att = std::move(r.attribution);
      model = std::move(r.model);
    }
  } else {
    const auto game = make_game(*game_cfg, trial_seed(cfg.seed, 0));
    if (kind != EstimatorKind::kExact && budget < 2) throw ConfigError("estimators[0].budgets", "a budget >= 2 is required");
    if (kind == EstimatorKind::kSurrogateShap) {
      auto r = surrogate_shap(*game, budget, cfg.grid, cfg.seed);
      att = std::move(r.attribution);
      model = std::move(r.model);
      sampled = std::move(r.dataset);
    } else {
      EstimatorConfig ec;
      ec.kind = kind;
      ec.budget_m = budget;
      ec.seed = cfg.seed;
      ec.enumeration_cap = cfg.enumeration_cap;
      att = estimate(*game, ec).attribution;
    }
  }
  const std::optional<HyperParams> hp = model ? std::optional<HyperParams>(model->hyperparams) : std::nullopt;
  outcome.json_files.push_back({"attribution.json", attribution_to_json(att, hp).dump(2)});
  if (model) outcome.json_files.push_back({"model.json", model_to_json(*model).dump()});
  if (sampled) {
    Table t{"coalitions.csv", {"mask", "utility"}, {}};
    for (const auto& r : sampled->rows) t.rows.push_back({render_mask(r.mask), format_double(r.utility)});
    outcome.tables.push_back(std::move(t));
  }
  outcome.messages.push_back("efficiency_gap=" + format_double(efficiency_gap(att)) +
                             " budget_m=" + std::to_string(att.budget_m));
  return outcome;
}

// ---------------------------------------------------------------------------
// lds: linear datamodeling score of each estimator against the game itself
// ---------------------------------------------------------------------------

inline Outcome run_lds(const ExperimentConfig& cfg, std::size_t threads) {
  detail::require_queryable(cfg, "lds", false);
  detail::require_estimators(cfg);
  if (cfg.lds_alphas.empty()) throw ConfigError("lds.alphas", "at least one alpha is required");
  const auto cells = detail::cells_of(cfg);
  Outcome outcome;
  for (const auto& g : cfg.games) {
    const std::size_t T = cfg.trials;
    const std::size_t A = cfg.lds_alphas.size();
    std::vector<std::vector<double>> scores(T * cells.size());
    std::vector<std::uint64_t> budgets(T * cells.size());
    parallel_for(scores.size(), threads, [&](std::size_t job) {
      const std::size_t c = job / T;
      const std::size_t t = job % T;
      const std::uint64_t tseed = trial_seed(cfg.seed, t);
      const auto game = make_game(g, tseed);
      const auto att = detail::run_estimator(*game, cells[c], cfg, tseed);
      budgets[job] = att.budget_m;
      for (std::size_t a = 0; a < A; ++a) {
        LdsConfig lc{cfg.lds_alphas[a], cfg.lds_subsets, derive_seed(tseed, "lds", a)};
        scores[job].push_back(lds(att, *game, lc));
      }
    });
    Table rows{"lds_" + g.name + ".csv", {"game", "estimator", "budget_m", "trial", "alpha", "lds"}, {}};
    Table summary{"lds_" + g.name + "_summary.csv",
                  {"game", "estimator", "budget_m", "alpha", "trials", "lds_mean", "lds_std"},
                  {}};
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string est(to_string(cells[c].kind));
      for (std::size_t a = 0; a < A; ++a) {
        std::vector<double> xs;
        for (std::size_t t = 0; t < T; ++t) {
          const std::size_t job = c * T + t;
          xs.push_back(scores[job][a]);
          rows.rows.push_back({g.name, est, detail::fmt(budgets[job]), std::to_string(t),
                               detail::fmt(cfg.lds_alphas[a]), detail::fmt(scores[job][a])});
        }
        const auto s = summarize(xs);
        summary.rows.push_back({g.name, est, detail::fmt(budgets[c * T]), detail::fmt(cfg.lds_alphas[a]),
                                std::to_string(T), detail::fmt(s.mean), detail::fmt(s.std)});
        outcome.messages.push_back(g.name + " " + est + " M=" + std::to_string(budgets[c * T]) +
                                   " alpha=" + detail::fmt(cfg.lds_alphas[a]) + " lds mean=" + detail::fmt(s.mean));
      }
    }
    outcome.tables.push_back(std::move(rows));
    outcome.tables.push_back(std::move(summary));
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// counterfactual: remove top / bottom / random k players, percent change in v
// ---------------------------------------------------------------------------

inline Outcome run_counterfactual(const ExperimentConfig& cfg, std::size_t threads) {
  detail::require_queryable(cfg, "counterfactual", false);
  detail::require_estimators(cfg);
  const auto cells = detail::cells_of(cfg);
  Outcome outcome;
  for (const auto& g : cfg.games) {
    const std::size_t T = cfg.trials;
    struct Res {
      std::uint64_t budget = 0;
      double top = 0.0, bottom = 0.0, random = 0.0;
    };
    std::vector<Res> res(T * cells.size());
    parallel_for(res.size(), threads, [&](std::size_t job) {
      const std::size_t c = job / T;
      const std::size_t t = job % T;
      const std::uint64_t tseed = trial_seed(cfg.seed, t);
      const auto game = make_game(g, tseed);
      const auto att = detail::run_estimator(*game, cells[c], cfg, tseed);
      res[job].budget = att.budget_m;
      res[job].top = counterfactual_delta(*game, att, cfg.k_frac, RemovalDirection::kTop);
      res[job].bottom = counterfactual_delta(*game, att, cfg.k_frac, RemovalDirection::kBottom);
      res[job].random = random_removal_delta(*game, cfg.k_frac, derive_seed(tseed, "random_removal", 0));
    });
    Table rows{"counterfactual_" + g.name + ".csv",
               {"game", "estimator", "budget_m", "trial", "direction", "delta_pct"},
               {}};
    Table summary{"counterfactual_" + g.name + "_summary.csv",
                  {"game", "estimator", "budget_m", "direction", "trials", "delta_mean", "delta_std"},
                  {}};
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string est(to_string(cells[c].kind));
      std::vector<double> top, bottom, random;
      for (std::size_t t = 0; t < T; ++t) {
        const auto& r = res[c * T + t];
        top.push_back(r.top);
        bottom.push_back(r.bottom);
        random.push_back(r.random);
        const std::string b = detail::fmt(r.budget);
        rows.rows.push_back({g.name, est, b, std::to_string(t), "top", detail::fmt(r.top)});
        rows.rows.push_back({g.name, est, b, std::to_string(t), "bottom", detail::fmt(r.bottom)});
        rows.rows.push_back({g.name, est, b, std::to_string(t), "random", detail::fmt(r.random)});
      }
      const std::string b = detail::fmt(res[c * T].budget);
      for (auto [dir, xs] : {std::pair<const char*, std::vector<double>*>{"top", &top},
                             {"bottom", &bottom}, {"random", &random}}) {
        const auto s = summarize(*xs);
        summary.rows.push_back({g.name, est, b, dir, std::to_string(T), detail::fmt(s.mean), detail::fmt(s.std)});
        outcome.messages.push_back(g.name + " " + est + " M=" + b + " " + dir + " mean=" + detail::fmt(s.mean));
      }
    }
    outcome.tables.push_back(std::move(rows));
    outcome.tables.push_back(std::move(summary));
  }
  return outcome;
}

}  // namespace coalshap

#endif  // COALSHAP_EXPERIMENTS_HPP_
