#ifndef COALSHAP_GBT_HPP_
#define COALSHAP_GBT_HPP_

// Gradient-boosted regression trees over binary coalition masks.
//
// Squared loss (g = pred - y, h = 1), one greedily grown tree per round,
// L1 shrinkage on leaf sums: leaf = -soft(G, alpha) / H. Every split is on a
// binary feature (threshold 0.5, left = 0, right = 1) and a feature never
// repeats on a root-to-leaf path. No row or feature subsampling, so a fit is
// a pure function of (rows, hyperparameters); the seed is recorded only.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "coalshap/core.hpp"
#include "json.hpp"

namespace coalshap {

struct HyperParams {
  int max_depth = 3;
  int n_trees = 100;
  double learning_rate = 0.05;
  double l1_alpha = 0.0;

  void validate() const {
    if (max_depth < 1) throw std::invalid_argument("HyperParams: max_depth must be >= 1");
    if (n_trees < 1) throw std::invalid_argument("HyperParams: n_trees must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw std::invalid_argument("HyperParams: learning_rate must be positive");
    }
    if (!(l1_alpha >= 0.0) || !std::isfinite(l1_alpha)) {
      throw std::invalid_argument("HyperParams: l1_alpha must be >= 0");
    }
  }

  auto key() const { return std::tie(max_depth, n_trees, learning_rate, l1_alpha); }
  friend bool operator==(const HyperParams& a, const HyperParams& b) { return a.key() == b.key(); }
  friend bool operator<(const HyperParams& a, const HyperParams& b) { return a.key() < b.key(); }
};

// Surrogate search space: depth {3,5,10} x trees {100,300,900} x lr {0.01,0.05} x L1 {0,10}.
inline std::vector<HyperParams> default_grid() {
  std::vector<HyperParams> grid;
  for (int depth : {3, 5, 10}) {
    for (int trees : {100, 300, 900}) {
      for (double lr : {0.01, 0.05}) {
        for (double l1 : {0.0, 10.0}) grid.push_back({depth, trees, lr, l1});
      }
    }
  }
  return grid;
}

// Internal node: feature >= 0, children by index. Leaf: feature == -1.
struct TreeNode {
  int feature = -1;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double evaluate(const CoalitionMask& m) const {
    int id = 0;
    while (!nodes[id].is_leaf()) {
      const auto& nd = nodes[id];
      id = m[static_cast<std::size_t>(nd.feature)] ? nd.right : nd.left;
    }
    return nodes[id].value;
  }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& t) { return t.is_leaf(); }));
  }

  // Proper binary tree over features < n, every node reachable exactly once,
  // no feature repeated on a path.
  void validate(std::size_t n) const {
    if (nodes.empty()) throw std::invalid_argument("malformed tree: no nodes");
    std::vector<int> seen(nodes.size(), 0);
    std::vector<std::uint8_t> on_path(n, 0);
    std::size_t visited = 0;
    auto visit = [&](auto&& self, int id, std::size_t depth) -> void {
      if (id < 0 || static_cast<std::size_t>(id) >= nodes.size()) {
        throw std::invalid_argument("malformed tree: child index out of range");
      }
      if (seen[id]++) throw std::invalid_argument("malformed tree: node reached twice");
      if (depth > nodes.size()) throw std::invalid_argument("malformed tree: cycle");
      ++visited;
      const auto& nd = nodes[id];
      if (nd.is_leaf()) {
        if (!std::isfinite(nd.value)) throw std::invalid_argument("malformed tree: non-finite leaf");
        return;
      }
      const auto f = static_cast<std::size_t>(nd.feature);
      if (f >= n) throw std::invalid_argument("malformed tree: feature index out of range");
      if (on_path[f]) {
        throw std::invalid_argument("malformed tree: feature " + std::to_string(f) + " repeated on a path");
      }
      on_path[f] = 1;
      self(self, nd.left, depth + 1);
      self(self, nd.right, depth + 1);
      on_path[f] = 0;
    };
    visit(visit, 0, 0);
    if (visited != nodes.size()) throw std::invalid_argument("malformed tree: unreachable node");
  }
};

struct SurrogateModel {
  std::size_t n_players = 0;
  double base_score = 0.0;
  std::vector<Tree> trees;
  double learning_rate = 1.0;
  HyperParams hyperparams;
  std::uint64_t seed = 0;
};

inline double predict(const SurrogateModel& model, const CoalitionMask& m) {
  if (m.size() != model.n_players) {
    throw std::invalid_argument("predict: mask length " + std::to_string(m.size()) + " != model n=" +
                                std::to_string(model.n_players));
  }
  double sum = 0.0;
  for (const auto& t : model.trees) sum += t.evaluate(m);
  return model.base_score + model.learning_rate * sum;
}

namespace detail {

inline double soft_threshold(double g, double alpha) {
  if (alpha == 0.0) return g;
  const double mag = std::abs(g) - alpha;
  if (mag <= 0.0) return 0.0;
  return g > 0.0 ? mag : -mag;
}

// Distinct masks of a row subset, with multiplicities. Rows with the same
// mask always share a prediction, so boosting over these aggregates is the
// row-wise algorithm with the sums regrouped.
struct PackedRows {
  std::size_t n = 0;
  std::size_t words = 0;
  std::vector<std::uint64_t> bits;  // unique-major, `words` per unique
  std::vector<double> count;
  std::vector<double> residual_sum;  // sum of (y - base) over member rows
  std::vector<std::size_t> row_unique;  // per input row

  std::size_t size() const { return count.size(); }
  const std::uint64_t* row(std::size_t u) const { return bits.data() + u * words; }
};

inline PackedRows pack_rows(const SampledDataset& data, const std::vector<std::size_t>& rows, double base) {
  PackedRows p;
  p.n = data.n;
  p.words = (data.n + 63) / 64;
  std::map<std::vector<std::uint64_t>, std::size_t> index;
  std::vector<std::uint64_t> key(p.words);
  for (auto r : rows) {
    const auto& m = data.rows[r].mask;
    std::fill(key.begin(), key.end(), 0);
    for (std::size_t k = 0; k < p.n; ++k) {
      if (m[k]) key[k / 64] |= std::uint64_t{1} << (k % 64);
    }
    auto [it, inserted] = index.try_emplace(key, p.count.size());
    if (inserted) {
      p.bits.insert(p.bits.end(), key.begin(), key.end());
      p.count.push_back(0.0);
      p.residual_sum.push_back(0.0);
    }
    p.count[it->second] += 1.0;
    p.residual_sum[it->second] += data.rows[r].utility - base;
    p.row_unique.push_back(it->second);
  }
  return p;
}

// Mean computed as y0 + mean(y - y0) so constant targets reproduce exactly.
inline double shifted_mean(const SampledDataset& data, const std::vector<std::size_t>& rows) {
  const double y0 = data.rows[rows.front()].utility;
  double acc = 0.0;
  for (auto r : rows) acc += data.rows[r].utility - y0;
  return y0 + acc / static_cast<double>(rows.size());
}

class TreeGrower {
 public:
  TreeGrower(const PackedRows& rows, const HyperParams& hp)
      : rows_(rows), hp_(hp), used_(rows.words, 0), grad_r_(rows.n), hess_r_(rows.n) {}

  // Grows one tree on gradients g (hessian = count) and writes the leaf value
  // reached by each unique into `leaf_of`.
  Tree grow(const std::vector<double>& g, std::vector<double>& leaf_of) {
    Tree tree;
    std::vector<std::size_t> all(rows_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::fill(used_.begin(), used_.end(), 0);
    build(tree, all, 0, g, leaf_of);
    return tree;
  }

 private:
  int build(Tree& tree, const std::vector<std::size_t>& members, int depth, const std::vector<double>& g,
            std::vector<double>& leaf_of) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double G = 0.0;
    double H = 0.0;
    for (auto u : members) {
      G += g[u];
      H += rows_.count[u];
    }

    int best_feature = -1;
    if (depth < hp_.max_depth && members.size() > 1) {
      std::fill(grad_r_.begin(), grad_r_.end(), 0.0);
      std::fill(hess_r_.begin(), hess_r_.end(), 0.0);
      for (auto u : members) {
        const std::uint64_t* w = rows_.row(u);
        for (std::size_t k = 0; k < rows_.words; ++k) {
          std::uint64_t free_bits = w[k] & ~used_[k];
          while (free_bits) {
            const int b = std::countr_zero(free_bits);
            free_bits &= free_bits - 1;
            const std::size_t f = k * 64 + static_cast<std::size_t>(b);
            grad_r_[f] += g[u];
            hess_r_[f] += rows_.count[u];
          }
        }
      }
      const double alpha = hp_.l1_alpha;
      const double parent_score = alpha == 0.0 ? 0.0 : square(soft_threshold(G, alpha)) / H;
      double best_gain = 0.0;
      for (std::size_t f = 0; f < rows_.n; ++f) {
        if ((used_[f / 64] >> (f % 64)) & 1u) continue;
        const double hr = hess_r_[f];
        const double hl = H - hr;
        if (hr <= 0.0 || hl <= 0.0) continue;
        const double gr = grad_r_[f];
        const double gl = G - gr;
        double gain;
        if (alpha == 0.0) {
          // 1/2 [GL^2/HL + GR^2/HR - G^2/H] in a form that is exactly zero
          // when both children have the same mean gradient.
          gain = 0.5 * (hl * hr / H) * square(gl / hl - gr / hr);
        } else {
          gain = 0.5 * (square(soft_threshold(gl, alpha)) / hl + square(soft_threshold(gr, alpha)) / hr -
                        parent_score);
        }
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
        }
      }
    }

    if (best_feature < 0) {
      const double value = -soft_threshold(G, hp_.l1_alpha) / H;
      tree.nodes[id].value = value;
      for (auto u : members) leaf_of[u] = value;
      return id;
    }

    const auto f = static_cast<std::size_t>(best_feature);
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto u : members) {
      if ((rows_.row(u)[f / 64] >> (f % 64)) & 1u) {
        right.push_back(u);
      } else {
        left.push_back(u);
      }
    }
    used_[f / 64] |= std::uint64_t{1} << (f % 64);
    const int l = build(tree, left, depth + 1, g, leaf_of);
    const int r = build(tree, right, depth + 1, g, leaf_of);
    used_[f / 64] &= ~(std::uint64_t{1} << (f % 64));
    tree.nodes[id].feature = best_feature;
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }

  static double square(double x) { return x * x; }

  const PackedRows& rows_;
  HyperParams hp_;
  std::vector<std::uint64_t> used_;
  std::vector<double> grad_r_;
  std::vector<double> hess_r_;
};

// Boosts `rounds` trees on `train`; after each round the callback receives
// the round count and the tree just added.
template <typename OnRound>
SurrogateModel boost(const SampledDataset& data, const std::vector<std::size_t>& train, const HyperParams& hp,
                     int rounds, OnRound&& on_round) {
  SurrogateModel model;
  model.n_players = data.n;
  model.learning_rate = hp.learning_rate;
  model.hyperparams = hp;
  model.base_score = shifted_mean(data, train);
  const PackedRows rows = pack_rows(data, train, model.base_score);
  std::vector<double> offset(rows.size(), 0.0);  // prediction - base_score
  std::vector<double> grad(rows.size());
  std::vector<double> leaf_of(rows.size());
  TreeGrower grower(rows, hp);
  model.trees.reserve(static_cast<std::size_t>(rounds));
  for (int t = 0; t < rounds; ++t) {
    for (std::size_t u = 0; u < rows.size(); ++u) grad[u] = rows.count[u] * offset[u] - rows.residual_sum[u];
    model.trees.push_back(grower.grow(grad, leaf_of));
    for (std::size_t u = 0; u < rows.size(); ++u) offset[u] += hp.learning_rate * leaf_of[u];
    on_round(t + 1, model.trees.back());
  }
  return model;
}

}  // namespace detail

inline SurrogateModel fit_gbt(const SampledDataset& data, const HyperParams& hp, std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("fit_gbt: empty dataset");
  hp.validate();
  for (const auto& r : data.rows) {
    if (r.mask.size() != data.n) throw std::invalid_argument("fit_gbt: inconsistent mask lengths");
  }
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  auto model = detail::boost(data, rows, hp, hp.n_trees, [](int, const Tree&) {});
  model.seed = seed;
  return model;
}

inline double mean_squared_error(const SurrogateModel& model, const SampledDataset& data) {
  if (data.empty()) throw std::invalid_argument("mean_squared_error: empty dataset");
  double acc = 0.0;
  for (const auto& r : data.rows) {
    const double e = predict(model, r.mask) - r.utility;
    acc += e * e;
  }
  return acc / static_cast<double>(data.size());
}

struct GridSearchResult {
  HyperParams best;
  SurrogateModel model;
  std::vector<double> cv_mse;  // mean validation MSE, aligned with the grid
};

// Seeded Fisher-Yates shuffle of row indices, then k contiguous blocks.
inline std::vector<std::vector<std::size_t>> make_folds(std::size_t rows, std::size_t k_folds, std::uint64_t seed) {
  if (k_folds < 2) throw std::invalid_argument("make_folds: need at least 2 folds");
  if (rows < k_folds) {
    throw std::invalid_argument("make_folds: " + std::to_string(rows) + " rows is fewer than " +
                                std::to_string(k_folds) + " folds");
  }
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = rows - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<std::vector<std::size_t>> folds(k_folds);
  for (std::size_t f = 0; f < k_folds; ++f) {
    const std::size_t lo = f * rows / k_folds;
    const std::size_t hi = (f + 1) * rows / k_folds;
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(lo), order.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return folds;
}

// k-fold CV over the grid, then a refit on all rows with the winner. Ties in
// mean validation MSE go to the lexicographically smallest
// (max_depth, n_trees, learning_rate, l1_alpha).
//
// Entries that differ only in n_trees share one boosting run per fold: a fit
// with fewer trees is a prefix of a fit with more.
inline GridSearchResult grid_search_cv(const SampledDataset& data, const std::vector<HyperParams>& grid,
                                       std::size_t k_folds, std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("grid_search_cv: empty grid");
  for (const auto& hp : grid) hp.validate();
  if (data.size() < k_folds) {
    throw std::invalid_argument("grid_search_cv: " + std::to_string(data.size()) + " rows is fewer than " +
                                std::to_string(k_folds) + " folds");
  }
  const auto folds = make_folds(data.size(), k_folds, seed);

  // Group by everything except n_trees.
  std::map<std::tuple<int, double, double>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    groups[{grid[i].max_depth, grid[i].learning_rate, grid[i].l1_alpha}].push_back(i);
  }

  std::vector<double> sse(grid.size(), 0.0);
  for (std::size_t f = 0; f < k_folds; ++f) {
    std::vector<std::size_t> train;
    for (std::size_t o = 0; o < k_folds; ++o) {
      if (o != f) train.insert(train.end(), folds[o].begin(), folds[o].end());
    }
    std::sort(train.begin(), train.end());
    std::vector<std::size_t> valid = folds[f];
    std::sort(valid.begin(), valid.end());

    for (const auto& [key, members] : groups) {
      int rounds = 0;
      for (auto i : members) rounds = std::max(rounds, grid[i].n_trees);
      HyperParams hp = grid[members.front()];
      hp.n_trees = rounds;
      std::vector<double> valid_sum(valid.size(), 0.0);
      const double base = detail::shifted_mean(data, train);
      auto on_round = [&](int t, const Tree& tree) {
        for (std::size_t v = 0; v < valid.size(); ++v) valid_sum[v] += tree.evaluate(data.rows[valid[v]].mask);
        for (auto i : members) {
          if (grid[i].n_trees != t) continue;
          double acc = 0.0;
          for (std::size_t v = 0; v < valid.size(); ++v) {
            const double e = base + hp.learning_rate * valid_sum[v] - data.rows[valid[v]].utility;
            acc += e * e;
          }
          sse[i] += acc / static_cast<double>(valid.size());
        }
      };
      detail::boost(data, train, hp, rounds, on_round);
    }
  }

  GridSearchResult result;
  result.cv_mse.resize(grid.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    result.cv_mse[i] = sse[i] / static_cast<double>(k_folds);
    if (i == 0) continue;
    if (result.cv_mse[i] < result.cv_mse[best] ||
        (result.cv_mse[i] == result.cv_mse[best] && grid[i] < grid[best])) {
      best = i;
    }
  }
  result.best = grid[best];
  result.model = fit_gbt(data, result.best, seed);
  return result;
}

// ---------------------------------------------------------------------------
// Model document: {"format", "n_players", "base_score", "learning_rate",
// "seed", "hyperparams", "trees"}, each tree a nested record of
// {"feature", "left", "right"} or {"leaf"}.
// ---------------------------------------------------------------------------

inline nlohmann::json hyperparams_to_json(const HyperParams& hp) {
  return {{"max_depth", hp.max_depth}, {"n_trees", hp.n_trees}, {"learning_rate", hp.learning_rate},
          {"l1_alpha", hp.l1_alpha}};
}

inline HyperParams hyperparams_from_json(const nlohmann::json& j) {
  for (const auto& [k, v] : j.items()) {
    if (k != "max_depth" && k != "n_trees" && k != "learning_rate" && k != "l1_alpha") {
      throw std::invalid_argument("hyperparams: unknown key '" + k + "'");
    }
  }
  HyperParams hp;
  hp.max_depth = j.at("max_depth").get<int>();
  hp.n_trees = j.at("n_trees").get<int>();
  hp.learning_rate = j.at("learning_rate").get<double>();
  hp.l1_alpha = j.at("l1_alpha").get<double>();
  hp.validate();
  return hp;
}

namespace detail {

inline nlohmann::json node_to_json(const Tree& t, int id) {
  const auto& nd = t.nodes[id];
  if (nd.is_leaf()) return {{"leaf", nd.value}};
  return {{"feature", nd.feature}, {"left", node_to_json(t, nd.left)}, {"right", node_to_json(t, nd.right)}};
}

inline int node_from_json(const nlohmann::json& j, Tree& t) {
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  if (j.contains("leaf")) {
    if (j.size() != 1) throw std::invalid_argument("model document: leaf record has extra keys");
    t.nodes[id].value = j.at("leaf").get<double>();
    return id;
  }
  if (j.size() != 3) throw std::invalid_argument("model document: split record needs feature, left, right");
  const int feature = j.at("feature").get<int>();
  if (feature < 0) throw std::invalid_argument("model document: negative feature index");
  const int l = node_from_json(j.at("left"), t);
  const int r = node_from_json(j.at("right"), t);
  t.nodes[id].feature = feature;
  t.nodes[id].left = l;
  t.nodes[id].right = r;
  return id;
}

}  // namespace detail

inline nlohmann::json model_to_json(const SurrogateModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) trees.push_back(detail::node_to_json(t, 0));
  return {{"format", "coalshap.gbt/1"},
          {"n_players", m.n_players},
          {"base_score", m.base_score},
          {"learning_rate", m.learning_rate},
          {"seed", m.seed},
          {"hyperparams", hyperparams_to_json(m.hyperparams)},
          {"trees", std::move(trees)}};
}

inline SurrogateModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "coalshap.gbt/1") throw std::invalid_argument("model document: unknown format");
  SurrogateModel m;
  m.n_players = j.at("n_players").get<std::size_t>();
  m.base_score = j.at("base_score").get<double>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.hyperparams = hyperparams_from_json(j.at("hyperparams"));
  for (const auto& tj : j.at("trees")) {
    Tree t;
    detail::node_from_json(tj, t);
    t.validate(m.n_players);
    m.trees.push_back(std::move(t));
  }
  return m;
}

}  // namespace coalshap

#endif  // COALSHAP_GBT_HPP_
