#ifndef COALSHAP_EVAL_HPP_
#define COALSHAP_EVAL_HPP_

// Evaluation metrics: estimator error, axiom gaps, bias-variance, Spearman /
// LDS, counterfactual removal and proxy fidelity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "coalshap/core.hpp"
#include "coalshap/sampling.hpp"

namespace coalshap {

inline double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double relative_l2_error(const Attribution& est, const Attribution& oracle) {
  if (est.n() != oracle.n()) throw std::invalid_argument("relative_l2_error: attribution lengths differ");
  const double denom = l2_norm(oracle.phi);
  if (!(denom > 0.0)) throw std::invalid_argument("relative_l2_error: oracle has zero norm");
  double s = 0.0;
  for (std::size_t i = 0; i < est.n(); ++i) {
    const double d = est.phi[i] - oracle.phi[i];
    s += d * d;
  }
  return std::sqrt(s) / denom;
}

inline double efficiency_gap(const Attribution& att) {
  double sum = 0.0;
  for (double x : att.phi) sum += x;
  return std::abs(sum - (att.v_full - att.v_empty));
}

struct BiasVariance {
  double bias = 0.0;      // ||mean error||
  double variance = 0.0;  // mean ||error - mean error||^2
  double mse = 0.0;       // mean ||error||^2 == bias^2 + variance
};

// Decomposition over per-trial error vectors.
inline BiasVariance bias_variance_of_errors(const std::vector<std::vector<double>>& errors) {
  if (errors.size() < 2) throw std::invalid_argument("bias_variance: need at least 2 trials");
  const std::size_t n = errors.front().size();
  std::vector<double> mean(n, 0.0);
  for (const auto& e : errors) {
    if (e.size() != n) throw std::invalid_argument("bias_variance: trials differ in length");
    for (std::size_t i = 0; i < n; ++i) mean[i] += e[i];
  }
  const double t = static_cast<double>(errors.size());
  for (auto& x : mean) x /= t;
  BiasVariance out;
  out.bias = l2_norm(mean);
  for (const auto& e : errors) {
    double dev = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dev += (e[i] - mean[i]) * (e[i] - mean[i]);
      sq += e[i] * e[i];
    }
    out.variance += dev;
    out.mse += sq;
  }
  out.variance /= t;
  out.mse /= t;
  return out;
}

inline BiasVariance bias_variance(const std::vector<Attribution>& trials, const Attribution& oracle) {
  if (trials.size() < 2) throw std::invalid_argument("bias_variance: need at least 2 trials");
  std::vector<std::vector<double>> errors;
  errors.reserve(trials.size());
  for (const auto& t : trials) {
    if (t.n() != oracle.n()) throw std::invalid_argument("bias_variance: trials differ in length");
    std::vector<double> e(t.n());
    for (std::size_t i = 0; i < t.n(); ++i) e[i] = t.phi[i] - oracle.phi[i];
    errors.push_back(std::move(e));
  }
  return bias_variance_of_errors(errors);
}

// Average ranks (1-based); ties share the mean of their rank range.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: lengths differ");
  if (x.size() < 2) throw std::invalid_argument("spearman: need at least 2 points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("spearman: constant input has undefined correlation");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct LdsConfig {
  double alpha = 0.5;
  std::size_t n_subsets = 100;
  std::uint64_t seed = 0;
};

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(c);
}

// Held-out coalitions of size floor(alpha * n): distinct when the stratum has
// at least n_subsets members, otherwise drawn with replacement.
inline std::vector<CoalitionMask> lds_subsets(std::size_t n, const LdsConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw std::invalid_argument("lds: alpha must be in (0, 1)");
  const auto k = static_cast<std::size_t>(std::floor(cfg.alpha * static_cast<double>(n)));
  if (k < 1) throw std::invalid_argument("lds: floor(alpha * n) must be >= 1");
  if (cfg.n_subsets < 2) throw std::invalid_argument("lds: need at least 2 subsets");
  std::mt19937_64 rng(cfg.seed);
  std::vector<CoalitionMask> out;
  const bool distinct = binomial(n, k) >= static_cast<double>(cfg.n_subsets);
  std::set<CoalitionMask> seen;
  while (out.size() < cfg.n_subsets) {
    auto m = detail::uniform_subset_of_size(n, k, rng);
    if (distinct && !seen.insert(m).second) continue;
    out.push_back(std::move(m));
  }
  return out;
}

// 100 * Spearman(sum_{i in S} tau_i, v(S)) over held-out coalitions.
inline double lds(const Attribution& tau, const Game& game, const LdsConfig& cfg) {
  if (tau.n() != game.n_players()) throw std::invalid_argument("lds: attribution length != n_players");
  const auto subsets = lds_subsets(game.n_players(), cfg);
  std::vector<double> scores;
  std::vector<double> utilities;
  for (const auto& s : subsets) {
    double g = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i]) g += tau.phi[i];
    }
    scores.push_back(g);
    utilities.push_back(game.utility(s));
  }
  return 100.0 * spearman(scores, utilities);
}

enum class RemovalDirection { kTop, kBottom };

inline std::string_view to_string(RemovalDirection d) { return d == RemovalDirection::kTop ? "top" : "bottom"; }

inline std::size_t removal_count(std::size_t n, double k_frac) {
  if (!(k_frac > 0.0 && k_frac < 1.0)) throw std::invalid_argument("counterfactual: k_frac must be in (0, 1)");
  const auto k = static_cast<std::size_t>(std::llround(k_frac * static_cast<double>(n)));
  if (k == 0 || k == n) throw std::invalid_argument("counterfactual: removal count must be in [1, n-1]");
  return k;
}

// Relative utility change (percent) after removing `removed` from the grand coalition.
inline double removal_delta(const Game& game, const std::vector<std::size_t>& removed) {
  const std::size_t n = game.n_players();
  const double v_full = game.utility(CoalitionMask::full(n));
  if (v_full == 0.0) throw std::invalid_argument("counterfactual: v(N) is zero");
  std::vector<std::uint8_t> bits(n, 1);
  for (auto i : removed) bits.at(i) = 0;
  return 100.0 * (game.utility(CoalitionMask(std::move(bits))) - v_full) / v_full;
}

// Players with the largest (top) or smallest (bottom) attribution; ties to
// the lower index.
inline std::vector<std::size_t> select_players(const Attribution& att, std::size_t k, RemovalDirection dir) {
  std::vector<std::size_t> order(att.n());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dir == RemovalDirection::kTop ? att.phi[a] > att.phi[b] : att.phi[a] < att.phi[b];
  });
  order.resize(k);
  return order;
}

inline double counterfactual_delta(const Game& game, const Attribution& att, double k_frac, RemovalDirection dir) {
  if (att.n() != game.n_players()) throw std::invalid_argument("counterfactual: attribution length != n_players");
  const std::size_t k = removal_count(att.n(), k_frac);
  return removal_delta(game, select_players(att, k, dir));
}

// Baseline: remove a uniformly random set of the same size.
inline double random_removal_delta(const Game& game, double k_frac, std::uint64_t seed) {
  const std::size_t n = game.n_players();
  const std::size_t k = removal_count(n, k_frac);
  std::mt19937_64 rng(seed);
  return removal_delta(game, detail::uniform_subset_of_size(n, k, rng).members());
}

struct FidelityMetrics {
  double nmae = 0.0;
  double nrmse = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
};

// Errors normalized by the range of the retrain utilities, paired by coalition.
inline FidelityMetrics fidelity_metrics(const std::vector<double>& proxy, const std::vector<double>& retrain) {
  if (proxy.size() != retrain.size()) throw std::invalid_argument("fidelity_metrics: lengths differ");
  if (retrain.size() < 2) throw std::invalid_argument("fidelity_metrics: need at least 2 coalitions");
  const auto [lo, hi] = std::minmax_element(retrain.begin(), retrain.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw std::invalid_argument("fidelity_metrics: retrain utilities have zero range");
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < proxy.size(); ++i) {
    const double d = retrain[i] - proxy[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const double n = static_cast<double>(proxy.size());
  FidelityMetrics m;
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  m.nmae = m.mae / range;
  m.nrmse = m.rmse / range;
  return m;
}

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
  double median = 0.0;
  std::size_t count = 0;
};

inline Summary summarize(std::vector<double> xs) {
  Summary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(acc / static_cast<double>(xs.size() - 1));
  }
  std::sort(xs.begin(), xs.end());
  const std::size_t mid = xs.size() / 2;
  s.median = xs.size() % 2 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
  return s;
}

struct TrialRecord {
  Attribution estimate;
  Attribution oracle;
};

// Aggregates over trials. The decomposition runs on relative error vectors
// (phi_hat - phi) / ||phi||, so trials may come from different game draws;
// for a fixed game it is the plain decomposition scaled by 1 / ||phi||^2.
struct TrialReport {
  std::vector<TrialRecord> trials;
  std::vector<double> rel_errors;
  Summary rel_error;
  BiasVariance decomposition;
  bool has_decomposition = false;
};

inline TrialReport make_trial_report(std::vector<TrialRecord> trials) {
  TrialReport r;
  std::vector<std::vector<double>> errors;
  for (const auto& t : trials) {
    r.rel_errors.push_back(relative_l2_error(t.estimate, t.oracle));
    const double denom = l2_norm(t.oracle.phi);
    std::vector<double> e(t.estimate.n());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = (t.estimate.phi[i] - t.oracle.phi[i]) / denom;
    errors.push_back(std::move(e));
  }
  r.rel_error = summarize(r.rel_errors);
  if (errors.size() >= 2) {
    r.decomposition = bias_variance_of_errors(errors);
    r.has_decomposition = true;
  }
  r.trials = std::move(trials);
  return r;
}

}  // namespace coalshap

#endif  // COALSHAP_EVAL_HPP_
