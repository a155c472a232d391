#ifndef COALSHAP_GAMES_HPP_
#define COALSHAP_GAMES_HPP_

// Concrete games: the three synthetic utilities, null-player augmentation,
// the Gaussian-mixture proxy/retrain simulator and the coalition dataset file.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "coalshap/core.hpp"

namespace coalshap {

// ---------------------------------------------------------------------------
// Synthetic games
// ---------------------------------------------------------------------------

enum class SyntheticKind { kLinear, kNonlinear, kInteraction };

inline std::string_view to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::kLinear: return "linear";
    case SyntheticKind::kNonlinear: return "nonlinear";
    case SyntheticKind::kInteraction: return "interaction";
  }
  throw std::invalid_argument("unknown synthetic kind");
}

inline SyntheticKind parse_synthetic_kind(std::string_view s) {
  if (s == "linear") return SyntheticKind::kLinear;
  if (s == "nonlinear") return SyntheticKind::kNonlinear;
  if (s == "interaction") return SyntheticKind::kInteraction;
  throw std::invalid_argument("unknown synthetic game kind '" + std::string(s) + "'");
}

struct PairTerm {
  std::size_t i = 0;
  std::size_t j = 0;
  double alpha = 0.0;
};

struct TripleTerm {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;
  double alpha = 0.0;
};

struct SyntheticGameSpec {
  SyntheticKind kind = SyntheticKind::kLinear;
  std::size_t n = 0;
  std::vector<double> w;
  double b = 0.25;
  std::vector<PairTerm> pairs;
  std::optional<TripleTerm> tri;
  double saturation_scale = 3.0;

  static std::vector<PairTerm> default_pairs() { return {{0, 1, 1.5}, {2, 3, -1.0}, {4, 5, 0.8}}; }
  static TripleTerm default_tri() { return {0, 2, 4, 2.0}; }

  // Interaction kind gets the default pair and third-order terms.
  static SyntheticGameSpec make(SyntheticKind kind, std::vector<double> w, double b = 0.25) {
    SyntheticGameSpec spec;
    spec.kind = kind;
    spec.n = w.size();
    spec.w = std::move(w);
    spec.b = b;
    if (kind == SyntheticKind::kInteraction) {
      spec.pairs = default_pairs();
      spec.tri = default_tri();
    }
    spec.validate();
    return spec;
  }

  void validate() const {
    if (n == 0) throw std::invalid_argument("synthetic game: n must be positive");
    if (w.size() != n) throw std::invalid_argument("synthetic game: weight vector length must equal n");
    if (kind != SyntheticKind::kInteraction && (!pairs.empty() || tri.has_value())) {
      throw std::invalid_argument("synthetic game: interaction terms given for " +
                                  std::string(to_string(kind)) + " kind");
    }
    if (kind != SyntheticKind::kLinear && !(saturation_scale > 0.0)) {
      throw std::invalid_argument("synthetic game: saturation_scale must be positive");
    }
    for (const auto& p : pairs) {
      if (p.i >= n || p.j >= n || p.i == p.j) {
        throw std::invalid_argument("synthetic game: pair term indices must be distinct and < n");
      }
    }
    if (tri) {
      const auto& t = *tri;
      if (t.i >= n || t.j >= n || t.k >= n || t.i == t.j || t.i == t.k || t.j == t.k) {
        throw std::invalid_argument("synthetic game: third-order term indices must be distinct and < n");
      }
    }
  }
};

// Standard normal weights from a trial seed.
inline std::vector<double> draw_weights(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> w(n);
  for (auto& x : w) x = normal(rng);
  return w;
}

inline double synthetic_utility(const SyntheticGameSpec& spec, const CoalitionMask& m) {
  if (m.size() != spec.n) {
    throw std::invalid_argument("synthetic_utility: mask length " + std::to_string(m.size()) +
                                " != n=" + std::to_string(spec.n));
  }
  double score = spec.b;
  for (std::size_t k = 0; k < spec.n; ++k) {
    if (m[k]) score += spec.w[k];
  }
  if (spec.kind == SyntheticKind::kLinear) return score;
  if (spec.kind == SyntheticKind::kInteraction) {
    for (const auto& p : spec.pairs) {
      if (m[p.i] && m[p.j]) score += p.alpha;
    }
    if (spec.tri && m[spec.tri->i] && m[spec.tri->j] && m[spec.tri->k]) score += spec.tri->alpha;
  }
  const double c = spec.saturation_scale;
  return c * std::tanh(score / c);
}

class SyntheticGame final : public Game {
 public:
  explicit SyntheticGame(SyntheticGameSpec spec) : spec_(std::move(spec)) { spec_.validate(); }
  std::size_t n_players() const override { return spec_.n; }
  double utility(const CoalitionMask& m) const override { return synthetic_utility(spec_, m); }
  const SyntheticGameSpec& spec() const { return spec_; }

 private:
  SyntheticGameSpec spec_;
};

// Appends a player (index n) whose bit is ignored.
class NullPlayerGame final : public Game {
 public:
  explicit NullPlayerGame(std::shared_ptr<const Game> inner) : inner_(std::move(inner)) {
    if (!inner_) throw std::invalid_argument("NullPlayerGame: null inner game");
  }
  std::size_t n_players() const override { return inner_->n_players() + 1; }
  double utility(const CoalitionMask& m) const override {
    check_mask(m);
    std::vector<std::uint8_t> bits(m.bits().begin(), m.bits().end() - 1);
    return inner_->utility(CoalitionMask(std::move(bits)));
  }
  bool thread_safe() const override { return inner_->thread_safe(); }
  std::size_t null_player() const { return inner_->n_players(); }

 private:
  std::shared_ptr<const Game> inner_;
};

inline std::shared_ptr<const Game> with_null_player(std::shared_ptr<const Game> g) {
  return std::make_shared<NullPlayerGame>(std::move(g));
}

// ---------------------------------------------------------------------------
// Gaussian mixture proxy / retrain simulator
// ---------------------------------------------------------------------------

// Utility is a^T E[x] of the mixture; Lipschitz constant ||a||.
struct LinearMeanScore {
  std::vector<double> a;
};

// Frechet distance between the moment-matched Gaussian of the mixture and
// N(mu_ref, sigma_ref^2 I).
struct FrechetToReference {
  std::vector<double> mu_ref;
  double sigma_ref = 1.0;
};

using MixtureScorer = std::variant<LinearMeanScore, FrechetToReference>;

enum class DriftMagnitude { kExact, kUniform };

struct MixtureGameSpec {
  std::size_t n_players = 0;
  std::vector<std::string> labels;
  std::vector<double> counts;           // empirical frequency per label
  std::vector<std::size_t> owner;       // label -> player
  std::vector<std::vector<double>> mu;  // label -> mean in R^d
  double sigma = 1.0;
  double epsilon = 0.0;
  DriftMagnitude drift_magnitude = DriftMagnitude::kExact;
  std::uint64_t drift_seed = 0;
  MixtureScorer scorer = LinearMeanScore{};
  double empty_utility = 0.0;

  std::size_t dim() const { return mu.empty() ? 0 : mu.front().size(); }

  void validate() const {
    const std::size_t L = labels.size();
    if (n_players == 0) throw std::invalid_argument("mixture game: n_players must be positive");
    if (L == 0) throw std::invalid_argument("mixture game: no labels");
    if (counts.size() != L || owner.size() != L || mu.size() != L) {
      throw std::invalid_argument("mixture game: counts, owner and mu must have one entry per label");
    }
    const std::size_t d = dim();
    if (d == 0) throw std::invalid_argument("mixture game: feature dimension must be positive");
    std::vector<bool> owns(n_players, false);
    for (std::size_t y = 0; y < L; ++y) {
      if (!(counts[y] > 0.0) || !std::isfinite(counts[y])) {
        throw std::invalid_argument("mixture game: label counts must be positive");
      }
      if (owner[y] >= n_players) throw std::invalid_argument("mixture game: label owner out of range");
      if (mu[y].size() != d) throw std::invalid_argument("mixture game: inconsistent mean dimensions");
      owns[owner[y]] = true;
    }
    for (std::size_t i = 0; i < n_players; ++i) {
      if (!owns[i]) {
        throw std::invalid_argument("mixture game: player " + std::to_string(i) + " owns no label");
      }
    }
    if (!(sigma >= 0.0)) throw std::invalid_argument("mixture game: sigma must be >= 0");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("mixture game: epsilon must be >= 0");
    if (const auto* lin = std::get_if<LinearMeanScore>(&scorer)) {
      if (lin->a.size() != d) throw std::invalid_argument("mixture game: scorer direction has wrong dimension");
    } else {
      const auto& fr = std::get<FrechetToReference>(scorer);
      if (fr.mu_ref.size() != d) throw std::invalid_argument("mixture game: reference mean has wrong dimension");
      if (!(fr.sigma_ref >= 0.0)) throw std::invalid_argument("mixture game: sigma_ref must be >= 0");
    }
  }
};

// L_u of the scorer; only defined for the linear scorer.
inline double lipschitz_constant(const MixtureGameSpec& spec) {
  const auto* lin = std::get_if<LinearMeanScore>(&spec.scorer);
  if (!lin) throw std::invalid_argument("lipschitz_constant: the Frechet scorer is not globally Lipschitz");
  double s = 0.0;
  for (double x : lin->a) s += x * x;
  return std::sqrt(s);
}

// pi_S(y) over all labels (zero for labels outside the coalition).
inline std::vector<double> mixture_weights(const MixtureGameSpec& spec, const CoalitionMask& m) {
  if (m.size() != spec.n_players) {
    throw std::invalid_argument("mixture game: mask length " + std::to_string(m.size()) +
                                " != n_players=" + std::to_string(spec.n_players));
  }
  std::vector<double> pi(spec.labels.size(), 0.0);
  double total = 0.0;
  for (std::size_t y = 0; y < pi.size(); ++y) {
    if (m[spec.owner[y]]) {
      pi[y] = spec.counts[y];
      total += spec.counts[y];
    }
  }
  if (total == 0.0) throw std::invalid_argument("mixture game: coalition activates no label");
  for (auto& p : pi) p /= total;
  return pi;
}

// delta_y(S): a direction hashed from (drift_seed, S, y), scaled to epsilon
// (or to epsilon * U[0,1] in uniform mode).
inline std::vector<double> drift_offset(const MixtureGameSpec& spec, const CoalitionMask& m,
                                        std::size_t label) {
  const std::size_t d = spec.dim();
  std::vector<double> delta(d, 0.0);
  if (spec.epsilon == 0.0) return delta;
  const std::uint64_t key = spec.drift_seed ^ detail::fnv1a64(render_mask(m));
  std::mt19937_64 rng(derive_seed(key, "drift", label));
  std::normal_distribution<double> normal(0.0, 1.0);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : delta) {
      x = normal(rng);
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  double scale = spec.epsilon / std::sqrt(norm2);
  if (spec.drift_magnitude == DriftMagnitude::kUniform) {
    scale *= std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  }
  for (auto& x : delta) x *= scale;
  return delta;
}

namespace detail {

inline double score_mixture(const MixtureGameSpec& spec, const std::vector<double>& pi,
                            const std::vector<std::vector<double>>& means) {
  const std::size_t d = spec.dim();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t y = 0; y < pi.size(); ++y) {
    if (pi[y] == 0.0) continue;
    mean += pi[y] * Eigen::Map<const Eigen::VectorXd>(means[y].data(), static_cast<Eigen::Index>(d));
  }
  if (const auto* lin = std::get_if<LinearMeanScore>(&spec.scorer)) {
    return Eigen::Map<const Eigen::VectorXd>(lin->a.data(), static_cast<Eigen::Index>(d)).dot(mean);
  }
  const auto& fr = std::get<FrechetToReference>(spec.scorer);
  // Mixture covariance: sigma^2 I + sum_y pi_y (mu_y - m)(mu_y - m)^T.
  Eigen::MatrixXd cov = spec.sigma * spec.sigma *
                        Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t y = 0; y < pi.size(); ++y) {
    if (pi[y] == 0.0) continue;
    const Eigen::VectorXd c =
        Eigen::Map<const Eigen::VectorXd>(means[y].data(), static_cast<Eigen::Index>(d)) - mean;
    cov += pi[y] * c * c.transpose();
  }
  const Eigen::VectorXd ref = Eigen::Map<const Eigen::VectorXd>(fr.mu_ref.data(), static_cast<Eigen::Index>(d));
  // With an isotropic reference, tr((C^1/2 R C^1/2)^1/2) = sigma_ref * tr(C^1/2).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  double trace_sqrt = 0.0;
  for (Eigen::Index k = 0; k < eig.eigenvalues().size(); ++k) trace_sqrt += std::sqrt(std::max(0.0, eig.eigenvalues()[k]));
  const double sr = fr.sigma_ref;
  const double dist = (mean - ref).squaredNorm() + cov.trace() + static_cast<double>(d) * sr * sr -
                      2.0 * sr * trace_sqrt;
  return std::max(0.0, dist);
}

}  // namespace detail

inline double proxy_utility(const MixtureGameSpec& spec, const CoalitionMask& m) {
  if (m.size() == spec.n_players && m.is_empty()) return spec.empty_utility;
  return detail::score_mixture(spec, mixture_weights(spec, m), spec.mu);
}

inline double retrain_utility(const MixtureGameSpec& spec, const CoalitionMask& m) {
  if (m.size() == spec.n_players && m.is_empty()) return spec.empty_utility;
  const auto pi = mixture_weights(spec, m);
  auto means = spec.mu;
  for (std::size_t y = 0; y < means.size(); ++y) {
    if (pi[y] == 0.0) continue;
    const auto delta = drift_offset(spec, m, y);
    for (std::size_t k = 0; k < delta.size(); ++k) means[y][k] += delta[k];
  }
  return detail::score_mixture(spec, pi, means);
}

// RMS feature drift under the shared-noise coupling with the identity
// feature map: sqrt(sum_y pi_S(y) ||delta_y(S)||^2).
inline double weighted_rms(const std::vector<double>& pi, const std::vector<double>& sq_norms) {
  if (pi.size() != sq_norms.size()) throw std::invalid_argument("weighted_rms: lengths differ");
  double acc = 0.0;
  for (std::size_t y = 0; y < pi.size(); ++y) acc += pi[y] * sq_norms[y];
  return std::sqrt(acc);
}

inline double rms_drift(const MixtureGameSpec& spec, const CoalitionMask& m) {
  if (m.size() == spec.n_players && m.is_empty()) return 0.0;
  const auto pi = mixture_weights(spec, m);
  std::vector<double> sq(pi.size(), 0.0);
  for (std::size_t y = 0; y < pi.size(); ++y) {
    if (pi[y] == 0.0) continue;
    for (double x : drift_offset(spec, m, y)) sq[y] += x * x;
  }
  return weighted_rms(pi, sq);
}

class MixtureGame final : public Game {
 public:
  enum class Mode { kProxy, kRetrain };
  MixtureGame(MixtureGameSpec spec, Mode mode) : spec_(std::move(spec)), mode_(mode) { spec_.validate(); }
  std::size_t n_players() const override { return spec_.n_players; }
  double utility(const CoalitionMask& m) const override {
    check_mask(m);
    return mode_ == Mode::kProxy ? proxy_utility(spec_, m) : retrain_utility(spec_, m);
  }
  const MixtureGameSpec& spec() const { return spec_; }

 private:
  MixtureGameSpec spec_;
  Mode mode_;
};

// Random simulator instance: `labels_per_player` labels per player, integer
// counts in [1, 10], N(0, 1) means in R^dim, and a N(0, 1) scorer direction.
inline MixtureGameSpec make_random_mixture(std::size_t n_players, std::size_t labels_per_player,
                                           std::size_t dim, double sigma, double epsilon,
                                           std::uint64_t seed) {
  if (labels_per_player == 0) throw std::invalid_argument("make_random_mixture: labels_per_player must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> count_dist(1, 10);
  MixtureGameSpec spec;
  spec.n_players = n_players;
  spec.sigma = sigma;
  spec.epsilon = epsilon;
  spec.drift_seed = derive_seed(seed, "drift_seed", 0);
  for (std::size_t i = 0; i < n_players; ++i) {
    for (std::size_t l = 0; l < labels_per_player; ++l) {
      spec.labels.push_back("p" + std::to_string(i) + "_l" + std::to_string(l));
      spec.owner.push_back(i);
      spec.counts.push_back(static_cast<double>(count_dist(rng)));
      std::vector<double> mu(dim);
      for (auto& x : mu) x = normal(rng);
      spec.mu.push_back(std::move(mu));
    }
  }
  LinearMeanScore lin;
  lin.a.resize(dim);
  for (auto& x : lin.a) x = normal(rng);
  spec.scorer = lin;
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Coalition dataset file: header `mask,utility`, one row per coalition.
// Lines starting with '#' are comments.
// ---------------------------------------------------------------------------

class DatasetFormatError : public std::runtime_error {
 public:
  DatasetFormatError(std::size_t line, const std::string& detail, const std::string& source = "")
      : std::runtime_error((source.empty() ? "" : source + ": ") + "line " + std::to_string(line) + ": " + detail),
        line_(line),
        detail_(detail) {}
  std::size_t line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline SampledDataset read_dataset(std::istream& in) {
  SampledDataset data;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!have_header) {
      if (line != "mask,utility") throw DatasetFormatError(lineno, "expected header 'mask,utility'");
      have_header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw DatasetFormatError(lineno, "expected two comma-separated fields");
    }
    const std::string_view mask_text(line.data(), comma);
    const std::string_view value_text(line.data() + comma + 1, line.size() - comma - 1);
    if (mask_text.empty()) throw DatasetFormatError(lineno, "empty mask");
    if (data.n != 0 && mask_text.size() != data.n) {
      throw DatasetFormatError(lineno, "mask length " + std::to_string(mask_text.size()) +
                                           " differs from previous rows (" + std::to_string(data.n) + ")");
    }
    CoalitionMask mask;
    try {
      mask = parse_mask(mask_text);
    } catch (const std::invalid_argument& e) {
      throw DatasetFormatError(lineno, std::string("malformed mask: ") + e.what());
    }
    double value = 0.0;
    const auto res = std::from_chars(value_text.data(), value_text.data() + value_text.size(), value);
    if (value_text.empty() || res.ec != std::errc() || res.ptr != value_text.data() + value_text.size() ||
        !std::isfinite(value)) {
      throw DatasetFormatError(lineno, "non-numeric utility '" + std::string(value_text) + "'");
    }
    data.add(std::move(mask), value);
  }
  if (!have_header) throw DatasetFormatError(lineno, "missing header 'mask,utility'");
  return data;
}

inline SampledDataset load_dataset_game(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file '" + path + "'");
  try {
    return read_dataset(in);
  } catch (const DatasetFormatError& e) {
    throw DatasetFormatError(e.line(), e.detail(), path);
  }
}

inline void write_dataset(std::ostream& out, const SampledDataset& data) {
  out << "mask,utility\n";
  for (const auto& r : data.rows) out << render_mask(r.mask) << ',' << format_double(r.utility) << '\n';
}

}  // namespace coalshap

#endif  // COALSHAP_GAMES_HPP_
