#ifndef COALSHAP_SAMPLING_HPP_
#define COALSHAP_SAMPLING_HPP_

#include <cstdint>
#include <exception>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "coalshap/core.hpp"

namespace coalshap {

enum class SamplingKind { kShapleyKernel, kUniformSizeThenSubset, kUniformOverInterior };

inline std::string_view to_string(SamplingKind k) {
  switch (k) {
    case SamplingKind::kShapleyKernel: return "shapley_kernel";
    case SamplingKind::kUniformSizeThenSubset: return "uniform_size_then_subset";
    case SamplingKind::kUniformOverInterior: return "uniform_over_interior";
  }
  throw std::invalid_argument("unknown sampling kind");
}

inline SamplingKind parse_sampling_kind(std::string_view s) {
  if (s == "shapley_kernel") return SamplingKind::kShapleyKernel;
  if (s == "uniform_size_then_subset") return SamplingKind::kUniformSizeThenSubset;
  if (s == "uniform_over_interior") return SamplingKind::kUniformOverInterior;
  throw std::invalid_argument("unknown sampling scheme '" + std::string(s) + "'");
}

struct SamplingScheme {
  SamplingKind kind = SamplingKind::kShapleyKernel;
  std::uint64_t budget_m = 2;
};

// Entry s-1 holds the probability of coalition size s, for s in 1..n-1.
inline std::vector<double> kernel_size_distribution(std::size_t n) {
  if (n < 2) throw std::invalid_argument("kernel_size_distribution: n must be >= 2");
  std::vector<double> p(n - 1);
  double total = 0.0;
  for (std::size_t s = 1; s < n; ++s) {
    p[s - 1] = static_cast<double>(n - 1) / static_cast<double>(s * (n - s));
    total += p[s - 1];
  }
  for (auto& x : p) x /= total;
  return p;
}

namespace detail {

// Partial Fisher-Yates over player indices; the first `size` entries of the
// shuffled prefix become members.
inline CoalitionMask uniform_subset_of_size(std::size_t n, std::size_t size, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<std::uint8_t> bits(n, 0);
  for (std::size_t i = 0; i < size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
    bits[idx[i]] = 1;
  }
  return CoalitionMask(std::move(bits));
}

}  // namespace detail

// First two entries are the empty and grand coalitions; the remaining
// budget_m - 2 are drawn with replacement from the hypercube interior.
inline std::vector<CoalitionMask> sample_coalitions(std::size_t n, const SamplingScheme& scheme,
                                                    std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("sample_coalitions: n must be >= 2");
  if (scheme.budget_m < 2) throw std::invalid_argument("sample_coalitions: budget_m must be >= 2");
  std::vector<CoalitionMask> out;
  out.reserve(scheme.budget_m);
  out.push_back(CoalitionMask::empty(n));
  out.push_back(CoalitionMask::full(n));

  std::mt19937_64 rng(seed);
  const std::uint64_t interior = scheme.budget_m - 2;
  switch (scheme.kind) {
    case SamplingKind::kShapleyKernel: {
      const auto p = kernel_size_distribution(n);
      std::discrete_distribution<std::size_t> size_dist(p.begin(), p.end());
      for (std::uint64_t i = 0; i < interior; ++i) {
        out.push_back(detail::uniform_subset_of_size(n, size_dist(rng) + 1, rng));
      }
      break;
    }
    case SamplingKind::kUniformSizeThenSubset: {
      std::uniform_int_distribution<std::size_t> size_dist(1, n - 1);
      for (std::uint64_t i = 0; i < interior; ++i) {
        out.push_back(detail::uniform_subset_of_size(n, size_dist(rng), rng));
      }
      break;
    }
    case SamplingKind::kUniformOverInterior: {
      if (n > 63) throw std::invalid_argument("uniform_over_interior: n must be <= 63");
      const std::uint64_t last = (std::uint64_t{1} << n) - 2;
      std::uniform_int_distribution<std::uint64_t> code_dist(1, last);
      for (std::uint64_t i = 0; i < interior; ++i) {
        out.push_back(CoalitionMask::from_code(code_dist(rng), n));
      }
      break;
    }
    default:
      throw std::invalid_argument("sample_coalitions: invalid scheme");
  }
  return out;
}

class GameEvaluationError : public std::runtime_error {
 public:
  GameEvaluationError(const CoalitionMask& mask, const std::string& what)
      : std::runtime_error("game evaluation failed for mask " + render_mask(mask) + ": " + what),
        mask_(mask) {}
  const CoalitionMask& mask() const { return mask_; }

 private:
  CoalitionMask mask_;
};

inline SampledDataset build_dataset(const Game& game, const std::vector<CoalitionMask>& masks) {
  if (masks.empty()) throw std::invalid_argument("build_dataset: no masks");
  SampledDataset data;
  data.n = game.n_players();
  data.rows.reserve(masks.size());
  for (const auto& m : masks) {
    if (m.size() != data.n) {
      throw std::invalid_argument("build_dataset: mask " + render_mask(m) + " has wrong length for " +
                                  std::to_string(data.n) + " players");
    }
    double u = 0.0;
    try {
      u = game.utility(m);
    } catch (const std::exception& e) {
      throw GameEvaluationError(m, e.what());
    }
    data.rows.push_back({m, u});
  }
  return data;
}

}  // namespace coalshap

#endif  // COALSHAP_SAMPLING_HPP_
