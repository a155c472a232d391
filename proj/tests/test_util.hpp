#ifndef COALSHAP_TESTS_TEST_UTIL_HPP_
#define COALSHAP_TESTS_TEST_UTIL_HPP_

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "coalshap/core.hpp"

namespace coalshap::test_support {

// Independent oracle: average marginal contribution over all n! orderings.
// Only for n <= 8.
inline std::vector<double> permutation_shapley(const Game& game) {
  const std::size_t n = game.n_players();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> phi(n, 0.0);
  double count = 0.0;
  do {
    std::vector<std::uint8_t> bits(n, 0);
    double prev = game.utility(CoalitionMask(bits));
    for (auto p : order) {
      bits[p] = 1;
      const double cur = game.utility(CoalitionMask(bits));
      phi[p] += cur - prev;
      prev = cur;
    }
    count += 1.0;
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& x : phi) x /= count;
  return phi;
}

// Arbitrary game given by a table of 2^n values indexed by mask code.
class TableGame final : public Game {
 public:
  TableGame(std::size_t n, std::vector<double> values) : n_(n), values_(std::move(values)) {}
  std::size_t n_players() const override { return n_; }
  double utility(const CoalitionMask& m) const override {
    check_mask(m);
    return values_[m.code()];
  }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t n_;
  std::vector<double> values_;
};

inline TableGame random_table_game(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(std::size_t{1} << n);
  for (auto& x : v) x = normal(rng);
  return TableGame(n, std::move(v));
}

inline SampledDataset full_table(const Game& game) {
  SampledDataset data;
  const std::size_t n = game.n_players();
  for (std::uint64_t c = 0; c < (std::uint64_t{1} << n); ++c) {
    const auto m = CoalitionMask::from_code(c, n);
    data.add(m, game.utility(m));
  }
  return data;
}

}  // namespace coalshap::test_support

#endif  // COALSHAP_TESTS_TEST_UTIL_HPP_
