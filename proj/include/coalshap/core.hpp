#ifndef COALSHAP_CORE_HPP_
#define COALSHAP_CORE_HPP_

// Domain types shared by every module: coalition masks, the game interface,
// attributions, sampled datasets and deterministic seed derivation.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace coalshap {

// Binary inclusion vector over n players. Bit k is player k.
class CoalitionMask {
 public:
  CoalitionMask() = default;

  explicit CoalitionMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    if (bits_.empty()) throw std::invalid_argument("CoalitionMask: n must be positive");
    for (auto b : bits_) {
      if (b > 1) throw std::invalid_argument("CoalitionMask: bits must be 0 or 1");
    }
  }

  static CoalitionMask empty(std::size_t n) {
    return CoalitionMask(std::vector<std::uint8_t>(n, 0));
  }
  static CoalitionMask full(std::size_t n) {
    return CoalitionMask(std::vector<std::uint8_t>(n, 1));
  }

  // Bit k of `code` becomes player k. Requires n <= 64.
  static CoalitionMask from_code(std::uint64_t code, std::size_t n) {
    if (n == 0 || n > 64) throw std::invalid_argument("CoalitionMask::from_code: n must be in [1, 64]");
    std::vector<std::uint8_t> bits(n);
    for (std::size_t k = 0; k < n; ++k) bits[k] = static_cast<std::uint8_t>((code >> k) & 1u);
    return CoalitionMask(std::move(bits));
  }

  std::uint64_t code() const {
    if (bits_.size() > 64) throw std::logic_error("CoalitionMask::code: n exceeds 64");
    std::uint64_t c = 0;
    for (std::size_t k = 0; k < bits_.size(); ++k) c |= std::uint64_t{bits_[k]} << k;
    return c;
  }

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t k) const { return bits_[k] != 0; }
  bool contains(std::size_t k) const { return bits_.at(k) != 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool is_empty() const { return count() == 0; }
  bool is_full() const { return count() == bits_.size(); }

  CoalitionMask with(std::size_t k, bool value) const {
    auto bits = bits_;
    bits.at(k) = value ? 1 : 0;
    return CoalitionMask(std::move(bits));
  }

  std::vector<std::size_t> members() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < bits_.size(); ++k) {
      if (bits_[k]) out.push_back(k);
    }
    return out;
  }

  friend bool operator==(const CoalitionMask&, const CoalitionMask&) = default;
  friend auto operator<=>(const CoalitionMask&, const CoalitionMask&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

inline CoalitionMask make_mask(const std::set<std::size_t>& indices, std::size_t n) {
  if (n == 0) throw std::invalid_argument("make_mask: n must be positive");
  std::vector<std::uint8_t> bits(n, 0);
  for (auto i : indices) {
    if (i >= n) {
      throw std::invalid_argument("make_mask: index " + std::to_string(i) + " out of range for n=" +
                              std::to_string(n));
    }
    bits[i] = 1;
  }
  return CoalitionMask(std::move(bits));
}

// Leftmost character is player 0.
inline std::string render_mask(const CoalitionMask& m) {
  std::string s(m.size(), '0');
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (m[k]) s[k] = '1';
  }
  return s;
}

inline CoalitionMask parse_mask(std::string_view s, std::size_t n) {
  if (s.size() != n) {
    throw std::invalid_argument("parse_mask: length " + std::to_string(s.size()) +
                                " does not match n=" + std::to_string(n));
  }
  if (n == 0) throw std::invalid_argument("parse_mask: empty mask");
  std::vector<std::uint8_t> bits(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (s[k] == '0') {
      bits[k] = 0;
    } else if (s[k] == '1') {
      bits[k] = 1;
    } else {
      throw std::invalid_argument("parse_mask: invalid character '" + std::string(1, s[k]) +
                                  "' at position " + std::to_string(k));
    }
  }
  return CoalitionMask(std::move(bits));
}

inline CoalitionMask parse_mask(std::string_view s) { return parse_mask(s, s.size()); }

// Abstract utility oracle v: {0,1}^n -> R. Implementations must be
// deterministic; thread_safe() == false asks callers to serialize calls.
class Game {
 public:
  virtual ~Game() = default;
  virtual std::size_t n_players() const = 0;
  virtual double utility(const CoalitionMask& m) const = 0;
  virtual bool thread_safe() const { return true; }

 protected:
  void check_mask(const CoalitionMask& m) const {
    if (m.size() != n_players()) {
      throw std::invalid_argument("game expects " + std::to_string(n_players()) +
                                  " players, mask has " + std::to_string(m.size()));
    }
  }
};

class FunctionGame final : public Game {
 public:
  using Fn = std::function<double(const CoalitionMask&)>;
  FunctionGame(std::size_t n, Fn fn) : n_(n), fn_(std::move(fn)) {
    if (n_ == 0) throw std::invalid_argument("FunctionGame: n must be positive");
  }
  std::size_t n_players() const override { return n_; }
  double utility(const CoalitionMask& m) const override {
    check_mask(m);
    return fn_(m);
  }

 private:
  std::size_t n_;
  Fn fn_;
};

struct Attribution {
  std::vector<double> phi;
  std::string estimator_name;
  std::uint64_t budget_m = 0;
  std::uint64_t seed = 0;
  double v_full = 0.0;
  double v_empty = 0.0;

  std::size_t n() const { return phi.size(); }
};

struct DatasetRow {
  CoalitionMask mask;
  double utility = 0.0;
};

struct SampledDataset {
  std::size_t n = 0;
  std::vector<DatasetRow> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }

  void add(CoalitionMask mask, double utility) {
    if (n == 0) n = mask.size();
    if (mask.size() != n) {
      throw std::invalid_argument("SampledDataset: mask length " + std::to_string(mask.size()) +
                                  " differs from n=" + std::to_string(n));
    }
    rows.push_back({std::move(mask), utility});
  }

  const DatasetRow* find(const CoalitionMask& m) const {
    for (const auto& r : rows) {
      if (r.mask == m) return &r;
    }
    return nullptr;
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

// seed = splitmix64(splitmix64(base ^ fnv1a64(tag)) + splitmix64(index)).
// Each splitmix64 step is a bijection, so distinct (tag, index) pairs collide
// only through the final addition.
inline std::uint64_t derive_seed(std::uint64_t base_seed, std::string_view stream_tag,
                                 std::uint64_t index) {
  const std::uint64_t tagged = detail::splitmix64(base_seed ^ detail::fnv1a64(stream_tag));
  return detail::splitmix64(tagged + detail::splitmix64(index));
}

}  // namespace coalshap

#endif  // COALSHAP_CORE_HPP_
