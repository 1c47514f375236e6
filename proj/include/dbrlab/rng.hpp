#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

namespace dbrlab::rng {

// splitmix64 step; used to derive independent stream seeds from a base seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Stream tags. Every consumer of randomness owns a named stream derived from
// the run seed, so adding draws to one consumer never perturbs another.
namespace stream {
inline constexpr std::uint64_t covariates = 1;
inline constexpr std::uint64_t treatment_noise = 2;
inline constexpr std::uint64_t generator_weights = 3;
inline constexpr std::uint64_t split = 4;
inline constexpr std::uint64_t model_init = 5;
inline constexpr std::uint64_t batch_order = 6;
inline constexpr std::uint64_t negatives = 7;
inline constexpr std::uint64_t mise_eval = 8;
inline constexpr std::uint64_t permutation = 9;
inline constexpr std::uint64_t dataset = 10;
inline constexpr std::uint64_t train = 11;
inline constexpr std::uint64_t outcome_noise = 12;
}  // namespace stream

inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = base;
  for (std::uint64_t tag : path) {
    s ^= tag * 0xD6E8FEB86659FD93ULL;
    s = splitmix64(s);
  }
  return s;
}

// Deterministic source of doubles and integers. The distributions are
// hand-rolled on top of mt19937_64 because the std distribution objects are
// implementation-defined; frozen test values must not depend on the stdlib.
class Engine {
 public:
  explicit Engine(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, cosine branch only: exactly two raw draws per variate.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // uniform integer in [0, n)
  std::uint64_t integer(std::uint64_t n) {
    const std::uint64_t bound = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= bound);
    return x % n;
  }

  // Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[integer(i)]);
    }
  }

  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

 private:
  std::mt19937_64 gen_;
};

inline Engine make_engine(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  return Engine(derive_seed(base, path));
}

}  // namespace dbrlab::rng
