#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "sdp/types.hpp"

namespace sdp {

/*  Deterministic RNG. mt19937_64 output is fixed by the standard, and we
 *  roll our own uniform/normal/shuffle on top of it, so a fixed seed gives
 *  the same stream on every platform (std distributions do not).  */
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t bits() { return eng_(); }

  // [0, 1)
  double uniform() { return std::ldexp(static_cast<double>(eng_() >> 11), -53); }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // unbiased integer in {0, ..., n-1}
  long below(long n) {
    uint64_t bound = ~uint64_t{0} - (~uint64_t{0} % static_cast<uint64_t>(n));
    uint64_t x;
    do {
      x = eng_();
    } while (x >= bound);
    return static_cast<long>(x % static_cast<uint64_t>(n));
  }

  // standard normal, polar Box-Muller
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (long i = static_cast<long>(v.size()) - 1; i > 0; --i)
      std::swap(v[i], v[below(i + 1)]);
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sdp
