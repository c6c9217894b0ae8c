#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdp {

// Error classes surfaced by the CLI as distinct exit codes.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using GridCoord = std::vector<int>;

// Shape of a d-dimensional discrete grid. Cells are flattened row-major
// (last dimension fastest).
struct GridShape {
  std::vector<int> dims;

  GridShape() = default;
  explicit GridShape(std::vector<int> d) : dims(std::move(d)) {
    for (int s : dims)
      if (s < 1) throw std::invalid_argument("GridShape: every size must be >= 1");
    if (dims.empty()) throw std::invalid_argument("GridShape: needs at least one dimension");
  }

  int ndim() const { return static_cast<int>(dims.size()); }

  long total() const {
    long t = 1;
    for (int s : dims) t *= s;
    return t;
  }

  long stride(int dim) const {
    long s = 1;
    for (int k = dim + 1; k < ndim(); ++k) s *= dims[k];
    return s;
  }

  bool contains(const GridCoord& y) const {
    if (static_cast<int>(y.size()) != ndim()) return false;
    for (int k = 0; k < ndim(); ++k)
      if (y[k] < 0 || y[k] >= dims[k]) return false;
    return true;
  }

  long flatten(const GridCoord& y) const {
    if (!contains(y)) throw std::invalid_argument("GridShape::flatten: coordinate out of bounds");
    long idx = 0;
    for (int k = 0; k < ndim(); ++k) idx = idx * dims[k] + y[k];
    return idx;
  }

  GridCoord unflatten(long idx) const {
    if (idx < 0 || idx >= total())
      throw std::invalid_argument("GridShape::unflatten: index out of bounds");
    GridCoord y(ndim());
    for (int k = ndim() - 1; k >= 0; --k) {
      y[k] = static_cast<int>(idx % dims[k]);
      idx /= dims[k];
    }
    return y;
  }

  // coordinate of cell `idx` along one dimension, without materializing the full coord
  int coord_along(long idx, int dim) const {
    return static_cast<int>((idx / stride(dim)) % dims[dim]);
  }

  bool operator==(const GridShape& o) const { return dims == o.dims; }
};

// Normalized mass vector over the flattened grid.
struct DiscreteDistribution {
  GridShape shape;
  std::vector<double> mass;
};

/*  Numerically stable primitives. All probability arithmetic in this
 *  library stays in the log domain: log sigma(x) = -softplus(-x),
 *  log(1-sigma(x)) = -softplus(x).  */

inline double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double log_sigmoid(double x) { return -softplus(-x); }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// inverse of softplus: x such that softplus(x) = y, y > 0
inline double inv_softplus(double y) {
  if (y > 30) return y;
  return std::log(std::expm1(y));
}

inline double logsumexp(std::span<const double> v) {
  double hi = -INFINITY;
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double s = 0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

// log(sigma(a) - sigma(b)) for a > b, stable in both tails
inline double log_sigmoid_diff(double a, double b) {
  return log_sigmoid(a) + log_sigmoid(-b) + std::log1p(-std::exp(b - a));
}

// splitmix64; used to derive independent seed streams from (seed, tags...)
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t seed_mix(std::initializer_list<uint64_t> parts) {
  uint64_t h = 0x6a09e667f3bcc908ULL;
  for (uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

}  // namespace sdp
