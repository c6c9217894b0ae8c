#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "sdp/types.hpp"

namespace sdp {

/*  Sparse k-th order graph trend filtering operator on a grid graph.
 *
 *  Order 1 is the oriented edge incidence matrix D (one row per
 *  axis-aligned edge, +1/-1 on its endpoints); higher orders follow the
 *  recursion D^(k+1) = D^T D^(k) for odd k and D D^(k) for even k, so
 *  order 2 is the graph Laplacian. Coefficients stay integral and every
 *  order annihilates constant vectors.  */
struct PenaltyOperator {
  int rows = 0;
  int cols = 0;
  int order = 0;
  std::vector<int> window_dims;

  // CSR with integer coefficients
  std::vector<int> row_ptr;
  std::vector<int> col;
  std::vector<int> coef;

  long nnz() const { return static_cast<long>(col.size()); }

  void apply(std::span<const double> z, std::span<double> out) const;  // out = op * z
  double penalty(std::span<const double> z) const;                     // ||op z||_1
  // out = op^T sign(op z), sign(0) = 0
  void penalty_subgrad(std::span<const double> z, std::span<double> out) const;
  // out += weight * op^T sign(op z); returns ||op z||_1
  double accumulate_subgrad(std::span<const double> z, double weight,
                            std::span<double> out) const;
};

PenaltyOperator incidence(const std::vector<int>& dims);
PenaltyOperator gtf_operator(const std::vector<int>& dims, int k);

/*  Operators are cheap but built per distinct clipped window shape, so runs
 *  cache them keyed by (dims, k). Construct-on-miss under a lock; the
 *  returned operator is immutable and safe to share across threads.  */
class OperatorCache {
 public:
  std::shared_ptr<const PenaltyOperator> get(const std::vector<int>& dims, int k);

 private:
  std::mutex mu_;
  std::map<std::pair<std::vector<int>, int>, std::shared_ptr<const PenaltyOperator>> cache_;
};

}  // namespace sdp
