#include "sdp/trend_filter.hpp"

#include <cmath>
#include <cstdlib>

namespace sdp {

void PenaltyOperator::apply(std::span<const double> z, std::span<double> out) const {
  if (static_cast<int>(z.size()) != cols || static_cast<int>(out.size()) != rows)
    throw std::invalid_argument("PenaltyOperator::apply: length mismatch");
  for (int i = 0; i < rows; ++i) {
    double s = 0.0;
    for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) s += coef[p] * z[col[p]];
    out[i] = s;
  }
}

double PenaltyOperator::penalty(std::span<const double> z) const {
  if (static_cast<int>(z.size()) != cols)
    throw std::invalid_argument("PenaltyOperator::penalty: length mismatch");
  double total = 0.0;
  for (int i = 0; i < rows; ++i) {
    double s = 0.0;
    for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) s += coef[p] * z[col[p]];
    total += std::abs(s);
  }
  return total;
}

void PenaltyOperator::penalty_subgrad(std::span<const double> z, std::span<double> out) const {
  if (static_cast<int>(out.size()) != cols)
    throw std::invalid_argument("PenaltyOperator::penalty_subgrad: length mismatch");
  for (auto& v : out) v = 0.0;
  accumulate_subgrad(z, 1.0, out);
}

double PenaltyOperator::accumulate_subgrad(std::span<const double> z, double weight,
                                           std::span<double> out) const {
  if (static_cast<int>(z.size()) != cols || static_cast<int>(out.size()) != cols)
    throw std::invalid_argument("PenaltyOperator::accumulate_subgrad: length mismatch");
  double total = 0.0;
  for (int i = 0; i < rows; ++i) {
    double s = 0.0;
    for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) s += coef[p] * z[col[p]];
    total += std::abs(s);
    if (s == 0.0) continue;  // sign(0) = 0
    double g = (s > 0 ? weight : -weight);
    for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) out[col[p]] += g * coef[p];
  }
  return total;
}

namespace {

PenaltyOperator freeze(int rows, int cols, int order, const std::vector<int>& dims,
                       const std::vector<std::vector<std::pair<int, int>>>& row_entries) {
  PenaltyOperator op;
  op.rows = rows;
  op.cols = cols;
  op.order = order;
  op.window_dims = dims;
  op.row_ptr.resize(rows + 1, 0);
  for (int i = 0; i < rows; ++i) {
    op.row_ptr[i + 1] = op.row_ptr[i] + static_cast<int>(row_entries[i].size());
    for (auto [c, v] : row_entries[i]) {
      op.col.push_back(c);
      op.coef.push_back(v);
    }
  }
  return op;
}

// C = A * B, dropping entries that cancel to zero
PenaltyOperator multiply(const PenaltyOperator& a, const PenaltyOperator& b, int order,
                         const std::vector<int>& dims) {
  std::vector<std::vector<std::pair<int, int>>> rows(a.rows);
  std::vector<int> acc(b.cols, 0);
  std::vector<int> touched;
  for (int i = 0; i < a.rows; ++i) {
    touched.clear();
    for (int p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      int j = a.col[p], va = a.coef[p];
      for (int q = b.row_ptr[j]; q < b.row_ptr[j + 1]; ++q) {
        if (acc[b.col[q]] == 0) touched.push_back(b.col[q]);
        acc[b.col[q]] += va * b.coef[q];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (int c : touched) {
      if (acc[c] != 0) rows[i].push_back({c, acc[c]});
      acc[c] = 0;
    }
  }
  return freeze(a.rows, b.cols, order, dims, rows);
}

PenaltyOperator transpose(const PenaltyOperator& a) {
  std::vector<std::vector<std::pair<int, int>>> rows(a.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p)
      rows[a.col[p]].push_back({i, a.coef[p]});
  return freeze(a.cols, a.rows, a.order, a.window_dims, rows);
}

}  // namespace

PenaltyOperator incidence(const std::vector<int>& dims) {
  GridShape shape(dims);
  const long n = shape.total();
  const int d = shape.ndim();

  std::vector<std::vector<std::pair<int, int>>> rows;
  // one row per edge: e_j - e_i with i < j in row-major order
  for (long i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      if (shape.coord_along(i, k) + 1 >= dims[k]) continue;
      long j = i + shape.stride(k);
      rows.push_back({{static_cast<int>(i), -1}, {static_cast<int>(j), +1}});
    }
  }
  return freeze(static_cast<int>(rows.size()), static_cast<int>(n), 1, dims, rows);
}

PenaltyOperator gtf_operator(const std::vector<int>& dims, int k) {
  if (k < 1) throw std::invalid_argument("gtf_operator: order must be >= 1");
  PenaltyOperator d1 = incidence(dims);
  if (k == 1) return d1;
  PenaltyOperator d1t = transpose(d1);
  PenaltyOperator op = d1;
  for (int o = 1; o < k; ++o) {
    // Delta^(o+1) = D^T Delta^(o) for odd o, D Delta^(o) for even o
    op = (o % 2 == 1) ? multiply(d1t, op, o + 1, dims) : multiply(d1, op, o + 1, dims);
  }
  return op;
}

std::shared_ptr<const PenaltyOperator> OperatorCache::get(const std::vector<int>& dims, int k) {
  std::lock_guard<std::mutex> lock(mu_);
  auto key = std::make_pair(dims, k);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  auto op = std::make_shared<const PenaltyOperator>(gtf_operator(dims, k));
  cache_.emplace(std::move(key), op);
  return op;
}

}  // namespace sdp
