#include "sdp/grid_tree.hpp"

#include <cassert>
#include <deque>

namespace sdp {

namespace {

struct PendingRegion {
  std::vector<int> lo, hi;
  int depth;
};

long region_total(const PendingRegion& r) {
  long t = 1;
  for (size_t k = 0; k < r.lo.size(); ++k) t *= r.hi[k] - r.lo[k] + 1;
  return t;
}

int pick_split_dim(const PendingRegion& r, int ndim) {
  for (int k = 0; k < ndim; ++k) {
    int dim = (r.depth + k) % ndim;
    if (r.hi[dim] - r.lo[dim] + 1 > 1) return dim;
  }
  return -1;
}

}  // namespace

DyadicLayout::DyadicLayout(GridShape shape) : shape_(std::move(shape)) {
  const int d = shape_.ndim();
  const long total = shape_.total();
  if (total == 1) return;

  nodes_.reserve(total - 1);
  region_.reserve(2 * d * (total - 1));

  // Breadth-first construction; node ids are assigned in enqueue order,
  // which for a FIFO queue equals level order.
  std::deque<PendingRegion> queue;
  {
    PendingRegion root;
    root.lo.assign(d, 0);
    root.hi.resize(d);
    for (int k = 0; k < d; ++k) root.hi[k] = shape_.dims[k] - 1;
    root.depth = 0;
    queue.push_back(std::move(root));
  }
  int next_id = 1;

  while (!queue.empty()) {
    PendingRegion r = std::move(queue.front());
    queue.pop_front();

    int dim = pick_split_dim(r, d);
    assert(dim >= 0);
    int extent = r.hi[dim] - r.lo[dim] + 1;
    int threshold = r.lo[dim] + (extent + 1) / 2;  // left child takes ceil(s/2)

    TreeNode node;
    node.split_dim = dim;
    node.threshold = threshold;

    PendingRegion left{r.lo, r.hi, r.depth + 1};
    left.hi[dim] = threshold - 1;
    PendingRegion right{r.lo, r.hi, r.depth + 1};
    right.lo[dim] = threshold;

    auto attach = [&](PendingRegion&& child) -> int {
      if (region_total(child) == 1) {
        depth_ = std::max(depth_, child.depth);
        GridCoord cell(child.lo.begin(), child.lo.end());
        return -static_cast<int>(shape_.flatten(cell)) - 1;
      }
      int id = next_id++;
      queue.push_back(std::move(child));
      return id;
    };
    node.left = attach(std::move(left));
    node.right = attach(std::move(right));

    for (int k = 0; k < d; ++k) region_.push_back(r.lo[k]);
    for (int k = 0; k < d; ++k) region_.push_back(r.hi[k]);
    nodes_.push_back(node);
  }
  assert(static_cast<long>(nodes_.size()) == total - 1);
}

DyadicLayout build_layout(const GridShape& shape) { return DyadicLayout(shape); }

SplitPath path_for(const DyadicLayout& layout, const GridCoord& y) {
  const GridShape& shape = layout.shape();
  if (!shape.contains(y)) throw std::invalid_argument("path_for: coordinate out of bounds");
  SplitPath path;
  path.steps.resize(layout.depth());
  if (layout.node_count() == 0) return path;

  int node = 0;
  size_t pos = 0;
  for (;;) {
    const TreeNode& n = layout.node(node);
    bool right = y[n.split_dim] >= n.threshold;
    path.steps[pos++] = SplitStep{node, right, true};
    int child = right ? n.right : n.left;
    if (child < 0) break;
    node = child;
  }
  return path;
}

double log_prob(const DyadicLayout& layout, std::span<const double> logits, long y_flat) {
  const GridShape& shape = layout.shape();
  if (static_cast<long>(logits.size()) != shape.total() - 1)
    throw std::invalid_argument("log_prob: logits length must be total-1");
  if (y_flat < 0 || y_flat >= shape.total())
    throw std::invalid_argument("log_prob: target out of bounds");
  if (layout.node_count() == 0) return 0.0;

  double acc = 0.0;
  int node = 0;
  for (;;) {
    const TreeNode& n = layout.node(node);
    int yd = shape.coord_along(y_flat, n.split_dim);
    int child;
    if (yd >= n.threshold) {
      acc += log_sigmoid(logits[node]);
      child = n.right;
    } else {
      acc += log_sigmoid(-logits[node]);
      child = n.left;
    }
    if (child < 0) {
      assert(-child - 1 == y_flat);
      return acc;
    }
    node = child;
  }
}

double log_prob(const DyadicLayout& layout, std::span<const double> logits, const GridCoord& y) {
  if (!layout.shape().contains(y)) throw std::invalid_argument("log_prob: coordinate out of bounds");
  return log_prob(layout, logits, layout.shape().flatten(y));
}

double log_prob_grad(const DyadicLayout& layout, std::span<const double> logits, long y_flat,
                     double weight, std::span<double> grad) {
  const GridShape& shape = layout.shape();
  if (static_cast<long>(logits.size()) != shape.total() - 1 ||
      grad.size() != logits.size())
    throw std::invalid_argument("log_prob_grad: length mismatch");
  if (y_flat < 0 || y_flat >= shape.total())
    throw std::invalid_argument("log_prob_grad: target out of bounds");
  if (layout.node_count() == 0) return 0.0;

  double acc = 0.0;
  int node = 0;
  for (;;) {
    const TreeNode& n = layout.node(node);
    int yd = shape.coord_along(y_flat, n.split_dim);
    double s = sigmoid(logits[node]);
    int child;
    if (yd >= n.threshold) {
      acc += log_sigmoid(logits[node]);
      grad[node] += weight * (1.0 - s);
      child = n.right;
    } else {
      acc += log_sigmoid(-logits[node]);
      grad[node] -= weight * s;
      child = n.left;
    }
    if (child < 0) return acc;
    node = child;
  }
}

namespace {

// DFS accumulating path log-probability; visit(leaf_flat, acc) at each leaf.
template <typename Visit>
void decode_walk(const DyadicLayout& layout, std::span<const double> logits, int node, double acc,
                 Visit&& visit) {
  const TreeNode& n = layout.node(node);
  double lp_right = log_sigmoid(logits[node]);
  double lp_left = log_sigmoid(-logits[node]);
  if (n.left < 0)
    visit(static_cast<long>(-n.left - 1), acc + lp_left);
  else
    decode_walk(layout, logits, n.left, acc + lp_left, visit);
  if (n.right < 0)
    visit(static_cast<long>(-n.right - 1), acc + lp_right);
  else
    decode_walk(layout, logits, n.right, acc + lp_right, visit);
}

}  // namespace

DiscreteDistribution decode_full(const DyadicLayout& layout, std::span<const double> logits) {
  const GridShape& shape = layout.shape();
  if (static_cast<long>(logits.size()) != shape.total() - 1)
    throw std::invalid_argument("decode_full: logits length must be total-1");
  DiscreteDistribution out;
  out.shape = shape;
  out.mass.assign(shape.total(), 0.0);
  if (layout.node_count() == 0) {
    out.mass[0] = 1.0;
    return out;
  }
  decode_walk(layout, logits, 0, 0.0,
              [&](long leaf, double lp) { out.mass[leaf] = std::exp(lp); });
  return out;
}

GridCoord NeighborhoodWindow::leaf(long j) const {
  GridCoord c = window_shape.unflatten(j);
  for (size_t k = 0; k < c.size(); ++k) c[k] += lo[k];
  return c;
}

std::vector<GridCoord> NeighborhoodWindow::leaves() const {
  std::vector<GridCoord> out;
  out.reserve(leaf_count());
  for (long j = 0; j < leaf_count(); ++j) out.push_back(leaf(j));
  return out;
}

NeighborhoodWindow neighborhood(const GridShape& shape, const GridCoord& y, int r) {
  if (!shape.contains(y)) throw std::invalid_argument("neighborhood: coordinate out of bounds");
  if (r < 0) throw std::invalid_argument("neighborhood: radius must be >= 0");
  NeighborhoodWindow w;
  w.center = y;
  w.radius = r;
  const int d = shape.ndim();
  w.lo.resize(d);
  w.hi.resize(d);
  std::vector<int> extents(d);
  for (int k = 0; k < d; ++k) {
    w.lo[k] = std::max(0, y[k] - r);
    w.hi[k] = std::min(shape.dims[k] - 1, y[k] + r);
    extents[k] = w.hi[k] - w.lo[k] + 1;
  }
  w.window_shape = GridShape(extents);
  return w;
}

namespace {

struct WindowWalker {
  const DyadicLayout& layout;
  std::span<const double> logits;
  const NeighborhoodWindow& window;
  const GridShape& shape;
  int ndim;

  bool cell_in_window(long flat) const {
    for (int k = 0; k < ndim; ++k) {
      int c = shape.coord_along(flat, k);
      if (c < window.lo[k] || c > window.hi[k]) return false;
    }
    return true;
  }

  long window_pos(long flat) const {
    long pos = 0;
    for (int k = 0; k < ndim; ++k) {
      int c = shape.coord_along(flat, k);
      pos = pos * window.window_shape.dims[k] + (c - window.lo[k]);
    }
    return pos;
  }

  bool overlaps(int node, int /*unused*/) const {
    for (int k = 0; k < ndim; ++k)
      if (layout.region_hi(node, k) < window.lo[k] || layout.region_lo(node, k) > window.hi[k])
        return false;
    return true;
  }

  // forward pass: leaf log-masses into out
  void gather(int node, double acc, std::span<double> out) const {
    const TreeNode& n = layout.node(node);
    double lp_left = log_sigmoid(-logits[node]);
    double lp_right = log_sigmoid(logits[node]);
    auto descend = [&](int child, double lp) {
      if (child < 0) {
        long flat = -child - 1;
        if (cell_in_window(flat)) out[window_pos(flat)] = acc + lp;
      } else if (overlaps(child, 0)) {
        gather(child, acc + lp, out);
      }
    };
    descend(n.left, lp_left);
    descend(n.right, lp_right);
  }

  // backward pass: returns sum of w over window leaves under `node`'s subtree,
  // adding weight * (sum_right*(1-sigma) - sum_left*sigma) at each node
  double backprop(int node, std::span<const double> w, double weight,
                  std::span<double> grad) const {
    const TreeNode& n = layout.node(node);
    auto subtree_sum = [&](int child) -> double {
      if (child < 0) {
        long flat = -child - 1;
        return cell_in_window(flat) ? w[window_pos(flat)] : 0.0;
      }
      if (!overlaps(child, 0)) return 0.0;
      return backprop(child, w, weight, grad);
    };
    double sum_left = subtree_sum(n.left);
    double sum_right = subtree_sum(n.right);
    double s = sigmoid(logits[node]);
    grad[node] += weight * (sum_right * (1.0 - s) - sum_left * s);
    return sum_left + sum_right;
  }
};

}  // namespace

std::vector<double> gather_window_logprobs(const DyadicLayout& layout,
                                           std::span<const double> logits,
                                           const NeighborhoodWindow& window) {
  const GridShape& shape = layout.shape();
  if (static_cast<long>(logits.size()) != shape.total() - 1)
    throw std::invalid_argument("gather_window_logprobs: logits length must be total-1");
  std::vector<double> out(window.leaf_count(), 0.0);
  if (layout.node_count() == 0) return out;
  WindowWalker walker{layout, logits, window, shape, shape.ndim()};
  walker.gather(0, 0.0, out);
  return out;
}

void accumulate_window_grad(const DyadicLayout& layout, std::span<const double> logits,
                            const NeighborhoodWindow& window, std::span<const double> w,
                            double weight, std::span<double> grad) {
  const GridShape& shape = layout.shape();
  if (static_cast<long>(logits.size()) != shape.total() - 1 ||
      grad.size() != logits.size())
    throw std::invalid_argument("accumulate_window_grad: length mismatch");
  if (static_cast<long>(w.size()) != window.leaf_count())
    throw std::invalid_argument("accumulate_window_grad: weight length mismatch");
  if (layout.node_count() == 0) return;
  WindowWalker walker{layout, logits, window, shape, shape.ndim()};
  walker.backprop(0, w, weight, grad);
}

}  // namespace sdp
