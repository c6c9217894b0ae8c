#pragma once

#include <memory>
#include <span>
#include <vector>

#include "sdp/types.hpp"

namespace sdp {

/*  Balanced dyadic partition of a d-dimensional grid.
 *
 *  The grid is split recursively into half spaces; every internal node
 *  carries an unconstrained logit E whose sigmoid is the probability of
 *  taking the right branch, so the log-mass of a cell is the sum of
 *  log-split-probabilities along its root-to-leaf path. A grid of `total`
 *  cells always has total-1 internal nodes.
 *
 *  Split convention: for a region of extent s along the split dimension,
 *  the left child takes the first ceil(s/2) cells and the threshold b is
 *  the first cell index of the right child, i.e. the right branch is
 *  y >= b. Nodes are enumerated breadth-first; at tree depth t the split
 *  dimension is t mod d, skipping dimensions whose extent within the
 *  current region is already 1.  */

struct TreeNode {
  int split_dim = 0;
  int threshold = 0;  // first cell index (global coords) of the right child
  // child >= 0: internal node id; child < 0: leaf holding flat cell -child-1
  int left = 0;
  int right = 0;
};

class DyadicLayout {
 public:
  explicit DyadicLayout(GridShape shape);

  const GridShape& shape() const { return shape_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  int depth() const { return depth_; }  // padded path length
  const TreeNode& node(int id) const { return nodes_[id]; }

  // inclusive region bounds of an internal node
  int region_lo(int id, int dim) const { return region_[(2 * id) * shape_.ndim() + dim]; }
  int region_hi(int id, int dim) const { return region_[(2 * id + 1) * shape_.ndim() + dim]; }

 private:
  GridShape shape_;
  std::vector<TreeNode> nodes_;
  std::vector<int> region_;  // [node][lo|hi][dim]
  int depth_ = 0;
};

DyadicLayout build_layout(const GridShape& shape);

struct SplitStep {
  int node = -1;
  bool right = false;
  bool active = false;
};

struct SplitPath {
  std::vector<SplitStep> steps;  // length = layout.depth(); inactive tail is padding
};

SplitPath path_for(const DyadicLayout& layout, const GridCoord& y);

// log p(y) = sum over the active path of log sigma(E_i) (right steps)
// and log(1 - sigma(E_i)) (left steps)
double log_prob(const DyadicLayout& layout, std::span<const double> logits, long y_flat);
double log_prob(const DyadicLayout& layout, std::span<const double> logits, const GridCoord& y);

// grad[i] += weight * d log p(y) / dE_i; nonzero only on the active path.
// Returns log p(y) from the same walk.
double log_prob_grad(const DyadicLayout& layout, std::span<const double> logits, long y_flat,
                     double weight, std::span<double> grad);

DiscreteDistribution decode_full(const DyadicLayout& layout, std::span<const double> logits);

/*  Clipped hypercube of radius r centered at a target cell; the penalty in
 *  training is evaluated over exactly this window. Leaves are enumerated in
 *  row-major order of the window.  */
struct NeighborhoodWindow {
  GridCoord center;
  int radius = 0;
  std::vector<int> lo, hi;  // inclusive, clipped to the grid
  GridShape window_shape;   // per-dim extents of the window

  long leaf_count() const { return window_shape.total(); }
  // global-grid coordinate of the j-th window leaf
  GridCoord leaf(long j) const;
  std::vector<GridCoord> leaves() const;
};

NeighborhoodWindow neighborhood(const GridShape& shape, const GridCoord& y, int r);

// Leaf log-masses over a window, computed by a single root-down traversal
// that shares overlapping path prefixes across leaves.
std::vector<double> gather_window_logprobs(const DyadicLayout& layout,
                                           std::span<const double> logits,
                                           const NeighborhoodWindow& window);

// grad[i] += weight * d( sum_j w[j] * logprob(leaf_j) ) / dE_i, computed in
// the same single traversal (subtree sums of w propagate down the shared paths).
void accumulate_window_grad(const DyadicLayout& layout, std::span<const double> logits,
                            const NeighborhoodWindow& window, std::span<const double> w,
                            double weight, std::span<double> grad);

}  // namespace sdp
