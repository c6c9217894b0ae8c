#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sdp/grid_tree.hpp"
#include "sdp/rng.hpp"
#include "sdp/trend_filter.hpp"
#include "sdp/types.hpp"

namespace sdp {

/*  The six benchmark heads behind one contract: a flat parameter vector in,
 *  discrete log-mass / full distribution / analytic parameter gradient out.
 *
 *    MN   multinomial logits, log-softmax over the grid
 *    GMM  mixture of Gaussians evaluated at bin centers, renormalized;
 *         covariance via Cholesky factor with softplus-positive diagonal
 *    LMM  mixture of logistics via CDF differences at half-integer bin
 *         edges; boundary bins absorb the tail mass
 *    UDP  dyadic partition logits, one per internal tree node
 *    SMN  multinomial trained with a trend filtering penalty on the logits
 *    SDP  dyadic partition trained with the penalty on the local window of
 *         leaf log-masses
 *
 *  Smoothing affects the training loss only: given identical parameters,
 *  SMN scores like MN and SDP scores like UDP.
 *
 *  Parameter layouts (per mixture component, components consecutive):
 *    GMM: [weight_logit, mu(d), chol lower-tri row-major (d(d+1)/2)]
 *    LMM: [weight_logit, mu(d), raw_scale(d)]
 *  Cholesky diagonals and logistic scales go through softplus(raw) + 1e-3.
 */

enum class HeadKind { MN, GMM, LMM, UDP, SMN, SDP };

HeadKind head_kind_from_string(const std::string& s);
std::string to_string(HeadKind k);

struct Smoothing {
  double lambda = 0.0;
  int order = 1;   // trend filtering order k
  int radius = 0;  // neighborhood radius r
};

struct HeadSpec {
  HeadKind kind = HeadKind::MN;
  GridShape shape;
  int mixture = 1;  // m, GMM/LMM only
  Smoothing smooth; // SMN/SDP only
  // real-valued bin centers per dimension; empty means bin j -> j
  std::vector<std::vector<double>> centers;

  int param_count() const;
  bool smoothed() const { return kind == HeadKind::SMN || kind == HeadKind::SDP; }
  bool tree_based() const { return kind == HeadKind::UDP || kind == HeadKind::SDP; }
};

class Head {
 public:
  explicit Head(HeadSpec spec);

  const HeadSpec& spec() const { return spec_; }
  int param_count() const { return spec_.param_count(); }
  const DyadicLayout* layout() const { return layout_.get(); }

  double log_prob(std::span<const double> params, long y_flat) const;
  double log_prob(std::span<const double> params, const GridCoord& y) const;
  DiscreteDistribution full(std::span<const double> params) const;

  // grad += weight * d log p(y) / d params
  void grad_log_prob(std::span<const double> params, long y_flat, double weight,
                     std::span<double> grad) const;

  // training-time smoothing penalty lambda * ||Delta~ l(y)||_1 (0 for
  // unsmoothed heads); subgradient optionally accumulated into grad
  double penalty(std::span<const double> params, long y_flat) const;

  // per-sample training loss -log p(y) + penalty; grad += weight * dLoss;
  // penalty_out, when given, receives the penalty portion of the loss
  double train_loss_grad(std::span<const double> params, long y_flat, double weight,
                         std::span<double> grad, double* penalty_out = nullptr) const;

  long sample(std::span<const double> params, Rng& rng) const;

  // marginal-mode starting point (mixture heads spread components over the grid)
  void init_params(std::span<double> params, Rng& rng) const;

 private:
  double logprob_impl(std::span<const double> params, long y_flat, double weight,
                      std::span<double>* grad) const;
  double penalty_impl(std::span<const double> params, long y_flat, double weight,
                      std::span<double>* grad) const;

  HeadSpec spec_;
  std::shared_ptr<const DyadicLayout> layout_;  // UDP/SDP only
  mutable OperatorCache ops_;
  std::vector<std::vector<double>> centers_;  // resolved per-dim centers
};

// inverse-CDF draw from a normalized mass vector
long sample_index(std::span<const double> mass, Rng& rng);

}  // namespace sdp
