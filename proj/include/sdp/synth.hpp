#pragma once

#include <span>
#include <vector>

#include "sdp/nnet.hpp"
#include "sdp/rng.hpp"
#include "sdp/types.hpp"

namespace sdp {

// real interval behind a discretized axis; bin j sits at center(j)
struct Embedding {
  double lo = 0.0, hi = 0.0;
  int bins = 0;
  double center(int j) const {
    if (bins == 1) return lo;
    return lo + j * (hi - lo) / (bins - 1);
  }
  std::vector<double> centers() const {
    std::vector<double> c(bins);
    for (int j = 0; j < bins; ++j) c[j] = center(j);
    return c;
  }
};

struct GroundTruth {
  DiscreteDistribution mass;
  std::vector<Embedding> embedding;   // one per dimension
  std::vector<double> provenance;     // generating parameters, family-specific
};

/*  The 1000-bin piecewise-linear marginal: logits follow a five-segment
 *  linear recurrence (slopes +0.5, -2, +0.9, +0.5, -1 on index ranges
 *  [2,300], (300,450], (450,750], (750,850], (850,1000], with E_1 = 0.5),
 *  are standardized to zero mean and unit variance, and pass through a
 *  softmax.  */
std::vector<double> piecewise_logits();  // raw recurrence values, before standardization
GroundTruth piecewise_marginal();

// 3 equally weighted Gaussians, means U[1,7], sd U[0.3,2], discretized by
// evaluating the pdf on the 128-point grid over [0.1, 10] and renormalizing
GroundTruth gmm_truth(Rng& rng);

// mixture of two boundary-reflected exponentials and a Gaussian:
// p(x) = 1/3 Exp(x|l1) + 1/3 Exp(10.1-x|l2) + 1/3 N(x|mu,sigma),
// l1, l2 ~ U[0.25,2], mu/sigma as in gmm_truth, same grid
double edge_biased_density(double x, double l1, double l2, double mu, double sigma);
GroundTruth edge_biased_truth(Rng& rng);

// K latent class-conditional distributions; features are noisy class
// indicators standing in for the image input of the original task
struct LatentClassTask {
  std::vector<GroundTruth> truths;
  int num_classes() const { return static_cast<int>(truths.size()); }
};

LatentClassTask make_latent_task(bool edge_biased, int classes, Rng& rng);

// x = one-hot(class) + noise_scale * N(0, I); y ~ class truth (inverse CDF)
Dataset make_task(const LatentClassTask& task, long n_samples, double noise_scale, Rng& rng);

std::vector<double> class_feature(int cls, int classes);  // clean indicator

}  // namespace sdp
