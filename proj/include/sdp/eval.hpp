#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdp/heads.hpp"
#include "sdp/nnet.hpp"
#include "sdp/types.hpp"

namespace sdp {

// total variation distance, 1/2 * sum |p - q|, in [0, 1]
double tv(std::span<const double> p, std::span<const double> q);
double tv(const DiscreteDistribution& p, const DiscreteDistribution& q);

// per-dimension mean of a distribution in grid coordinates
std::vector<double> distribution_mean(const DiscreteDistribution& dist);

// RMSE of the Euclidean distance between the predicted distribution's mean
// and the true coordinate
double rmse(const Model& model, const Head& head, const Dataset& data,
            std::span<const int> idx);

struct HyperParams {
  double lambda = 0.0;
  int m = 1;
  int k = 1;
  int r = 0;
};

struct CellScore {
  HyperParams hp;
  double val_nll = 0.0;
  uint64_t seed = 0;
};

struct GridSearchResult {
  int best = -1;
  std::vector<CellScore> scores;  // in cell order
  Model model;                    // fitted winner
  HeadSpec spec;                  // winning cell's head spec
  const CellScore& selected() const { return scores[best]; }
};

/*  Fits every cell and selects the best validation mean log-prob. Ties
 *  break toward larger lambda, then smaller m (the smoother/simpler model),
 *  then smaller k and r; cell seeds derive from the cell's hyperparameters,
 *  so the selection is invariant to grid ordering and duplicates.  */
GridSearchResult grid_search(const std::vector<HeadSpec>& cells, const Dataset& data,
                             std::span<const int> train_idx, std::span<const int> val_idx,
                             const TrainConfig& base, const MlpSpec* net, int workers);

struct FoldMetrics {
  std::string fold;  // "0".. or "aggregate"
  long n_test = 0;
  double logprob_sum = 0.0;
  double rmse = 0.0;
  HyperParams selected;
};

struct MetricReport {
  std::optional<double> tv;
  double mean_logprob = 0.0;
  double rmse = 0.0;
  std::vector<FoldMetrics> folds;
  HyperParams selected;
};

}  // namespace sdp
