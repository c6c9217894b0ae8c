#include "sdp/eval.hpp"

#include <bit>
#include <cmath>

#include "sdp/parallel.hpp"

namespace sdp {

double tv(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("tv: length mismatch");
  double s = 0.0;
  for (size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

double tv(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  if (!(p.shape == q.shape)) throw std::invalid_argument("tv: shape mismatch");
  return tv(std::span<const double>(p.mass), std::span<const double>(q.mass));
}

std::vector<double> distribution_mean(const DiscreteDistribution& dist) {
  const int d = dist.shape.ndim();
  std::vector<double> mean(d, 0.0);
  for (long j = 0; j < dist.shape.total(); ++j) {
    double m = dist.mass[j];
    if (m == 0.0) continue;
    for (int k = 0; k < d; ++k) mean[k] += m * dist.shape.coord_along(j, k);
  }
  return mean;
}

double rmse(const Model& model, const Head& head, const Dataset& data,
            std::span<const int> idx) {
  Mlp::Workspace ws;
  const int d = data.shape.ndim();
  double total = 0.0;
  for (int i : idx) {
    auto hp = model.head_params(data.X.cols > 0 ? data.X.row(i) : std::span<const double>{},
                                false, nullptr, ws);
    std::vector<double> mean = distribution_mean(head.full(hp));
    double err2 = 0.0;
    for (int k = 0; k < d; ++k) {
      double diff = mean[k] - data.shape.coord_along(data.y[i], k);
      err2 += diff * diff;
    }
    total += err2;
  }
  return std::sqrt(total / static_cast<double>(idx.size()));
}

namespace {

uint64_t cell_seed(uint64_t base, const HeadSpec& spec) {
  // derived from the cell's contents so grid ordering cannot matter
  return seed_mix({base, static_cast<uint64_t>(spec.kind),
                   std::bit_cast<uint64_t>(spec.smooth.lambda),
                   static_cast<uint64_t>(spec.mixture),
                   static_cast<uint64_t>(spec.smooth.order),
                   static_cast<uint64_t>(spec.smooth.radius)});
}

HyperParams cell_hp(const HeadSpec& spec) {
  return HyperParams{spec.smooth.lambda, spec.mixture, spec.smooth.order, spec.smooth.radius};
}

// deterministic total order: score, then larger lambda, smaller m, k, r
bool better(const CellScore& a, const CellScore& b) {
  if (a.val_nll != b.val_nll) return a.val_nll < b.val_nll;
  if (a.hp.lambda != b.hp.lambda) return a.hp.lambda > b.hp.lambda;
  if (a.hp.m != b.hp.m) return a.hp.m < b.hp.m;
  if (a.hp.k != b.hp.k) return a.hp.k < b.hp.k;
  return a.hp.r < b.hp.r;
}

}  // namespace

GridSearchResult grid_search(const std::vector<HeadSpec>& cells, const Dataset& data,
                             std::span<const int> train_idx, std::span<const int> val_idx,
                             const TrainConfig& base, const MlpSpec* net, int workers) {
  if (cells.empty()) throw config_error("grid_search: empty hyperparameter grid");

  struct CellFit {
    CellScore score;
    Model model;
  };
  std::vector<CellFit> fits(cells.size());

  parallel_for(static_cast<long>(cells.size()), workers, [&](long c) {
    Head head(cells[c]);
    TrainConfig cfg = base;
    cfg.seed = cell_seed(base.seed, cells[c]);
    Model model;
    if (net) {
      MlpSpec ms = *net;
      ms.sizes.back() = head.param_count();
      model = Model::make_mlp(ms);
    } else {
      model = Model::make_marginal(cells[c]);
    }
    TrainLog log = fit(model, head, data, train_idx, val_idx, cfg);
    fits[c].score = CellScore{cell_hp(cells[c]), log.best_val_nll, cfg.seed};
    fits[c].model = std::move(model);
  });

  GridSearchResult result;
  result.scores.reserve(fits.size());
  for (auto& f : fits) result.scores.push_back(f.score);
  int best = 0;
  for (size_t c = 1; c < fits.size(); ++c)
    if (better(result.scores[c], result.scores[best])) best = static_cast<int>(c);
  result.best = best;
  result.model = std::move(fits[best].model);
  result.spec = cells[best];
  return result;
}

}  // namespace sdp
