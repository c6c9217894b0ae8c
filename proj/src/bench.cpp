#include "sdp/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "sdp/parallel.hpp"
#include "sdp/rng.hpp"

namespace sdp {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
}

// ---------------------------------------------------------------- marginal

namespace {

struct MarginalTask {
  std::string method;
  uint64_t seed = 0;
  int radius = 0;  // 0 = unsmoothed
};

MarginalCurve train_marginal_curve(const MarginalTask& task, const MarginalRunConfig& config,
                                   const GroundTruth& truth) {
  HeadSpec spec;
  spec.kind = task.radius > 0 ? HeadKind::SDP : HeadKind::UDP;
  spec.shape = truth.mass.shape;
  if (task.radius > 0) spec.smooth = Smoothing{config.lambda, config.order, task.radius};
  Head head(spec);

  // draw the training sample for this seed
  Rng data_rng(seed_mix({task.seed, 0xDA7A}));
  std::vector<long> sample(config.samples);
  for (long i = 0; i < config.samples; ++i)
    sample[i] = sample_index(truth.mass.mass, data_rng);

  std::vector<double> params(head.param_count(), 0.0);
  std::vector<double> grad(params.size(), 0.0);
  AdamState adam;
  adam.init(params.size());
  Rng shuffle_rng(seed_mix({task.seed, 0x54F1E}));
  std::vector<long> order = sample;

  MarginalCurve curve;
  curve.method = task.method;
  curve.seed = task.seed;
  curve.best_tv = 2.0;

  auto record = [&](long step) {
    double err = tv(head.full(params), truth.mass);
    curve.points.push_back({step, err});
    curve.best_tv = std::min(curve.best_tv, err);
    curve.final_tv = err;
  };

  long step = 0;
  size_t cursor = order.size();  // trigger shuffle on first batch
  while (step < config.steps) {
    if (cursor >= order.size()) {
      shuffle_rng.shuffle(order);
      cursor = 0;
    }
    size_t stop = std::min(order.size(), cursor + config.batch);
    double w = 1.0 / static_cast<double>(stop - cursor);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (; cursor < stop; ++cursor) head.train_loss_grad(params, order[cursor], w, grad);
    adam.step(params, grad, config.lr, 0.9, 0.999, config.eps);
    ++step;
    if (step % config.log_every == 0 || step == config.steps) record(step);
  }
  return curve;
}

}  // namespace

MarginalResult run_marginal(const MarginalRunConfig& config) {
  if (config.lambda < 0) throw config_error("marginal: lambda must be >= 0");
  if (config.order < 1) throw config_error("marginal: order must be >= 1");
  for (int r : config.radii)
    if (r < 1 && config.lambda > 0)
      throw config_error(
          "marginal: radius 0 with lambda > 0 leaves an empty difference operator "
          "on a single-cell window; use radius >= 1 (or lambda 0 for the unsmoothed model)");
  if (config.samples < 1) throw config_error("marginal: need at least one sample");

  GroundTruth truth = piecewise_marginal();

  std::vector<MarginalTask> tasks;
  for (uint64_t seed : config.seeds) {
    if (config.run_udp) tasks.push_back({"udp", seed, 0});
    for (int r : config.radii) tasks.push_back({"sdp_r" + std::to_string(r), seed, r});
  }

  MarginalResult result;
  result.curves.resize(tasks.size());
  parallel_for(static_cast<long>(tasks.size()), config.workers, [&](long i) {
    result.curves[i] = train_marginal_curve(tasks[i], config, truth);
  });

  // empirical MLE reference per seed, emitted on the same step grid
  for (uint64_t seed : config.seeds) {
    Rng data_rng(seed_mix({seed, 0xDA7A}));
    std::vector<double> counts(truth.mass.shape.total(), 0.0);
    for (long i = 0; i < config.samples; ++i)
      counts[sample_index(truth.mass.mass, data_rng)] += 1.0;
    for (double& c : counts) c /= static_cast<double>(config.samples);
    double err = tv(counts, truth.mass.mass);
    MarginalCurve ref;
    ref.method = "empirical";
    ref.seed = seed;
    ref.best_tv = ref.final_tv = err;
    for (long step = config.log_every; step <= config.steps; step += config.log_every)
      ref.points.push_back({step, err});
    if (config.steps % config.log_every != 0) ref.points.push_back({config.steps, err});
    result.curves.push_back(std::move(ref));
  }
  return result;
}

void write_marginal_csv(std::ostream& os, const MarginalResult& result) {
  os << "method,seed,step,tv\n";
  for (const auto& c : result.curves)
    for (const auto& p : c.points)
      os << c.method << "," << c.seed << "," << p.step << "," << format_double(p.tv) << "\n";
}

// ------------------------------------------------------------------- synth

namespace {

struct GridSpec {
  std::vector<double> lambda_grid;
  std::vector<int> k_grid;
  std::vector<int> m_grid;
  int radius = 5;
};

std::vector<HeadSpec> head_cells(HeadKind kind, const GridShape& shape,
                                 const std::vector<std::vector<double>>& centers,
                                 const GridSpec& grid) {
  std::vector<HeadSpec> cells;
  HeadSpec base;
  base.kind = kind;
  base.shape = shape;
  if (kind == HeadKind::GMM) base.centers = centers;
  switch (kind) {
    case HeadKind::MN:
    case HeadKind::UDP:
      cells.push_back(base);
      break;
    case HeadKind::GMM:
    case HeadKind::LMM:
      for (int m : grid.m_grid) {
        base.mixture = m;
        cells.push_back(base);
      }
      break;
    case HeadKind::SMN:
    case HeadKind::SDP:
      for (int k : grid.k_grid)
        for (double lambda : grid.lambda_grid) {
          base.smooth = Smoothing{lambda, k, grid.radius};
          cells.push_back(base);
        }
      break;
  }
  return cells;
}

uint64_t family_tag(const std::string& family) {
  return family == "edge" ? 0xED6Eu : 0x6A33u;
}

}  // namespace

std::vector<SynthRow> run_synth(const SynthRunConfig& config) {
  if (config.trials < 1) throw config_error("synth: trials must be >= 1");
  if (config.sizes.empty() || config.heads.empty() || config.families.empty())
    throw config_error("synth: families, sizes and heads must be non-empty");
  for (const auto& f : config.families)
    if (f != "gmm" && f != "edge") throw config_error("synth: unknown family " + f);
  for (double l : config.lambda_grid)
    if (l < 0) throw config_error("synth: lambda must be >= 0");
  if (config.radius < 1) throw config_error("synth: radius must be >= 1");

  struct Task {
    std::string family;
    long size;
    int trial;
    HeadKind head;
  };
  std::vector<Task> tasks;
  for (const auto& family : config.families)
    for (long size : config.sizes)
      for (int trial = 0; trial < config.trials; ++trial)
        for (HeadKind head : config.heads) tasks.push_back({family, size, trial, head});

  std::vector<SynthRow> rows(tasks.size());
  parallel_for(static_cast<long>(tasks.size()), config.workers, [&](long ti) {
    const Task& task = tasks[ti];
    uint64_t ftag = family_tag(task.family);

    // the latent truths depend on (family, trial) only; the sampled dataset
    // additionally on the sample size
    Rng truth_rng(seed_mix({config.seed, ftag, static_cast<uint64_t>(task.trial), 0x7277}));
    LatentClassTask latent = make_latent_task(task.family == "edge", config.classes, truth_rng);
    Rng data_rng(seed_mix({config.seed, ftag, static_cast<uint64_t>(task.trial),
                           static_cast<uint64_t>(task.size), 0xDA7A}));
    Dataset data = make_task(latent, task.size, config.noise, data_rng);

    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(seed_mix({config.seed, ftag, static_cast<uint64_t>(task.trial),
                            static_cast<uint64_t>(task.size), 0x5B117}));
    split_rng.shuffle(order);
    long n_val = std::max<long>(1, std::lround(0.2 * static_cast<double>(data.size())));
    std::vector<int> val(order.begin(), order.begin() + n_val);
    std::vector<int> train(order.begin() + n_val, order.end());

    std::vector<std::vector<double>> centers = {latent.truths[0].embedding[0].centers()};
    GridSpec grids{config.lambda_grid, config.k_grid, config.m_grid, config.radius};
    std::vector<HeadSpec> cells = head_cells(task.head, data.shape, centers, grids);

    MlpSpec net;
    net.sizes.push_back(config.classes);
    for (int h : config.hidden) net.sizes.push_back(h);
    net.sizes.push_back(1);  // resized per cell to the head's param count

    TrainConfig base = config.train;
    base.seed = seed_mix({config.seed, ftag, static_cast<uint64_t>(task.size),
                          static_cast<uint64_t>(task.trial),
                          static_cast<uint64_t>(task.head)});

    GridSearchResult search = grid_search(cells, data, train, val, base, &net, 1);

    // TV against each class truth at the clean class indicator, averaged
    Head head(search.spec);
    Mlp::Workspace ws;
    double tv_sum = 0.0;
    for (int cls = 0; cls < config.classes; ++cls) {
      std::vector<double> x = class_feature(cls, config.classes);
      auto hp = search.model.head_params(x, false, nullptr, ws);
      tv_sum += tv(head.full(hp), latent.truths[cls].mass);
    }

    SynthRow row;
    row.family = task.family;
    row.size = task.size;
    row.head = to_string(task.head);
    row.trial = task.trial;
    row.seed = base.seed;
    row.tv = tv_sum / config.classes;
    row.sel_lambda = search.selected().hp.lambda;
    row.sel_m = search.selected().hp.m;
    row.sel_k = search.selected().hp.k;
    row.val_nll = search.selected().val_nll;
    rows[ti] = row;
  });
  return rows;
}

void write_synth_csv(std::ostream& os, const std::vector<SynthRow>& rows) {
  os << "family,samples,head,trial,seed,tv,selected_lambda,selected_m,selected_k,val_nll\n";
  for (const auto& r : rows)
    os << r.family << "," << r.size << "," << r.head << "," << r.trial << "," << r.seed << ","
       << format_double(r.tv) << "," << format_double(r.sel_lambda) << "," << r.sel_m << ","
       << r.sel_k << "," << format_double(r.val_nll) << "\n";
}

// ----------------------------------------------------------------- tabular

std::vector<TabularRow> run_tabular(const TabularRunConfig& config) {
  if (config.folds < 2) throw config_error("tabular: folds must be >= 2");
  if (config.heads.empty()) throw config_error("tabular: heads must be non-empty");
  if (config.radius < 1) throw config_error("tabular: radius must be >= 1");

  TabularDataset table = load_csv(config.csv_path, config.schema);
  assign_kfold(table, config.folds, config.seed);

  struct Task {
    int fold;
    HeadKind head;
  };
  std::vector<Task> tasks;
  for (int f = 0; f < config.folds; ++f)
    for (HeadKind h : config.heads) tasks.push_back({f, h});

  std::vector<TabularRow> slots(tasks.size());
  GridSpec grids{config.lambda_grid, config.k_grid, config.m_grid, config.radius};

  parallel_for(static_cast<long>(tasks.size()), config.workers, [&](long ti) {
    const Task& task = tasks[ti];
    TrialSplit split = cv_trial(table, task.fold, 0.2, config.seed);
    Standardizer std_;
    std_.fit(table.X, split.train);
    Dataset ds = to_dataset(table, std_);

    std::vector<HeadSpec> cells = head_cells(task.head, ds.shape, /*centers=*/{}, grids);

    MlpSpec net;
    net.sizes.push_back(ds.X.cols);
    for (int h : config.hidden) net.sizes.push_back(h);
    net.sizes.push_back(1);
    net.dropout_keep = config.dropout_keep;
    net.weight_decay = config.weight_decay;

    TrainConfig base = config.train;
    base.seed = seed_mix({config.seed, static_cast<uint64_t>(task.fold),
                          static_cast<uint64_t>(task.head)});

    GridSearchResult search = grid_search(cells, ds, split.train, split.val, base, &net, 1);

    Head head(search.spec);
    Mlp::Workspace ws;
    double lp = 0.0;
    for (int i : split.test)
      lp += head.log_prob(search.model.head_params(ds.X.row(i), false, nullptr, ws), ds.y[i]);

    TabularRow row;
    row.head = to_string(task.head);
    row.fold = std::to_string(task.fold);
    row.n_test = static_cast<long>(split.test.size());
    row.logprob_sum = lp;
    row.rmse = rmse(search.model, head, ds, split.test);
    row.sel_lambda = search.selected().hp.lambda;
    row.sel_m = search.selected().hp.m;
    row.sel_k = search.selected().hp.k;
    row.seed = base.seed;
    slots[ti] = row;
  });

  // fold rows in (head, fold) order, then one aggregate row per head
  std::vector<TabularRow> rows;
  for (HeadKind h : config.heads) {
    std::vector<const TabularRow*> per_head;
    for (size_t ti = 0; ti < tasks.size(); ++ti)
      if (tasks[ti].head == h) per_head.push_back(&slots[ti]);
    double lp = 0.0, rm = 0.0;
    long n = 0;
    for (const TabularRow* r : per_head) {
      rows.push_back(*r);
      lp += r->logprob_sum;
      rm += r->rmse;
      n += r->n_test;
    }
    TabularRow agg;
    agg.head = to_string(h);
    agg.fold = "aggregate";
    agg.n_test = n;
    agg.logprob_sum = lp / static_cast<double>(per_head.size());
    agg.rmse = rm / static_cast<double>(per_head.size());
    agg.sel_lambda = std::numeric_limits<double>::quiet_NaN();
    agg.sel_m = -1;
    agg.sel_k = -1;
    agg.seed = config.seed;
    rows.push_back(agg);
  }
  return rows;
}

void write_tabular_csv(std::ostream& os, const std::vector<TabularRow>& rows) {
  os << "head,fold,n_test,logprob_sum,rmse,selected_lambda,selected_m,selected_k,seed\n";
  for (const auto& r : rows)
    os << r.head << "," << r.fold << "," << r.n_test << "," << format_double(r.logprob_sum)
       << "," << format_double(r.rmse) << "," << format_double(r.sel_lambda) << "," << r.sel_m
       << "," << r.sel_k << "," << r.seed << "\n";
}

}  // namespace sdp
