#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "sdp/dataio.hpp"
#include "sdp/eval.hpp"
#include "sdp/heads.hpp"
#include "sdp/nnet.hpp"
#include "sdp/synth.hpp"

namespace sdp {

/*  Runners behind the CLI subcommands. Every emitted number is a pure
 *  function of (config, seed); wall-clock goes into the sidecar manifest,
 *  never into result CSVs, so reruns are byte-identical.  */

// ---- marginal: density estimation on the 1000-bin piecewise-linear task ----

struct MarginalRunConfig {
  long samples = 5000;
  long steps = 50000;
  int batch = 10;
  double lr = 1e-2;
  double eps = 0.1;
  double lambda = 0.02;
  int order = 1;
  std::vector<int> radii = {1, 3, 5, 10, 25};
  bool run_udp = true;
  int log_every = 100;
  std::vector<uint64_t> seeds = {1};
  int workers = 1;
};

struct CurvePoint {
  long step = 0;
  double tv = 0.0;
};

struct MarginalCurve {
  std::string method;  // "udp", "sdp_r<R>", "empirical"
  uint64_t seed = 0;
  std::vector<CurvePoint> points;
  double best_tv = 0.0;
  double final_tv = 0.0;
};

struct MarginalResult {
  std::vector<MarginalCurve> curves;
};

MarginalResult run_marginal(const MarginalRunConfig& config);
void write_marginal_csv(std::ostream& os, const MarginalResult& result);

// ---- synth: latent class-conditional benchmark over six heads ----

struct SynthRunConfig {
  std::vector<std::string> families = {"gmm", "edge"};
  std::vector<long> sizes = {500, 1000, 3000, 5000, 10000, 15000, 30000, 60000};
  int trials = 10;
  std::vector<HeadKind> heads = {HeadKind::MN,  HeadKind::GMM, HeadKind::LMM,
                                 HeadKind::UDP, HeadKind::SMN, HeadKind::SDP};
  std::vector<double> lambda_grid = {0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0};
  std::vector<int> k_grid = {1, 2};
  std::vector<int> m_grid = {1, 3, 5, 10, 20};
  int radius = 5;
  int classes = 10;
  double noise = 0.1;
  std::vector<int> hidden = {64};
  TrainConfig train;  // desk-scale defaults set in the constructor below
  uint64_t seed = 1;
  int workers = 1;

  SynthRunConfig() {
    train.lr = 1e-3;
    train.batch = 50;
    train.max_steps = 3000;
    train.max_epochs = 1000000;  // step-bounded
    train.val_every = 100;
  }
};

struct SynthRow {
  std::string family;
  long size = 0;
  std::string head;
  int trial = 0;
  uint64_t seed = 0;
  double tv = 0.0;
  double sel_lambda = 0.0;
  int sel_m = 1;
  int sel_k = 1;
  double val_nll = 0.0;
};

std::vector<SynthRow> run_synth(const SynthRunConfig& config);
void write_synth_csv(std::ostream& os, const std::vector<SynthRow>& rows);

// ---- tabular: k-fold CV benchmark on a CSV dataset ----

struct TabularRunConfig {
  std::string csv_path;
  Schema schema;
  int folds = 10;
  std::vector<HeadKind> heads = {HeadKind::MN,  HeadKind::GMM, HeadKind::LMM,
                                 HeadKind::UDP, HeadKind::SMN, HeadKind::SDP};
  std::vector<double> lambda_grid = {0.01, 0.1};
  std::vector<int> k_grid = {1};
  std::vector<int> m_grid = {1, 3};
  int radius = 5;
  std::vector<int> hidden = {256, 128, 64};
  double dropout_keep = 0.9;
  double weight_decay = 1e-5;
  TrainConfig train;  // the decaying-LR schedule protocol
  uint64_t seed = 1;
  int workers = 1;

  TabularRunConfig() {
    train.lr = 0.1;
    train.lr_min = 1e-4;
    train.lr_decay = 0.25;
    train.lr_patience = 10;
    train.max_epochs = 1000;
    train.batch = 50;
    train.val_every = 100;
  }
};

struct TabularRow {
  std::string head;
  std::string fold;  // "0".."9" or "aggregate"
  long n_test = 0;
  double logprob_sum = 0.0;
  double rmse = 0.0;
  double sel_lambda = 0.0;
  int sel_m = 1;
  int sel_k = 1;
  uint64_t seed = 0;
};

std::vector<TabularRow> run_tabular(const TabularRunConfig& config);
void write_tabular_csv(std::ostream& os, const std::vector<TabularRow>& rows);

// sidecar run metadata (config echo, version, wall-clock)
void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& entries);

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace sdp
