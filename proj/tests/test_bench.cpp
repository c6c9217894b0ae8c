#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "sdp/bench.hpp"

using namespace sdp;

namespace {

MarginalRunConfig tiny_marginal() {
  MarginalRunConfig cfg;
  cfg.steps = 300;
  cfg.log_every = 100;
  cfg.radii = {2};
  cfg.seeds = {3};
  return cfg;
}

}  // namespace

TEST_CASE("run_marginal: row format and reference lines") {
  MarginalResult result = run_marginal(tiny_marginal());
  // methods: udp, sdp_r2, empirical
  REQUIRE(result.curves.size() == 3);
  std::ostringstream csv;
  write_marginal_csv(csv, result);
  std::istringstream in(csv.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "method,seed,step,tv");
  long rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3 * 3);  // 3 methods x steps {100, 200, 300}
  for (const auto& c : result.curves) {
    for (const auto& p : c.points) {
      CHECK(p.tv >= 0.0);
      CHECK(p.tv <= 1.0);
    }
  }
}

TEST_CASE("run_marginal: reruns are identical; radius 0 with lambda > 0 is rejected") {
  std::ostringstream a, b;
  write_marginal_csv(a, run_marginal(tiny_marginal()));
  write_marginal_csv(b, run_marginal(tiny_marginal()));
  CHECK(a.str() == b.str());

  MarginalRunConfig bad = tiny_marginal();
  bad.radii = {0};
  CHECK_THROWS_AS(run_marginal(bad), config_error);
  bad.lambda = 0.0;  // radius 0 is only meaningful without smoothing
  CHECK_NOTHROW(run_marginal(bad));
}

TEST_CASE("run_synth: provenance-seeded rows, bit-identical reruns") {
  SynthRunConfig cfg;
  cfg.families = {"edge"};
  cfg.sizes = {200};
  cfg.trials = 2;
  cfg.heads = {HeadKind::MN, HeadKind::SDP};
  cfg.lambda_grid = {0.01};
  cfg.k_grid = {1};
  cfg.radius = 3;
  cfg.hidden = {16};
  cfg.train.max_steps = 120;
  cfg.train.val_every = 40;
  cfg.seed = 5;
  cfg.workers = 2;

  std::vector<SynthRow> rows = run_synth(cfg);
  REQUIRE(rows.size() == 4);  // 1 family x 1 size x 2 trials x 2 heads
  for (const auto& r : rows) {
    CHECK(r.tv >= 0.0);
    CHECK(r.tv <= 1.0);
    CHECK(r.seed != 0);
  }

  std::ostringstream a, b;
  write_synth_csv(a, rows);
  write_synth_csv(b, run_synth(cfg));
  CHECK(a.str() == b.str());
}

TEST_CASE("run_tabular: fold rows plus marked aggregate, deterministic rerun") {
  TabularRunConfig cfg;
  cfg.csv_path = std::string(TEST_DATA_DIR) + "/tabular_demo.csv";
  cfg.schema.targets = {"y"};
  cfg.schema.bins = {16};
  cfg.folds = 3;
  cfg.heads = {HeadKind::MN, HeadKind::SDP};
  cfg.lambda_grid = {0.05};
  cfg.k_grid = {1};
  cfg.m_grid = {1};
  cfg.hidden = {16};
  cfg.train.max_epochs = 8;
  cfg.train.lr = 0.05;
  cfg.train.lr_patience = 0;
  cfg.seed = 11;
  cfg.workers = 2;

  std::vector<TabularRow> rows = run_tabular(cfg);
  REQUIRE(rows.size() == 2 * (3 + 1));  // per head: 3 folds + aggregate
  long aggregates = 0;
  for (const auto& r : rows) {
    if (r.fold == "aggregate") {
      ++aggregates;
      CHECK(r.n_test == 400);
    } else {
      CHECK(r.n_test > 0);
    }
    CHECK(r.rmse >= 0.0);
  }
  CHECK(aggregates == 2);

  std::ostringstream a, b;
  write_tabular_csv(a, rows);
  write_tabular_csv(b, run_tabular(cfg));
  CHECK(a.str() == b.str());
}

TEST_CASE("run_tabular: data errors surface from dataio") {
  TabularRunConfig cfg;
  cfg.csv_path = "/nonexistent/nope.csv";
  cfg.schema.targets = {"y"};
  cfg.schema.bins = {8};
  CHECK_THROWS_AS(run_tabular(cfg), data_error);
}
