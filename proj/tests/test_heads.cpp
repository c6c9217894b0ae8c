#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "oracles.hpp"
#include "sdp/eval.hpp"
#include "sdp/heads.hpp"
#include "sdp/nnet.hpp"

using namespace sdp;

namespace {

HeadSpec make_spec(HeadKind kind, std::vector<int> dims, int m = 1, Smoothing sm = {}) {
  HeadSpec spec;
  spec.kind = kind;
  spec.shape = GridShape(std::move(dims));
  spec.mixture = m;
  spec.smooth = sm;
  return spec;
}

std::vector<double> random_params(const Head& head, Rng& rng) {
  std::vector<double> p(head.param_count());
  head.init_params(p, rng);
  for (auto& v : p) v += 0.3 * rng.normal();
  return p;
}

}  // namespace

TEST_CASE("param_count per kind") {
  CHECK(make_spec(HeadKind::MN, {12}).param_count() == 12);
  CHECK(make_spec(HeadKind::SMN, {12}).param_count() == 12);
  CHECK(make_spec(HeadKind::UDP, {12}).param_count() == 11);
  CHECK(make_spec(HeadKind::SDP, {12}).param_count() == 11);
  CHECK(make_spec(HeadKind::GMM, {12}, 3).param_count() == 3 * (1 + 1 + 1));
  CHECK(make_spec(HeadKind::GMM, {4, 4}, 2).param_count() == 2 * (1 + 2 + 3));
  CHECK(make_spec(HeadKind::LMM, {12}, 3).param_count() == 3 * 3);
  CHECK(make_spec(HeadKind::LMM, {4, 4, 4}, 2).param_count() == 2 * 7);
}

TEST_CASE("MN: equal logits give the uniform distribution") {
  Head head(make_spec(HeadKind::MN, {10}));
  std::vector<double> params(10, 1.7);
  DiscreteDistribution dist = head.full(params);
  for (double m : dist.mass) CHECK(m == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(head.log_prob(params, 3) == doctest::Approx(std::log(0.1)).epsilon(1e-12));
}

TEST_CASE("UDP with zero logits equals MN with equal logits") {
  Head udp(make_spec(HeadKind::UDP, {16}));
  Head mn(make_spec(HeadKind::MN, {16}));
  std::vector<double> e(15, 0.0), l(16, 0.0);
  DiscreteDistribution a = udp.full(e), b = mn.full(l);
  for (int j = 0; j < 16; ++j) CHECK(a.mass[j] == doctest::Approx(b.mass[j]).epsilon(1e-12));
}

TEST_CASE("LMM: single logistic at mu=0, s=1 puts sigma(0.5) on bin 0") {
  Head head(make_spec(HeadKind::LMM, {256}, 1));
  // params: [weight_logit, mu, raw_scale]; raw chosen so softplus(raw)+1e-3 = 1
  std::vector<double> params = {0.0, 0.0, inv_softplus(1.0 - 1e-3)};
  DiscreteDistribution dist = head.full(params);
  CHECK(dist.mass[0] == doctest::Approx(sigmoid(0.5)).epsilon(1e-9));
  CHECK(dist.mass[0] == doctest::Approx(0.6225).epsilon(1e-3));
}

TEST_CASE("LMM: edge absorption conserves total mass for random mu, s") {
  Rng rng(31);
  for (auto dims : {std::vector<int>{16}, std::vector<int>{7, 5}}) {
    Head head(make_spec(HeadKind::LMM, dims, 3));
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<double> params(head.param_count());
      for (auto& v : params) v = rng.uniform(-8.0, 8.0);
      DiscreteDistribution dist = head.full(params);
      double total = 0.0;
      for (double m : dist.mass) total += m;
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("GMM: normalization holds when most density lies outside the grid") {
  Head head(make_spec(HeadKind::GMM, {8}, 1));
  // mean far off-grid with a narrow scale
  std::vector<double> params = {0.0, 500.0, inv_softplus(0.5)};
  DiscreteDistribution dist = head.full(params);
  double total = 0.0;
  for (double m : dist.mass) total += m;
  CHECK(std::abs(total - 1.0) < 1e-9);
  for (double m : dist.mass) CHECK(m >= 0.0);
}

TEST_CASE("every head: full sums to one and exp(log_prob) matches full") {
  Rng rng(41);
  std::vector<HeadSpec> specs = {
      make_spec(HeadKind::MN, {9}),
      make_spec(HeadKind::GMM, {9}, 2),
      make_spec(HeadKind::GMM, {4, 3}, 2),
      make_spec(HeadKind::LMM, {9}, 2),
      make_spec(HeadKind::LMM, {4, 3}, 2),
      make_spec(HeadKind::UDP, {9}),
      make_spec(HeadKind::SMN, {9}, 1, Smoothing{0.1, 1, 2}),
      make_spec(HeadKind::SDP, {9}, 1, Smoothing{0.1, 1, 2}),
  };
  for (const auto& spec : specs) {
    Head head(spec);
    auto params = random_params(head, rng);
    DiscreteDistribution dist = head.full(params);
    double total = 0.0;
    for (double m : dist.mass) total += m;
    CHECK(std::abs(total - 1.0) < 1e-9);
    for (long y = 0; y < spec.shape.total(); ++y)
      CHECK(std::abs(std::exp(head.log_prob(params, y)) - dist.mass[y]) < 1e-9);
  }
}

TEST_CASE("every head: analytic gradient of log_prob matches finite differences") {
  Rng rng(43);
  std::vector<HeadSpec> specs = {
      make_spec(HeadKind::MN, {7}),
      make_spec(HeadKind::GMM, {7}, 2),
      make_spec(HeadKind::GMM, {3, 4}, 2),
      make_spec(HeadKind::LMM, {7}, 2),
      make_spec(HeadKind::LMM, {3, 4}, 2),
      make_spec(HeadKind::UDP, {7}),
  };
  for (const auto& spec : specs) {
    Head head(spec);
    for (int rep = 0; rep < 3; ++rep) {
      auto params = random_params(head, rng);
      long y = rng.below(spec.shape.total());
      std::vector<double> analytic(params.size(), 0.0);
      head.grad_log_prob(params, y, 1.0, analytic);
      auto f = [&](std::span<const double> p) { return head.log_prob(p, y); };
      CHECK(oracle::max_grad_mismatch(f, params, analytic, 1e-6) < 1e-5);
    }
  }
}

TEST_CASE("smoothed heads: training-loss gradient matches finite differences") {
  Rng rng(47);
  for (auto kind : {HeadKind::SMN, HeadKind::SDP}) {
    Head head(make_spec(kind, {12}, 1, Smoothing{0.3, 1, 3}));
    for (int rep = 0; rep < 4; ++rep) {
      auto params = oracle::random_vector(rng, head.param_count(), -2.0, 2.0);
      long y = rng.below(12);
      std::vector<double> analytic(params.size(), 0.0);
      double loss = head.train_loss_grad(params, y, 1.0, analytic);
      CHECK(loss == doctest::Approx(-head.log_prob(params, y) + head.penalty(params, y)));
      auto f = [&](std::span<const double> p) {
        return -head.log_prob(p, y) + head.penalty(p, y);
      };
      // random logits almost never sit on a kink of the L1 term
      CHECK(oracle::max_grad_mismatch(f, params, analytic, 1e-6) < 1e-5);
    }
  }
}

TEST_CASE("SDP and UDP score identically given the same parameters") {
  Rng rng(53);
  Head udp(make_spec(HeadKind::UDP, {32}));
  Head sdp_head(make_spec(HeadKind::SDP, {32}, 1, Smoothing{0.5, 2, 4}));
  auto params = oracle::random_vector(rng, 31, -2.0, 2.0);
  for (long y = 0; y < 32; ++y) {
    double a = udp.log_prob(params, y);
    double b = sdp_head.log_prob(params, y);
    CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);  // bit-identical
  }
}

TEST_CASE("smoothing with radius 0 and positive lambda is rejected") {
  CHECK_THROWS_AS(Head(make_spec(HeadKind::SDP, {8}, 1, Smoothing{0.1, 1, 0})),
                  std::invalid_argument);
  // lambda = 0 is fine (degenerates to the unsmoothed head)
  CHECK_NOTHROW(Head(make_spec(HeadKind::SDP, {8}, 1, Smoothing{0.0, 1, 0})));
}

TEST_CASE("parameter and target validation") {
  Head head(make_spec(HeadKind::MN, {8}));
  std::vector<double> params(8, 0.0);
  CHECK_THROWS_AS(head.log_prob(std::vector<double>(7, 0.0), 0L), std::invalid_argument);
  CHECK_THROWS_AS(head.log_prob(params, 8L), std::invalid_argument);
  CHECK_THROWS_AS(head.log_prob(params, GridCoord{9}), std::invalid_argument);
}

TEST_CASE("sample: point mass, uniform frequencies, determinism") {
  Head head(make_spec(HeadKind::MN, {4}));
  std::vector<double> point = {-100.0, 50.0, -100.0, -100.0};
  Rng rng(61);
  for (int rep = 0; rep < 20; ++rep) CHECK(head.sample(point, rng) == 1);

  // uniform mass: per-bin frequency within 4 sigma of binomial expectation
  std::vector<double> uniform(4, 0.0);
  const long n = 100000;
  std::vector<long> counts(4, 0);
  for (long i = 0; i < n; ++i) ++counts[head.sample(uniform, rng)];
  double expected = n / 4.0;
  double sigma = std::sqrt(n * 0.25 * 0.75);
  for (long c : counts) CHECK(std::abs(c - expected) < 4.0 * sigma);

  Rng a(99), b(99);
  for (int rep = 0; rep < 50; ++rep) CHECK(head.sample(uniform, a) == head.sample(uniform, b));
}

TEST_CASE("GMM self-consistency: marginal fit recovers a discretized Gaussian") {
  // draw 10k samples from a single discretized Gaussian and fit a 1-component
  // GMM in marginal mode; the recovered mass should be close in TV
  GridShape shape({32});
  HeadSpec truth_spec = make_spec(HeadKind::GMM, {32}, 1);
  Head truth_head(truth_spec);
  std::vector<double> truth_params = {0.0, 14.0, inv_softplus(4.0)};
  DiscreteDistribution truth = truth_head.full(truth_params);

  Rng rng(67);
  Dataset data;
  data.shape = shape;
  data.X = Mat(10000, 0);
  data.y.resize(10000);
  for (long i = 0; i < 10000; ++i) data.y[i] = sample_index(truth.mass, rng);

  Head head(truth_spec);
  Model model = Model::make_marginal(truth_spec);
  TrainConfig cfg;
  cfg.batch = 0;  // aggregated full-batch
  cfg.max_steps = 2000;
  cfg.max_epochs = 2000;
  cfg.lr = 0.05;
  cfg.val_every = 200;
  cfg.seed = 5;
  fit(model, head, data, cfg);
  CHECK(tv(head.full(model.params()), truth) < 0.05);
}
