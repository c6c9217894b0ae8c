#include "sdp/synth.hpp"

#include <cmath>

#include "sdp/heads.hpp"

namespace sdp {

namespace {

constexpr int kSynthBins = 128;
constexpr double kSynthLo = 0.1;
constexpr double kSynthHi = 10.0;

void normalize(std::vector<double>& mass) {
  double s = 0.0;
  for (double m : mass) s += m;
  for (double& m : mass) m /= s;
}

GroundTruth discretize_density(const std::vector<double>& params, auto&& density) {
  GroundTruth gt;
  gt.embedding = {Embedding{kSynthLo, kSynthHi, kSynthBins}};
  gt.provenance = params;
  gt.mass.shape = GridShape({kSynthBins});
  gt.mass.mass.resize(kSynthBins);
  for (int j = 0; j < kSynthBins; ++j)
    gt.mass.mass[j] = density(gt.embedding[0].center(j));
  normalize(gt.mass.mass);
  return gt;
}

double normal_pdf(double x, double mu, double sigma) {
  double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI));
}

}  // namespace

std::vector<double> piecewise_logits() {
  std::vector<double> e(1000);
  e[0] = 0.5;  // E_1 in 1-indexed terms
  for (int i = 1; i < 1000; ++i) {
    int idx = i + 1;  // 1-indexed position
    double slope;
    if (idx <= 300)
      slope = 0.5;
    else if (idx <= 450)
      slope = -2.0;
    else if (idx <= 750)
      slope = 0.9;
    else if (idx <= 850)
      slope = 0.5;
    else
      slope = -1.0;
    e[i] = e[i - 1] + slope;
  }
  return e;
}

GroundTruth piecewise_marginal() {
  std::vector<double> e = piecewise_logits();
  double mean = 0.0;
  for (double v : e) mean += v;
  mean /= e.size();
  double var = 0.0;
  for (double v : e) var += (v - mean) * (v - mean);
  var /= e.size();
  double sd = std::sqrt(var);
  for (double& v : e) v = (v - mean) / sd;

  GroundTruth gt;
  gt.embedding = {Embedding{0.0, 999.0, 1000}};
  gt.mass.shape = GridShape({1000});
  gt.mass.mass.resize(1000);
  double z = logsumexp(e);
  for (int j = 0; j < 1000; ++j) gt.mass.mass[j] = std::exp(e[j] - z);
  return gt;
}

GroundTruth gmm_truth(Rng& rng) {
  std::vector<double> p;
  double mu[3], sd[3];
  for (int i = 0; i < 3; ++i) {
    mu[i] = rng.uniform(1.0, 7.0);
    sd[i] = rng.uniform(0.3, 2.0);
    p.push_back(mu[i]);
    p.push_back(sd[i]);
  }
  return discretize_density(p, [&](double x) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += normal_pdf(x, mu[i], sd[i]) / 3.0;
    return s;
  });
}

double edge_biased_density(double x, double l1, double l2, double mu, double sigma) {
  double left = l1 * std::exp(-l1 * x);
  double right = l2 * std::exp(-l2 * (10.1 - x));
  return (left + right + normal_pdf(x, mu, sigma)) / 3.0;
}

GroundTruth edge_biased_truth(Rng& rng) {
  double l1 = rng.uniform(0.25, 2.0);
  double l2 = rng.uniform(0.25, 2.0);
  double mu = rng.uniform(1.0, 7.0);
  double sigma = rng.uniform(0.3, 2.0);
  return discretize_density({l1, l2, mu, sigma}, [&](double x) {
    return edge_biased_density(x, l1, l2, mu, sigma);
  });
}

LatentClassTask make_latent_task(bool edge_biased, int classes, Rng& rng) {
  LatentClassTask task;
  task.truths.reserve(classes);
  for (int k = 0; k < classes; ++k)
    task.truths.push_back(edge_biased ? edge_biased_truth(rng) : gmm_truth(rng));
  return task;
}

std::vector<double> class_feature(int cls, int classes) {
  std::vector<double> x(classes, 0.0);
  x[cls] = 1.0;
  return x;
}

Dataset make_task(const LatentClassTask& task, long n_samples, double noise_scale, Rng& rng) {
  if (n_samples < 1) throw std::invalid_argument("make_task: need at least one sample");
  const int classes = task.num_classes();
  Dataset data;
  data.shape = task.truths.front().mass.shape;
  data.X = Mat(static_cast<int>(n_samples), classes);
  data.y.resize(n_samples);
  for (long i = 0; i < n_samples; ++i) {
    int cls = static_cast<int>(rng.below(classes));
    auto row = data.X.row(static_cast<int>(i));
    for (int k = 0; k < classes; ++k)
      row[k] = (k == cls ? 1.0 : 0.0) + noise_scale * rng.normal();
    data.y[i] = sample_index(task.truths[cls].mass.mass, rng);
  }
  return data;
}

}  // namespace sdp
