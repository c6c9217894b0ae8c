#pragma once

#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "sdp/heads.hpp"
#include "sdp/rng.hpp"
#include "sdp/types.hpp"

namespace sdp {

struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> a;
  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  std::span<const double> row(int r) const { return {a.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
  std::span<double> row(int r) { return {a.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
};

// Training view: features (possibly zero-width in marginal mode) plus flat
// grid targets.
struct Dataset {
  Mat X;
  std::vector<long> y;
  GridShape shape;
  long size() const { return static_cast<long>(y.size()); }
};

/*  Dense MLP with rectifier hidden layers, identity output, inverted
 *  dropout after each hidden activation, and analytic backprop. Parameters
 *  live in one flat vector [W0|b0|W1|b1|...] so optimizer state, snapshots
 *  and finite-difference checks all operate on a single array.  */
struct MlpSpec {
  std::vector<int> sizes;  // [input, hidden..., output]
  double dropout_keep = 1.0;
  double weight_decay = 0.0;
};

class Mlp {
 public:
  struct Workspace {
    std::vector<std::vector<double>> act;   // act[0] = input, act[L] = output
    std::vector<std::vector<double>> mask;  // dropout mask per hidden layer
    std::vector<std::vector<double>> delta;
  };

  Mlp() = default;
  explicit Mlp(MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  int input_size() const { return spec_.sizes.front(); }
  int output_size() const { return spec_.sizes.back(); }
  long param_size() const { return static_cast<long>(params_.size()); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  void init(Rng& rng);  // uniform fan-in scaled weights, zero biases

  std::span<const double> forward(std::span<const double> x, bool train, Rng* rng,
                                  Workspace& ws) const;
  // grad += d loss / d params given dout = d loss / d output
  void backward(const Workspace& ws, std::span<const double> dout,
                std::span<double> grad) const;
  void add_weight_decay(std::span<double> grad) const;  // weights only, not biases

 private:
  MlpSpec spec_;
  std::vector<double> params_;
  std::vector<long> w_off_, b_off_;
};

// A trainable model: either bare head parameters (marginal mode, the
// no-covariate setting) or an MLP mapping features to head parameters.
class Model {
 public:
  Model() = default;
  static Model make_marginal(const HeadSpec& head);
  static Model make_mlp(const MlpSpec& spec);

  bool marginal() const { return marginal_; }
  std::vector<double>& params() { return marginal_ ? head_params_ : mlp_.params(); }
  const std::vector<double>& params() const { return marginal_ ? head_params_ : mlp_.params(); }
  const Mlp& mlp() const { return mlp_; }

  void init(const Head& head, Rng& rng);
  std::span<const double> head_params(std::span<const double> x, bool train, Rng* rng,
                                      Mlp::Workspace& ws) const;
  void backward(const Mlp::Workspace& ws, std::span<const double> dhead,
                std::span<double> grad) const;
  void add_weight_decay(std::span<double> grad) const;

 private:
  bool marginal_ = true;
  Mlp mlp_;
  std::vector<double> head_params_;
};

struct AdamState {
  std::vector<double> m, v;
  long t = 0;
  void init(size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    t = 0;
  }
  void step(std::span<double> params, std::span<const double> grad, double lr, double beta1,
            double beta2, double eps);
};

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int batch = 50;       // 0 = full-batch aggregated over unique targets (marginal only)
  long max_steps = 0;   // 0 = bounded by max_epochs only
  int max_epochs = 1000;
  double val_fraction = 0.2;
  int val_every = 100;  // steps between validations (epoch ends always validate)
  // plateau schedule: after lr_patience epochs without a new best validation
  // NLL, lr *= lr_decay; training stops when lr would drop below lr_min.
  double lr_min = 0.0;
  double lr_decay = 1.0;
  int lr_patience = 0;  // 0 disables the schedule
  uint64_t seed = 1;
};

struct TrainLogRow {
  long step = 0;
  long epoch = 0;
  double lr = 0, train_nll = 0, val_nll = 0, penalty = 0, seconds = 0;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
  double best_val_nll = std::numeric_limits<double>::infinity();
  long best_step = 0;
  long steps = 0;
  void write_csv(std::ostream& os) const;
};

// Minimizes mean per-sample loss (NLL + smoothing penalty for SMN/SDP) over
// mini-batches with Adam; tracks the best validation NLL and restores the
// best parameters on return.
TrainLog fit(Model& model, const Head& head, const Dataset& data,
             std::span<const int> train_idx, std::span<const int> val_idx,
             const TrainConfig& config);

// convenience: seeded shuffle split with config.val_fraction
TrainLog fit(Model& model, const Head& head, const Dataset& data, const TrainConfig& config);

double mean_nll(const Model& model, const Head& head, const Dataset& data,
                std::span<const int> idx);

}  // namespace sdp
