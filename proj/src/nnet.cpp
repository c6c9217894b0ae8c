#include "sdp/nnet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace sdp {

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  if (spec_.sizes.size() < 2) throw config_error("Mlp: need at least input and output sizes");
  for (int s : spec_.sizes)
    if (s < 1) throw config_error("Mlp: layer sizes must be positive");
  if (spec_.dropout_keep <= 0.0 || spec_.dropout_keep > 1.0)
    throw config_error("Mlp: dropout keep-probability must be in (0, 1]");
  long off = 0;
  for (size_t l = 0; l + 1 < spec_.sizes.size(); ++l) {
    w_off_.push_back(off);
    off += static_cast<long>(spec_.sizes[l + 1]) * spec_.sizes[l];
    b_off_.push_back(off);
    off += spec_.sizes[l + 1];
  }
  params_.assign(off, 0.0);
}

void Mlp::init(Rng& rng) {
  for (size_t l = 0; l + 1 < spec_.sizes.size(); ++l) {
    int fan_in = spec_.sizes[l];
    int fan_out = spec_.sizes[l + 1];
    double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    double* w = params_.data() + w_off_[l];
    for (long i = 0; i < static_cast<long>(fan_out) * fan_in; ++i) w[i] = rng.uniform(-s, s);
    double* b = params_.data() + b_off_[l];
    std::fill(b, b + fan_out, 0.0);
  }
}

std::span<const double> Mlp::forward(std::span<const double> x, bool train, Rng* rng,
                                     Workspace& ws) const {
  const auto& sizes = spec_.sizes;
  const size_t layers = sizes.size() - 1;
  if (static_cast<int>(x.size()) != sizes.front())
    throw std::invalid_argument("Mlp::forward: input width mismatch");

  ws.act.resize(layers + 1);
  ws.mask.resize(layers);  // mask[l] used for hidden layer l output
  ws.act[0].assign(x.begin(), x.end());

  for (size_t l = 0; l < layers; ++l) {
    int in = sizes[l], out = sizes[l + 1];
    const double* w = params_.data() + w_off_[l];
    const double* b = params_.data() + b_off_[l];
    const std::vector<double>& prev = ws.act[l];
    std::vector<double>& cur = ws.act[l + 1];
    cur.assign(out, 0.0);
    for (int i = 0; i < out; ++i) {
      double s = b[i];
      const double* wr = w + static_cast<long>(i) * in;
      for (int j = 0; j < in; ++j) s += wr[j] * prev[j];
      cur[i] = s;
    }
    if (l + 1 < layers) {  // hidden: rectifier + inverted dropout
      for (int i = 0; i < out; ++i) cur[i] = std::max(cur[i], 0.0);
      std::vector<double>& mask = ws.mask[l];
      if (train && spec_.dropout_keep < 1.0) {
        if (!rng) throw std::invalid_argument("Mlp::forward: dropout needs an rng in train mode");
        mask.resize(out);
        for (int i = 0; i < out; ++i)
          mask[i] = rng->uniform() < spec_.dropout_keep ? 1.0 / spec_.dropout_keep : 0.0;
        for (int i = 0; i < out; ++i) cur[i] *= mask[i];
      } else {
        mask.clear();
      }
    }
  }
  return ws.act[layers];
}

void Mlp::backward(const Workspace& ws, std::span<const double> dout,
                   std::span<double> grad) const {
  const auto& sizes = spec_.sizes;
  const size_t layers = sizes.size() - 1;
  if (static_cast<int>(dout.size()) != sizes.back())
    throw std::invalid_argument("Mlp::backward: upstream width mismatch");
  if (grad.size() != params_.size())
    throw std::invalid_argument("Mlp::backward: gradient length mismatch");

  std::vector<double> delta(dout.begin(), dout.end());
  for (size_t li = layers; li-- > 0;) {
    int in = sizes[li], out = sizes[li + 1];
    if (li + 1 < layers) {  // through dropout + rectifier of hidden layer li
      const std::vector<double>& a = ws.act[li + 1];
      const std::vector<double>& mask = ws.mask[li];
      for (int i = 0; i < out; ++i) {
        double deriv = a[i] > 0.0 ? 1.0 : 0.0;
        if (!mask.empty()) deriv *= mask[i];
        delta[i] *= deriv;
      }
    }
    const std::vector<double>& prev = ws.act[li];
    double* gw = grad.data() + w_off_[li];
    double* gb = grad.data() + b_off_[li];
    for (int i = 0; i < out; ++i) {
      double di = delta[i];
      if (di != 0.0) {
        double* gr = gw + static_cast<long>(i) * in;
        for (int j = 0; j < in; ++j) gr[j] += di * prev[j];
      }
      gb[i] += di;
    }
    if (li > 0) {
      const double* w = params_.data() + w_off_[li];
      std::vector<double> next(in, 0.0);
      for (int i = 0; i < out; ++i) {
        double di = delta[i];
        if (di == 0.0) continue;
        const double* wr = w + static_cast<long>(i) * in;
        for (int j = 0; j < in; ++j) next[j] += wr[j] * di;
      }
      delta = std::move(next);
    }
  }
}

void Mlp::add_weight_decay(std::span<double> grad) const {
  if (spec_.weight_decay <= 0.0) return;
  for (size_t l = 0; l + 1 < spec_.sizes.size(); ++l) {
    long n = static_cast<long>(spec_.sizes[l + 1]) * spec_.sizes[l];
    for (long i = 0; i < n; ++i)
      grad[w_off_[l] + i] += spec_.weight_decay * params_[w_off_[l] + i];
  }
}

Model Model::make_marginal(const HeadSpec& head) {
  Model m;
  m.marginal_ = true;
  m.head_params_.assign(head.param_count(), 0.0);
  return m;
}

Model Model::make_mlp(const MlpSpec& spec) {
  Model m;
  m.marginal_ = false;
  m.mlp_ = Mlp(spec);
  return m;
}

void Model::init(const Head& head, Rng& rng) {
  if (marginal_) {
    head_params_.assign(head.param_count(), 0.0);
    head.init_params(head_params_, rng);
  } else {
    if (mlp_.output_size() != head.param_count())
      throw config_error("Model: network output width must equal the head parameter count");
    mlp_.init(rng);
  }
}

std::span<const double> Model::head_params(std::span<const double> x, bool train, Rng* rng,
                                           Mlp::Workspace& ws) const {
  if (marginal_) return head_params_;
  return mlp_.forward(x, train, rng, ws);
}

void Model::backward(const Mlp::Workspace& ws, std::span<const double> dhead,
                     std::span<double> grad) const {
  if (marginal_) {
    for (size_t i = 0; i < dhead.size(); ++i) grad[i] += dhead[i];
    return;
  }
  mlp_.backward(ws, dhead, grad);
}

void Model::add_weight_decay(std::span<double> grad) const {
  if (!marginal_) mlp_.add_weight_decay(grad);
}

void AdamState::step(std::span<double> params, std::span<const double> grad, double lr,
                     double beta1, double beta2, double eps) {
  ++t;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

void TrainLog::write_csv(std::ostream& os) const {
  os << "step,epoch,lr,train_nll,val_nll,penalty,seconds\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%ld,%ld,%.17g,%.17g,%.17g,%.17g,%.3f\n", r.step, r.epoch,
                  r.lr, r.train_nll, r.val_nll, r.penalty, r.seconds);
    os << buf;
  }
}

double mean_nll(const Model& model, const Head& head, const Dataset& data,
                std::span<const int> idx) {
  Mlp::Workspace ws;
  double total = 0.0;
  for (int i : idx) {
    auto hp = model.head_params(data.X.cols > 0 ? data.X.row(i) : std::span<const double>{},
                                false, nullptr, ws);
    total -= head.log_prob(hp, data.y[i]);
  }
  return total / static_cast<double>(idx.size());
}

namespace {

void validate_config(const TrainConfig& c) {
  if (c.batch < 0) throw config_error("TrainConfig: batch must be >= 0");
  if (c.max_epochs < 1) throw config_error("TrainConfig: max_epochs must be >= 1");
  if (c.lr <= 0) throw config_error("TrainConfig: lr must be positive");
  if (c.val_every < 1) throw config_error("TrainConfig: val_every must be >= 1");
  if (c.lr_patience > 0 && !(c.lr_decay > 0.0 && c.lr_decay < 1.0))
    throw config_error("TrainConfig: decay factor must be in (0, 1)");
}

// per-target weights for full-batch aggregation: identical loss, one
// gradient term per distinct target value
std::vector<std::pair<long, double>> target_histogram(const Dataset& data,
                                                      std::span<const int> idx) {
  std::vector<double> counts(data.shape.total(), 0.0);
  for (int i : idx) counts[data.y[i]] += 1.0;
  std::vector<std::pair<long, double>> hist;
  for (long y = 0; y < static_cast<long>(counts.size()); ++y)
    if (counts[y] > 0) hist.push_back({y, counts[y] / static_cast<double>(idx.size())});
  return hist;
}

}  // namespace

TrainLog fit(Model& model, const Head& head, const Dataset& data,
             std::span<const int> train_idx, std::span<const int> val_idx,
             const TrainConfig& config) {
  validate_config(config);
  if (train_idx.empty() || val_idx.empty())
    throw config_error("fit: train and validation splits must be non-empty");
  if (config.batch == 0 && !model.marginal())
    throw config_error("fit: full-batch aggregation requires marginal mode");

  Rng init_rng(seed_mix({config.seed, 0xA11CE}));
  Rng shuffle_rng(seed_mix({config.seed, 0x5281FF}));
  Rng dropout_rng(seed_mix({config.seed, 0xD20900}));

  model.init(head, init_rng);
  std::vector<double>& params = model.params();
  std::vector<double> grad(params.size(), 0.0);
  std::vector<double> dhead(head.param_count(), 0.0);
  AdamState adam;
  adam.init(params.size());

  TrainLog log;
  std::vector<double> best_params = params;
  double lr = config.lr;
  long step = 0;
  double run_loss = 0.0, run_pen = 0.0;
  long run_count = 0;
  auto started = std::chrono::steady_clock::now();

  auto validate = [&](long epoch) {
    double val = mean_nll(model, head, data, val_idx);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    TrainLogRow row;
    row.step = step;
    row.epoch = epoch;
    row.lr = lr;
    row.train_nll = run_count > 0 ? run_loss / run_count : 0.0;
    row.val_nll = val;
    row.penalty = run_count > 0 ? run_pen / run_count : 0.0;
    row.seconds = secs;
    log.rows.push_back(row);
    run_loss = run_pen = 0.0;
    run_count = 0;
    if (val < log.best_val_nll) {
      log.best_val_nll = val;
      log.best_step = step;
      best_params = params;
    }
  };

  bool done = false;
  int stall = 0;
  long last_val_step = -1;

  if (config.batch == 0) {
    // Full-batch gradient aggregated by distinct target: one step is one
    // exact pass over the training data, so epoch == step. Validation also
    // reduces to a histogram average, and the plateau schedule counts
    // validation events instead of epochs.
    auto hist = target_histogram(data, train_idx);
    auto val_hist = target_histogram(data, val_idx);
    auto fast_val = [&] {
      double total = 0.0;
      for (auto [y, w] : val_hist) total -= w * head.log_prob(params, y);
      return total;
    };
    long cap = config.max_steps > 0 ? std::min<long>(config.max_steps, config.max_epochs)
                                    : config.max_epochs;
    for (long epoch = 0; epoch < cap && !done; ++epoch) {
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0, pen = 0.0;
      for (auto [y, w] : hist) {
        double p = 0.0;
        loss += w * head.train_loss_grad(params, y, w, grad, &p);
        pen += w * p;
      }
      adam.step(params, grad, lr, config.beta1, config.beta2, config.eps);
      ++step;
      run_loss += loss;
      run_pen += pen;
      ++run_count;
      if (step % config.val_every == 0 || epoch + 1 == cap) {
        double before = log.best_val_nll;
        double val = fast_val();
        double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        log.rows.push_back(TrainLogRow{step, epoch, lr, run_loss / run_count, val,
                                       run_pen / run_count, secs});
        run_loss = run_pen = 0.0;
        run_count = 0;
        if (val < log.best_val_nll) {
          log.best_val_nll = val;
          log.best_step = step;
          best_params = params;
        }
        last_val_step = step;
        if (config.lr_patience > 0) {
          stall = (log.best_val_nll < before) ? 0 : stall + 1;
          if (stall >= config.lr_patience) {
            lr *= config.lr_decay;
            stall = 0;
            if (lr < config.lr_min) done = true;
          }
        }
      }
    }
  } else {
    std::vector<int> order(train_idx.begin(), train_idx.end());
    Mlp::Workspace ws;
    for (long epoch = 0; epoch < config.max_epochs && !done; ++epoch) {
      shuffle_rng.shuffle(order);
      double best_before_epoch = log.best_val_nll;
      for (size_t start = 0; start < order.size() && !done; start += config.batch) {
        size_t stop = std::min(order.size(), start + config.batch);
        double w = 1.0 / static_cast<double>(stop - start);
        std::fill(grad.begin(), grad.end(), 0.0);
        for (size_t b = start; b < stop; ++b) {
          int i = order[b];
          double loss, pen = 0.0;
          if (model.marginal()) {
            loss = head.train_loss_grad(params, data.y[i], w, grad, &pen);
          } else {
            auto hp = model.head_params(data.X.row(i), true, &dropout_rng, ws);
            std::fill(dhead.begin(), dhead.end(), 0.0);
            loss = head.train_loss_grad(hp, data.y[i], w, dhead, &pen);
            model.backward(ws, dhead, grad);
          }
          run_loss += loss;
          run_pen += pen;
          ++run_count;
        }
        model.add_weight_decay(grad);
        adam.step(params, grad, lr, config.beta1, config.beta2, config.eps);
        ++step;
        if (step % config.val_every == 0) {
          validate(epoch);
          last_val_step = step;
        }
        if (config.max_steps > 0 && step >= config.max_steps) done = true;
      }
      if (step != last_val_step) {
        validate(epoch);
        last_val_step = step;
      }
      if (config.lr_patience > 0) {
        stall = (log.best_val_nll < best_before_epoch) ? 0 : stall + 1;
        if (stall >= config.lr_patience) {
          lr *= config.lr_decay;
          stall = 0;
          if (lr < config.lr_min) done = true;
        }
      }
    }
  }

  if (step != last_val_step) validate(-1);
  params = best_params;
  log.steps = step;
  return log;
}

TrainLog fit(Model& model, const Head& head, const Dataset& data, const TrainConfig& config) {
  if (!(config.val_fraction > 0.0 && config.val_fraction < 1.0))
    throw config_error("fit: validation fraction must be in (0, 1)");
  const long n = data.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(seed_mix({config.seed, 0x5B117}));
  split_rng.shuffle(order);
  long n_val = std::max<long>(1, std::lround(config.val_fraction * static_cast<double>(n)));
  if (n_val >= n) throw config_error("fit: dataset too small to split");
  std::vector<int> val(order.begin(), order.begin() + n_val);
  std::vector<int> train(order.begin() + n_val, order.end());
  return fit(model, head, data, train, val, config);
}

}  // namespace sdp
