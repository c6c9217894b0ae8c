#include "sdp/heads.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace sdp {

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "mn") return HeadKind::MN;
  if (s == "gmm") return HeadKind::GMM;
  if (s == "lmm") return HeadKind::LMM;
  if (s == "udp") return HeadKind::UDP;
  if (s == "smn") return HeadKind::SMN;
  if (s == "sdp") return HeadKind::SDP;
  throw config_error("unknown head kind: " + s);
}

std::string to_string(HeadKind k) {
  switch (k) {
    case HeadKind::MN: return "mn";
    case HeadKind::GMM: return "gmm";
    case HeadKind::LMM: return "lmm";
    case HeadKind::UDP: return "udp";
    case HeadKind::SMN: return "smn";
    case HeadKind::SDP: return "sdp";
  }
  return "?";
}

int HeadSpec::param_count() const {
  const long n = shape.total();
  const int d = shape.ndim();
  switch (kind) {
    case HeadKind::MN:
    case HeadKind::SMN: return static_cast<int>(n);
    case HeadKind::UDP:
    case HeadKind::SDP: return static_cast<int>(n - 1);
    case HeadKind::GMM: return mixture * (1 + d + d * (d + 1) / 2);
    case HeadKind::LMM: return mixture * (1 + 2 * d);
  }
  return 0;
}

Head::Head(HeadSpec spec) : spec_(std::move(spec)) {
  if (spec_.shape.dims.empty()) throw std::invalid_argument("Head: shape required");
  if ((spec_.kind == HeadKind::GMM || spec_.kind == HeadKind::LMM) && spec_.mixture < 1)
    throw std::invalid_argument("Head: mixture size must be >= 1");
  if (spec_.smoothed() && spec_.smooth.lambda > 0) {
    if (spec_.smooth.radius < 1)
      throw std::invalid_argument(
          "Head: smoothing with radius 0 has an empty difference operator; "
          "use radius >= 1 or lambda = 0");
    if (spec_.smooth.order < 1)
      throw std::invalid_argument("Head: trend filtering order must be >= 1");
  }
  if (spec_.tree_based()) layout_ = std::make_shared<const DyadicLayout>(spec_.shape);

  const int d = spec_.shape.ndim();
  centers_.resize(d);
  if (!spec_.centers.empty()) {
    if (static_cast<int>(spec_.centers.size()) != d)
      throw std::invalid_argument("Head: centers must have one vector per dimension");
    for (int k = 0; k < d; ++k) {
      if (static_cast<int>(spec_.centers[k].size()) != spec_.shape.dims[k])
        throw std::invalid_argument("Head: centers length mismatch");
      centers_[k] = spec_.centers[k];
    }
  } else {
    for (int k = 0; k < d; ++k) {
      centers_[k].resize(spec_.shape.dims[k]);
      for (int j = 0; j < spec_.shape.dims[k]; ++j) centers_[k][j] = j;
    }
  }
}

namespace {

constexpr double kScaleFloor = 1e-3;

void check_params(const HeadSpec& spec, std::span<const double> params) {
  if (static_cast<int>(params.size()) != spec.param_count())
    throw std::invalid_argument("Head: parameter length mismatch");
}

void check_target(const HeadSpec& spec, long y) {
  if (y < 0 || y >= spec.shape.total())
    throw std::invalid_argument("Head: target out of bounds");
}

/*  GMM internals. Per component: weight logit, mean, lower-triangular
 *  Cholesky factor stored row-major; the covariance is L L^T. All bin
 *  evaluations stay in the log domain and the final mass renormalizes
 *  over the grid, so means far outside the grid are still well-defined.
 *  Views hold flat buffers only; the per-bin hot loops never allocate.  */
struct GmmView {
  int m, d, tri, per;
  std::span<const double> params;
  std::vector<double> log_pi;  // m
  std::vector<double> L;       // m*d*d materialized factors
  std::vector<double> logdet;  // m

  GmmView(const HeadSpec& spec, std::span<const double> p) : params(p) {
    m = spec.mixture;
    d = spec.shape.ndim();
    tri = d * (d + 1) / 2;
    per = 1 + d + tri;
    log_pi.resize(m);
    for (int i = 0; i < m; ++i) log_pi[i] = p[i * per];
    double z = logsumexp(log_pi);
    for (double& v : log_pi) v -= z;
    L.assign(static_cast<size_t>(m) * d * d, 0.0);
    logdet.assign(m, 0.0);
    for (int i = 0; i < m; ++i) {
      const double* raw = p.data() + i * per + 1 + d;
      int idx = 0;
      for (int a = 0; a < d; ++a)
        for (int b = 0; b <= a; ++b, ++idx) {
          double v = (a == b) ? softplus(raw[idx]) + kScaleFloor : raw[idx];
          L[(static_cast<size_t>(i) * d + a) * d + b] = v;
          if (a == b) logdet[i] += std::log(v);
        }
    }
  }

  const double* mu(int i) const { return params.data() + i * per + 1; }
  const double* chol_raw(int i) const { return params.data() + i * per + 1 + d; }
  double lat(int i, int a, int b) const { return L[(static_cast<size_t>(i) * d + a) * d + b]; }

  // log N(c; mu_i, L_i L_i^T); u = L^-1 (c-mu) always filled, g = L^-T u on request
  double log_density(int i, const double* c, double* u, double* g) const {
    const double* mui = mu(i);
    double quad = 0.0;
    for (int a = 0; a < d; ++a) {
      double s = c[a] - mui[a];
      for (int b = 0; b < a; ++b) s -= lat(i, a, b) * u[b];
      u[a] = s / lat(i, a, a);
      quad += u[a] * u[a];
    }
    if (g) {
      for (int a = d - 1; a >= 0; --a) {
        double s = u[a];
        for (int b = a + 1; b < d; ++b) s -= lat(i, b, a) * g[b];
        g[a] = s / lat(i, a, a);
      }
    }
    return -0.5 * d * std::log(2.0 * M_PI) - logdet[i] - 0.5 * quad;
  }

  // log f_j = lse_i(log pi_i + log phi_ij) for every bin; logcomp (total*m,
  // optional) keeps the per-component terms for the gradient pass
  void log_bin_masses(const GridShape& shape,
                      const std::vector<std::vector<double>>& centers, std::vector<double>& logf,
                      std::vector<double>* logcomp) const {
    const long n = shape.total();
    logf.resize(n);
    if (logcomp) logcomp->resize(n * m);
    std::vector<double> c(d), u(d), lc(m);
    for (long j = 0; j < n; ++j) {
      for (int k = 0; k < d; ++k) c[k] = centers[k][shape.coord_along(j, k)];
      for (int i = 0; i < m; ++i) lc[i] = log_pi[i] + log_density(i, c.data(), u.data(), nullptr);
      if (logcomp) std::copy(lc.begin(), lc.end(), logcomp->begin() + j * m);
      logf[j] = logsumexp(lc);
    }
  }
};

/*  LMM internals: per-dimension discretized logistic masses.
 *  Interior bin t gets sigma((t+.5-mu)/s) - sigma((t-.5-mu)/s); the first
 *  and last bins absorb the tails, so each dimension's masses sum to one
 *  exactly. Always evaluated in bin-index units.  */
double logistic_log_mass(double mu, double s, int t, int n) {
  if (n == 1) return 0.0;
  double a = (t + 0.5 - mu) / s;
  double b = (t - 0.5 - mu) / s;
  if (t == 0) return log_sigmoid(a);
  if (t == n - 1) return log_sigmoid(-b);
  return log_sigmoid_diff(a, b);
}

// d log_mass / d mu and / d raw, with s = softplus(raw) + floor
void logistic_grad(double mu, double s, double raw, int t, int n, double& dmu, double& draw) {
  if (n == 1) {
    dmu = draw = 0.0;
    return;
  }
  double a = (t + 0.5 - mu) / s;
  double b = (t - 0.5 - mu) / s;
  double dl_dmu, dl_ds;
  if (t == 0) {
    double sm = sigmoid(-a);
    dl_dmu = -sm / s;
    dl_ds = -a * sm / s;
  } else if (t == n - 1) {
    double sp = sigmoid(b);
    dl_dmu = sp / s;
    dl_ds = b * sp / s;
  } else {
    double logm = log_sigmoid_diff(a, b);
    double ra = std::exp(log_sigmoid(a) + log_sigmoid(-a) - logm);  // sigma'(a)/mass
    double rb = std::exp(log_sigmoid(b) + log_sigmoid(-b) - logm);
    dl_dmu = (rb - ra) / s;
    dl_ds = (b * rb - a * ra) / s;
  }
  dmu = dl_dmu;
  draw = dl_ds * sigmoid(raw);  // chain softplus
}

struct LmmView {
  int m, d, per;
  std::vector<double> log_pi, pi;
  std::vector<double> mu, s, raw;  // m*d each, [i*d + k]

  LmmView(const HeadSpec& spec, std::span<const double> params) {
    m = spec.mixture;
    d = spec.shape.ndim();
    per = 1 + 2 * d;
    log_pi.resize(m);
    pi.resize(m);
    mu.resize(static_cast<size_t>(m) * d);
    s.resize(static_cast<size_t>(m) * d);
    raw.resize(static_cast<size_t>(m) * d);
    for (int i = 0; i < m; ++i) {
      const double* p = params.data() + i * per;
      log_pi[i] = p[0];
      for (int k = 0; k < d; ++k) {
        mu[i * d + k] = p[1 + k];
        raw[i * d + k] = p[1 + d + k];
        s[i * d + k] = softplus(p[1 + d + k]) + kScaleFloor;
      }
    }
    double z = logsumexp(log_pi);
    for (int i = 0; i < m; ++i) {
      log_pi[i] -= z;
      pi[i] = std::exp(log_pi[i]);
    }
  }

  double comp_log_mass(int i, const GridShape& shape, long y_flat) const {
    double total = 0.0;
    for (int k = 0; k < d; ++k)
      total += logistic_log_mass(mu[i * d + k], s[i * d + k], shape.coord_along(y_flat, k),
                                 shape.dims[k]);
    return total;
  }
};

}  // namespace

double Head::log_prob(std::span<const double> params, const GridCoord& y) const {
  if (!spec_.shape.contains(y)) throw std::invalid_argument("Head: target out of bounds");
  return log_prob(params, spec_.shape.flatten(y));
}

double Head::log_prob(std::span<const double> params, long y_flat) const {
  check_params(spec_, params);
  check_target(spec_, y_flat);
  return logprob_impl(params, y_flat, 0.0, nullptr);
}

// one pass computes log p(y) and, when grad is given, accumulates
// weight * d log p(y) / d params
double Head::logprob_impl(std::span<const double> params, long y_flat, double weight,
                          std::span<double>* grad) const {
  const GridShape& shape = spec_.shape;
  switch (spec_.kind) {
    case HeadKind::MN:
    case HeadKind::SMN: {
      double z = logsumexp(params);
      if (grad) {
        for (size_t j = 0; j < params.size(); ++j)
          (*grad)[j] -= weight * std::exp(params[j] - z);
        (*grad)[y_flat] += weight;
      }
      return params[y_flat] - z;
    }
    case HeadKind::UDP:
    case HeadKind::SDP: {
      if (!grad) return sdp::log_prob(*layout_, params, y_flat);
      return sdp::log_prob_grad(*layout_, params, y_flat, weight, *grad);
    }
    case HeadKind::GMM: {
      GmmView v(spec_, params);
      const long n = shape.total();
      std::vector<double> logf, logcomp;
      v.log_bin_masses(shape, centers_, logf, grad ? &logcomp : nullptr);
      double z = logsumexp(logf);
      if (!grad) return logf[y_flat] - z;

      //  d log mass_y = d log f_y - sum_j q_j d log f_j
      std::vector<double> coeff(n);  // weight on d log f_j
      for (long j = 0; j < n; ++j) coeff[j] = -std::exp(logf[j] - z);
      coeff[y_flat] += 1.0;

      std::vector<double> c(v.d), u(v.d), g(v.d);
      std::vector<double> resp_sum(v.m, 0.0);  // sum_j coeff_j * r_ij
      for (long j = 0; j < n; ++j) {
        if (coeff[j] == 0.0) continue;
        for (int k = 0; k < v.d; ++k) c[k] = centers_[k][shape.coord_along(j, k)];
        for (int i = 0; i < v.m; ++i) {
          double r = std::exp(logcomp[j * v.m + i] - logf[j]);
          double cw = coeff[j] * r;
          if (cw == 0.0) continue;
          resp_sum[i] += cw;
          v.log_density(i, c.data(), u.data(), g.data());
          double* gp = grad->data() + i * v.per;
          for (int a = 0; a < v.d; ++a) gp[1 + a] += weight * cw * g[a];
          int idx = 0;
          for (int a = 0; a < v.d; ++a)
            for (int b = 0; b <= a; ++b, ++idx) {
              double dL = g[a] * u[b] - (a == b ? 1.0 / v.lat(i, a, a) : 0.0);
              if (a == b) dL *= sigmoid(v.chol_raw(i)[idx]);  // chain softplus
              gp[1 + v.d + idx] += weight * cw * dL;
            }
        }
      }
      // weight logits: sum_j coeff_j (r_ij - pi_i); sum_j coeff_j = 0 kills the pi term
      for (int i = 0; i < v.m; ++i) (*grad)[i * v.per] += weight * resp_sum[i];
      return logf[y_flat] - z;
    }
    case HeadKind::LMM: {
      LmmView v(spec_, params);
      std::vector<double> lc(v.m);
      for (int i = 0; i < v.m; ++i) lc[i] = v.log_pi[i] + v.comp_log_mass(i, shape, y_flat);
      double lp = logsumexp(lc);
      if (!grad) return lp;
      for (int i = 0; i < v.m; ++i) {
        double r = std::exp(lc[i] - lp);
        double* gp = grad->data() + i * v.per;
        gp[0] += weight * (r - v.pi[i]);
        for (int k = 0; k < v.d; ++k) {
          double dmu, draw;
          logistic_grad(v.mu[i * v.d + k], v.s[i * v.d + k], v.raw[i * v.d + k],
                        shape.coord_along(y_flat, k), shape.dims[k], dmu, draw);
          gp[1 + k] += weight * r * dmu;
          gp[1 + v.d + k] += weight * r * draw;
        }
      }
      return lp;
    }
  }
  return 0.0;
}

DiscreteDistribution Head::full(std::span<const double> params) const {
  check_params(spec_, params);
  const GridShape& shape = spec_.shape;
  DiscreteDistribution out;
  out.shape = shape;
  const long n = shape.total();
  switch (spec_.kind) {
    case HeadKind::MN:
    case HeadKind::SMN: {
      double z = logsumexp(params);
      out.mass.resize(n);
      for (long j = 0; j < n; ++j) out.mass[j] = std::exp(params[j] - z);
      return out;
    }
    case HeadKind::UDP:
    case HeadKind::SDP:
      return decode_full(*layout_, params);
    case HeadKind::GMM: {
      GmmView v(spec_, params);
      std::vector<double> logf;
      v.log_bin_masses(shape, centers_, logf, nullptr);
      double z = logsumexp(logf);
      out.mass.resize(n);
      for (long j = 0; j < n; ++j) out.mass[j] = std::exp(logf[j] - z);
      return out;
    }
    case HeadKind::LMM: {
      LmmView v(spec_, params);
      // per-dim mass tables, then product over dims per component
      std::vector<int> off(v.d + 1, 0);
      for (int k = 0; k < v.d; ++k) off[k + 1] = off[k] + shape.dims[k];
      std::vector<double> table(static_cast<size_t>(v.m) * off[v.d]);
      for (int i = 0; i < v.m; ++i)
        for (int k = 0; k < v.d; ++k)
          for (int t = 0; t < shape.dims[k]; ++t)
            table[i * off[v.d] + off[k] + t] =
                std::exp(logistic_log_mass(v.mu[i * v.d + k], v.s[i * v.d + k], t, shape.dims[k]));
      out.mass.assign(n, 0.0);
      for (long j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < v.m; ++i) {
          double prod = v.pi[i];
          for (int k = 0; k < v.d; ++k)
            prod *= table[i * off[v.d] + off[k] + shape.coord_along(j, k)];
          s += prod;
        }
        out.mass[j] = s;
      }
      return out;
    }
  }
  return out;
}

void Head::grad_log_prob(std::span<const double> params, long y_flat, double weight,
                         std::span<double> grad) const {
  check_params(spec_, params);
  check_target(spec_, y_flat);
  if (grad.size() != params.size())
    throw std::invalid_argument("Head::grad_log_prob: gradient length mismatch");
  logprob_impl(params, y_flat, weight, &grad);
}

double Head::penalty_impl(std::span<const double> params, long y_flat, double weight,
                          std::span<double>* grad) const {
  const Smoothing& sm = spec_.smooth;
  if (!spec_.smoothed() || sm.lambda <= 0) return 0.0;
  const GridShape& shape = spec_.shape;
  NeighborhoodWindow window = neighborhood(shape, shape.unflatten(y_flat), sm.radius);
  auto op = ops_.get(window.window_shape.dims, sm.order);

  if (spec_.kind == HeadKind::SMN) {
    // penalty on the raw logits restricted to the window
    const long wn = window.leaf_count();
    std::vector<double> z(wn);
    std::vector<long> flat(wn);
    for (long j = 0; j < wn; ++j) {
      flat[j] = shape.flatten(window.leaf(j));
      z[j] = params[flat[j]];
    }
    if (!grad) return sm.lambda * op->penalty(z);
    std::vector<double> sub(wn, 0.0);
    double pen = op->accumulate_subgrad(z, 1.0, sub);
    for (long j = 0; j < wn; ++j) (*grad)[flat[j]] += weight * sm.lambda * sub[j];
    return sm.lambda * pen;
  }

  // SDP: penalty on the window's leaf log-masses; gradient flows through
  // every leaf's (shared) path back to the node logits
  std::vector<double> z = gather_window_logprobs(*layout_, params, window);
  if (!grad) return sm.lambda * op->penalty(z);
  std::vector<double> sub(z.size(), 0.0);
  double pen = op->accumulate_subgrad(z, 1.0, sub);
  accumulate_window_grad(*layout_, params, window, sub, weight * sm.lambda, *grad);
  return sm.lambda * pen;
}

double Head::penalty(std::span<const double> params, long y_flat) const {
  check_params(spec_, params);
  check_target(spec_, y_flat);
  return penalty_impl(params, y_flat, 0.0, nullptr);
}

double Head::train_loss_grad(std::span<const double> params, long y_flat, double weight,
                             std::span<double> grad, double* penalty_out) const {
  check_params(spec_, params);
  check_target(spec_, y_flat);
  if (grad.size() != params.size())
    throw std::invalid_argument("Head::train_loss_grad: gradient length mismatch");
  double loss = -logprob_impl(params, y_flat, -weight, &grad);
  double pen = 0.0;
  if (spec_.smoothed() && spec_.smooth.lambda > 0)
    pen = penalty_impl(params, y_flat, weight, &grad);
  if (penalty_out) *penalty_out = pen;
  return loss + pen;
}

long sample_index(std::span<const double> mass, Rng& rng) {
  double total = 0.0;
  for (double m : mass) total += m;
  double u = rng.uniform() * total;
  double acc = 0.0;
  for (size_t j = 0; j < mass.size(); ++j) {
    acc += mass[j];
    if (u < acc) return static_cast<long>(j);
  }
  return static_cast<long>(mass.size()) - 1;
}

long Head::sample(std::span<const double> params, Rng& rng) const {
  DiscreteDistribution dist = full(params);
  return sample_index(dist.mass, rng);
}

void Head::init_params(std::span<double> params, Rng& rng) const {
  check_params(spec_, params);
  const int d = spec_.shape.ndim();
  const int m = spec_.mixture;
  switch (spec_.kind) {
    case HeadKind::MN:
    case HeadKind::SMN:
    case HeadKind::UDP:
    case HeadKind::SDP:
      std::fill(params.begin(), params.end(), 0.0);
      return;
    case HeadKind::GMM: {
      int tri = d * (d + 1) / 2;
      int per = 1 + d + tri;
      for (int i = 0; i < m; ++i) {
        double* p = params.data() + i * per;
        p[0] = 0.0;
        for (int k = 0; k < d; ++k) {
          double lo = centers_[k].front(), hi = centers_[k].back();
          double range = std::max(hi - lo, 1.0);
          p[1 + k] = lo + (i + 0.5) / m * (hi - lo) + 0.01 * range * rng.normal();
        }
        int idx = 0;
        for (int a = 0; a < d; ++a)
          for (int b = 0; b <= a; ++b, ++idx) {
            if (a == b) {
              double lo = centers_[a].front(), hi = centers_[a].back();
              double scale = std::max((hi - lo) / (2.0 * m), 1e-2);
              p[1 + d + idx] = inv_softplus(scale);
            } else {
              p[1 + d + idx] = 0.0;
            }
          }
      }
      return;
    }
    case HeadKind::LMM: {
      int per = 1 + 2 * d;
      for (int i = 0; i < m; ++i) {
        double* p = params.data() + i * per;
        p[0] = 0.0;
        for (int k = 0; k < d; ++k) {
          double n = spec_.shape.dims[k];
          p[1 + k] = (i + 0.5) / m * (n - 1) + 0.01 * std::max(n - 1, 1.0) * rng.normal();
          p[1 + d + k] = inv_softplus(std::max(n / (2.0 * m), 0.5));
        }
      }
      return;
    }
  }
}

}  // namespace sdp
