#include "sed/ssm.hpp"

#include <cmath>
#include <random>

#include "sed/ops.hpp"

namespace sed {

static double phi1(double z) {
  if (z == 0.0) return 1.0;
  return std::expm1(z) / z;
}

DiscreteLtiParams discretize(const LtiParams& p) {
  if (p.delta <= 0.0) throw ConfigError("discretize: timescale delta must be > 0");
  if (p.a.size() != p.b.size())
    throw ShapeError("discretize: A and B must have the same state size");
  DiscreteLtiParams d;
  d.a_bar.resize(p.a.size());
  d.b_bar.resize(p.a.size());
  for (std::size_t n = 0; n < p.a.size(); ++n) {
    const double z = p.delta * p.a[n];
    d.a_bar[n] = std::exp(z);
    d.b_bar[n] = p.delta * p.b[n] * phi1(z);
  }
  return d;
}

std::vector<double> lti_recurrence(const DiscreteLtiParams& d, const std::vector<double>& c,
                                   const std::vector<double>& x) {
  const std::size_t n_state = d.a_bar.size();
  if (c.size() != n_state) throw ShapeError("lti_recurrence: C size mismatch");
  std::vector<double> h(n_state, 0.0), y(x.size(), 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double out = 0.0;
    for (std::size_t n = 0; n < n_state; ++n) {
      h[n] = d.a_bar[n] * h[n] + d.b_bar[n] * x[t];
      out += c[n] * h[n];
    }
    y[t] = out;
  }
  return y;
}

std::vector<double> ssm_kernel(const DiscreteLtiParams& d, const std::vector<double>& c,
                               std::size_t length) {
  const std::size_t n_state = d.a_bar.size();
  if (c.size() != n_state) throw ShapeError("ssm_kernel: C size mismatch");
  std::vector<double> taps(length, 0.0);
  std::vector<double> pow_b = d.b_bar;  // a_bar^i * b_bar
  for (std::size_t i = 0; i < length; ++i) {
    double tap = 0.0;
    for (std::size_t n = 0; n < n_state; ++n) tap += c[n] * pow_b[n];
    taps[i] = tap;
    for (std::size_t n = 0; n < n_state; ++n) pow_b[n] *= d.a_bar[n];
  }
  return taps;
}

std::vector<double> causal_convolve(const std::vector<double>& x,
                                    const std::vector<double>& kernel) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    double acc = 0.0;
    const std::size_t imax = std::min(t + 1, kernel.size());
    for (std::size_t i = 0; i < imax; ++i) acc += kernel[i] * x[t - i];
    y[t] = acc;
  }
  return y;
}

static void scan_check_shapes(const Tensor& u, const Tensor& delta, const Tensor& a,
                              const Tensor& b, const Tensor& c, const Tensor& skip) {
  if (u->rank() != 2) throw ShapeError("selective_scan: u must be L x d");
  const std::size_t L = u->dim(0), d = u->dim(1);
  if (delta->shape != Shape{L, d}) throw ShapeError("selective_scan: delta shape mismatch");
  if (a->rank() != 2 || a->dim(0) != d) throw ShapeError("selective_scan: a must be d x N");
  const std::size_t n = a->dim(1);
  if (b->shape != Shape{L, n} || c->shape != Shape{L, n})
    throw ShapeError("selective_scan: b/c must be L x N");
  if (skip->shape != Shape{d}) throw ShapeError("selective_scan: skip must have d entries");
  for (double dv : delta->v)
    if (!(dv > 0.0)) throw ConfigError("selective_scan: delta must be strictly positive");
}

Tensor selective_scan_reference(const Tensor& u, const Tensor& delta, const Tensor& a,
                                const Tensor& b, const Tensor& c, const Tensor& skip) {
  scan_check_shapes(u, delta, a, b, c, skip);
  const std::size_t L = u->dim(0), d = u->dim(1), n = a->dim(1);
  const bool track = active_tape() &&
                     (u->requires_grad || delta->requires_grad || a->requires_grad ||
                      b->requires_grad || c->requires_grad || skip->requires_grad);

  Tensor out = make_tensor({L, d});
  // States kept for backward: states[t] holds h after step t, laid out [d x n].
  auto states = std::make_shared<std::vector<double>>();
  if (track) states->assign(L * d * n, 0.0);

  std::vector<double> h(d * n, 0.0);
  for (std::size_t t = 0; t < L; ++t) {
    const double* bt = &b->v[t * n];
    const double* ct = &c->v[t * n];
    for (std::size_t ch = 0; ch < d; ++ch) {
      const double dt = delta->v[t * d + ch];
      const double ut = u->v[t * d + ch];
      const double* ar = &a->v[ch * n];
      double* hc = &h[ch * n];
      double y = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        hc[j] = std::exp(dt * ar[j]) * hc[j] + dt * bt[j] * ut;
        y += ct[j] * hc[j];
      }
      out->v[t * d + ch] = y + skip->v[ch] * ut;
    }
    if (track) std::copy(h.begin(), h.end(), states->begin() + t * d * n);
  }
  check_finite(*out, "selective_scan");

  if (track) {
    out->requires_grad = true;
    active_tape()->record([u, delta, a, b, c, skip, out, states, L, d, n]() {
      u->ensure_grad();
      delta->ensure_grad();
      a->ensure_grad();
      b->ensure_grad();
      c->ensure_grad();
      skip->ensure_grad();
      std::vector<double> dh(d * n, 0.0);
      for (std::size_t t = L; t-- > 0;) {
        const double* ht = &(*states)[t * d * n];
        const double* hprev = t > 0 ? &(*states)[(t - 1) * d * n] : nullptr;
        const double* bt = &b->v[t * n];
        const double* ct = &c->v[t * n];
        for (std::size_t ch = 0; ch < d; ++ch) {
          const double go = out->g[t * d + ch];
          const double dt = delta->v[t * d + ch];
          const double ut = u->v[t * d + ch];
          const double* ar = &a->v[ch * n];
          const double* hc = &ht[ch * n];
          double* dhc = &dh[ch * n];
          // through y_t = <c_t, h_t> + skip*u_t
          if (go != 0.0) {
            skip->g[ch] += go * ut;
            u->g[t * d + ch] += go * skip->v[ch];
            for (std::size_t j = 0; j < n; ++j) {
              dhc[j] += go * ct[j];
              c->g[t * n + j] += go * hc[j];
            }
          }
          // through h_t = exp(dt*a) (*) h_{t-1} + dt*b_t*u_t
          double ddt = 0.0, du = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double abar = std::exp(dt * ar[j]);
            const double hp = hprev ? hprev[ch * n + j] : 0.0;
            const double dj = dhc[j];
            ddt += dj * (abar * ar[j] * hp + bt[j] * ut);
            du += dj * dt * bt[j];
            a->g[ch * n + j] += dj * dt * abar * hp;
            b->g[t * n + j] += dj * dt * ut;
            dhc[j] = dj * abar;  // becomes dh_{t-1}
          }
          delta->g[t * d + ch] += ddt;
          u->g[t * d + ch] += du;
        }
      }
    });
  }
  return out;
}

Tensor selective_scan_fast(const Tensor& u, const Tensor& delta, const Tensor& a,
                           const Tensor& b, const Tensor& c, const Tensor& skip,
                           std::size_t chunk) {
  scan_check_shapes(u, delta, a, b, c, skip);
  if (chunk == 0) throw ConfigError("selective_scan_fast: chunk must be >= 1");
  const std::size_t L = u->dim(0), d = u->dim(1), n = a->dim(1);
  const std::size_t n_chunks = (L + chunk - 1) / chunk;

  Tensor out = make_tensor({L, d});
  // Pass 1: per-chunk summaries (decay product, local terminal state from zero).
  std::vector<double> decay(n_chunks * d * n, 1.0);
  std::vector<double> local_end(n_chunks * d * n, 0.0);
  for (std::size_t cidx = 0; cidx < n_chunks; ++cidx) {
    const std::size_t t0 = cidx * chunk, t1 = std::min(L, t0 + chunk);
    double* dec = &decay[cidx * d * n];
    double* loc = &local_end[cidx * d * n];
    for (std::size_t t = t0; t < t1; ++t) {
      const double* bt = &b->v[t * n];
      for (std::size_t ch = 0; ch < d; ++ch) {
        const double dt = delta->v[t * d + ch];
        const double ut = u->v[t * d + ch];
        const double* ar = &a->v[ch * n];
        for (std::size_t j = 0; j < n; ++j) {
          const double abar = std::exp(dt * ar[j]);
          loc[ch * n + j] = abar * loc[ch * n + j] + dt * bt[j] * ut;
          dec[ch * n + j] *= abar;
        }
      }
    }
  }
  // Pass 2: carry states across chunk boundaries, in chunk order.
  std::vector<double> carry(n_chunks * d * n, 0.0);  // state entering each chunk
  for (std::size_t cidx = 1; cidx < n_chunks; ++cidx) {
    const double* dec = &decay[(cidx - 1) * d * n];
    const double* loc = &local_end[(cidx - 1) * d * n];
    const double* prev = &carry[(cidx - 1) * d * n];
    double* cur = &carry[cidx * d * n];
    for (std::size_t i = 0; i < d * n; ++i) cur[i] = dec[i] * prev[i] + loc[i];
  }
  // Pass 3: re-expand each chunk from its incoming state (independent per chunk).
  for (std::size_t cidx = 0; cidx < n_chunks; ++cidx) {
    const std::size_t t0 = cidx * chunk, t1 = std::min(L, t0 + chunk);
    std::vector<double> h(carry.begin() + cidx * d * n, carry.begin() + (cidx + 1) * d * n);
    for (std::size_t t = t0; t < t1; ++t) {
      const double* bt = &b->v[t * n];
      const double* ct = &c->v[t * n];
      for (std::size_t ch = 0; ch < d; ++ch) {
        const double dt = delta->v[t * d + ch];
        const double ut = u->v[t * d + ch];
        const double* ar = &a->v[ch * n];
        double* hc = &h[ch * n];
        double y = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          hc[j] = std::exp(dt * ar[j]) * hc[j] + dt * bt[j] * ut;
          y += ct[j] * hc[j];
        }
        out->v[t * d + ch] = y + skip->v[ch] * ut;
      }
    }
  }
  check_finite(*out, "selective_scan_fast");
  return out;
}

std::size_t dt_rank_for(std::size_t d_inner) { return (d_inner + 15) / 16; }

SelectiveInit init_s4d_real(std::size_t d_inner, std::size_t n_state, std::uint64_t seed) {
  SelectiveInit init;
  init.a_log = make_tensor({d_inner, n_state});
  for (std::size_t ch = 0; ch < d_inner; ++ch)
    for (std::size_t j = 0; j < n_state; ++j)
      init.a_log->v[ch * n_state + j] = std::log(static_cast<double>(j + 1));
  init.skip = make_tensor({d_inner}, 1.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(std::log(1e-3), std::log(1e-1));
  init.dt_bias.resize(d_inner);
  for (std::size_t ch = 0; ch < d_inner; ++ch) {
    const double dt = std::exp(uni(rng));
    init.dt_bias[ch] = std::log(std::expm1(dt));  // softplus inverse
  }
  return init;
}

}  // namespace sed
