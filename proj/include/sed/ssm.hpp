#pragma once

#include <cstdint>
#include <vector>

#include "sed/tensor.hpp"

namespace sed {

// Continuous-time diagonal SISO state space: h' = A h + B x, y = C h.
struct LtiParams {
  std::vector<double> a;  // diagonal of A
  std::vector<double> b;
  std::vector<double> c;
  double delta = 0.0;  // timescale, > 0
};

struct DiscreteLtiParams {
  std::vector<double> a_bar;
  std::vector<double> b_bar;
};

// Zero-order-hold discretization: a_bar = exp(delta*a),
// b_bar = delta * b * phi1(delta*a) with phi1(z) = (e^z - 1)/z, phi1(0) = 1.
DiscreteLtiParams discretize(const LtiParams& p);

// h_t = a_bar h_{t-1} + b_bar x_t; y_t = <c, h_t>, h_0 = 0.
std::vector<double> lti_recurrence(const DiscreteLtiParams& d, const std::vector<double>& c,
                                   const std::vector<double>& x);

// Kernel taps K[i] = <c, a_bar^i * b_bar>.
std::vector<double> ssm_kernel(const DiscreteLtiParams& d, const std::vector<double>& c,
                               std::size_t length);

// y_t = sum_{i<=t} K[i] * x_{t-i}; companion to ssm_kernel.
std::vector<double> causal_convolve(const std::vector<double>& x,
                                    const std::vector<double>& kernel);

// Data-dependent scan. Shapes: u, delta [L x d]; a [d x N] (entries < 0);
// b, c [L x N]; skip [d]. Per channel ch and step t:
//   abar = exp(delta[t,ch] * a[ch,:]), h = abar (*) h + delta[t,ch]*b[t,:]*u[t,ch]
//   y[t,ch] = <c[t,:], h> + skip[ch]*u[t,ch]
// Reference path is sequential and differentiable end-to-end.
Tensor selective_scan_reference(const Tensor& u, const Tensor& delta, const Tensor& a,
                                const Tensor& b, const Tensor& c, const Tensor& skip);

// Chunked two-pass evaluation of the same recurrence; forward only.
Tensor selective_scan_fast(const Tensor& u, const Tensor& delta, const Tensor& a,
                           const Tensor& b, const Tensor& c, const Tensor& skip,
                           std::size_t chunk = 64);

// S4D-real style initial values for the scan parameter family.
struct SelectiveInit {
  Tensor a_log;                 // [d x N], a = -exp(a_log), a_log[c][n] = ln(n+1)
  Tensor skip;                  // [d], ones
  std::vector<double> dt_bias;  // softplus(dt_bias) uniform in [1e-3, 1e-1] (log space)
};

SelectiveInit init_s4d_real(std::size_t d_inner, std::size_t n_state, std::uint64_t seed);

std::size_t dt_rank_for(std::size_t d_inner);  // ceil(d_inner / 16)

}  // namespace sed
