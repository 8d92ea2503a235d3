#pragma once

#include "sed/tensor.hpp"

namespace sed {

enum class PadMode { SameSymmetric, Causal, None };

// a [m x k] * b [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

// Cross-correlation along the time axis.
//   signal [L x C_in], kernel [C_out x C_in/groups x k], bias [C_out] (may be null)
// SameSymmetric pads (k-1)*dilation/2 zeros per side (k must be odd) so L' = L;
// Causal pads (k-1)*dilation on the left; None yields L' = L - (k-1)*dilation.
Tensor conv1d(const Tensor& signal, const Tensor& kernel, const Tensor& bias,
              std::size_t dilation, PadMode padding, std::size_t groups = 1);

Tensor silu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor exp_op(const Tensor& x);

// Binary ops accept identical shapes, a row-broadcast [L x C] (+|*) [C],
// or a scalar second operand.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);

Tensor concat_channels(const std::vector<Tensor>& parts);
// Columns [c0, c1) of a [L x C] tensor.
Tensor slice_channels(const Tensor& x, std::size_t c0, std::size_t c1);

Tensor sum(const Tensor& x);

// Scalar helpers for the stable softplus used by op and scan code.
double softplus_scalar(double x);
double sigmoid_scalar(double x);

}  // namespace sed
