#include "sed/ops.hpp"

#include <cmath>
#include <initializer_list>

namespace sed {

double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double softplus_scalar(double x) {
  // ln(1+e^x) without overflow for large |x|
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

static bool should_track(std::initializer_list<const Tensor*> inputs) {
  if (!active_tape()) return false;
  for (const Tensor* t : inputs)
    if (*t && (*t)->requires_grad) return true;
  return false;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a->rank() != 2 || b->rank() != 2 || a->dim(1) != b->dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a->shape) + " and " +
                     shape_str(b->shape));
  const std::size_t m = a->dim(0), k = a->dim(1), n = b->dim(1);
  Tensor out = make_tensor({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a->v[i * k + p];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out->v[i * n + j] += av * b->v[p * n + j];
    }
  }
  check_finite(*out, "matmul");
  if (should_track({&a, &b})) {
    out->requires_grad = true;
    active_tape()->record([a, b, out, m, k, n]() {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += out->g[i * n + j] * b->v[p * n + j];
            a->g[i * k + p] += acc;
          }
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t p = 0; p < k; ++p)
          for (std::size_t i = 0; i < m; ++i) {
            const double av = a->v[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) b->g[p * n + j] += av * out->g[i * n + j];
          }
      }
    });
  }
  return out;
}

Tensor conv1d(const Tensor& signal, const Tensor& kernel, const Tensor& bias,
              std::size_t dilation, PadMode padding, std::size_t groups) {
  if (signal->rank() != 2 || kernel->rank() != 3)
    throw ShapeError("conv1d: signal must be LxC, kernel CoutxCinxK");
  if (dilation < 1) throw ConfigError("conv1d: dilation must be >= 1");
  const std::size_t L = signal->dim(0), c_in = signal->dim(1);
  const std::size_t c_out = kernel->dim(0), c_in_g = kernel->dim(1), k = kernel->dim(2);
  if (groups == 0 || c_in % groups != 0 || c_out % groups != 0 || c_in / groups != c_in_g)
    throw ShapeError("conv1d: group/channel mismatch");
  if (bias && (bias->rank() != 1 || bias->dim(0) != c_out))
    throw ShapeError("conv1d: bias must have C_out entries");
  if (padding == PadMode::SameSymmetric && k % 2 == 0)
    throw ConfigError("conv1d: same-symmetric padding requires odd kernel size");

  const std::size_t span = (k - 1) * dilation;
  std::ptrdiff_t pad_left = 0;
  std::size_t l_out = L;
  switch (padding) {
    case PadMode::SameSymmetric:
      pad_left = static_cast<std::ptrdiff_t>(span / 2);
      break;
    case PadMode::Causal:
      pad_left = static_cast<std::ptrdiff_t>(span);
      break;
    case PadMode::None:
      if (L <= span) throw ShapeError("conv1d: sequence shorter than kernel span");
      l_out = L - span;
      break;
  }

  Tensor out = make_tensor({l_out, c_out});
  const std::size_t co_per_g = c_out / groups;
  for (std::size_t t = 0; t < l_out; ++t) {
    for (std::size_t co = 0; co < c_out; ++co) {
      const std::size_t g = co / co_per_g;
      double acc = bias ? bias->v[co] : 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t ts =
            static_cast<std::ptrdiff_t>(t + j * dilation) - pad_left;
        if (ts < 0 || ts >= static_cast<std::ptrdiff_t>(L)) continue;
        const double* xrow = &signal->v[static_cast<std::size_t>(ts) * c_in + g * c_in_g];
        const double* wrow = &kernel->v[(co * c_in_g) * k + j];
        for (std::size_t ci = 0; ci < c_in_g; ++ci) acc += xrow[ci] * wrow[ci * k];
      }
      out->v[t * c_out + co] = acc;
    }
  }
  check_finite(*out, "conv1d");

  if (should_track({&signal, &kernel, &bias})) {
    out->requires_grad = true;
    active_tape()->record([signal, kernel, bias, out, L, c_in, c_out, c_in_g, k, dilation,
                           pad_left, l_out, co_per_g]() {
      const bool gx = signal->requires_grad, gw = kernel->requires_grad;
      const bool gb = bias && bias->requires_grad;
      if (gx) signal->ensure_grad();
      if (gw) kernel->ensure_grad();
      if (gb) bias->ensure_grad();
      for (std::size_t t = 0; t < l_out; ++t) {
        for (std::size_t co = 0; co < c_out; ++co) {
          const double go = out->g[t * c_out + co];
          if (go == 0.0) continue;
          const std::size_t g = co / co_per_g;
          if (gb) bias->g[co] += go;
          for (std::size_t j = 0; j < k; ++j) {
            const std::ptrdiff_t ts =
                static_cast<std::ptrdiff_t>(t + j * dilation) - pad_left;
            if (ts < 0 || ts >= static_cast<std::ptrdiff_t>(L)) continue;
            const std::size_t base = static_cast<std::size_t>(ts) * c_in + g * c_in_g;
            for (std::size_t ci = 0; ci < c_in_g; ++ci) {
              const std::size_t wi = (co * c_in_g + ci) * k + j;
              if (gx) signal->g[base + ci] += go * kernel->v[wi];
              if (gw) kernel->g[wi] += go * signal->v[base + ci];
            }
          }
        }
      }
    });
  }
  return out;
}

// Pointwise unary op with derivative expressed from (x, y).
template <typename F, typename DF>
static Tensor unary_op(const Tensor& x, const char* name, F fwd, DF dfdx) {
  Tensor out = make_tensor(x->shape);
  for (std::size_t i = 0; i < x->size(); ++i) out->v[i] = fwd(x->v[i]);
  check_finite(*out, name);
  if (should_track({&x})) {
    out->requires_grad = true;
    active_tape()->record([x, out, dfdx]() {
      x->ensure_grad();
      for (std::size_t i = 0; i < x->size(); ++i)
        x->g[i] += out->g[i] * dfdx(x->v[i], out->v[i]);
    });
  }
  return out;
}

Tensor silu(const Tensor& x) {
  return unary_op(
      x, "silu", [](double v) { return v * sigmoid_scalar(v); },
      [](double v, double) {
        const double s = sigmoid_scalar(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      x, "sigmoid", [](double v) { return sigmoid_scalar(v); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& x) {
  return unary_op(
      x, "softplus", [](double v) { return softplus_scalar(v); },
      [](double v, double) { return sigmoid_scalar(v); });
}

Tensor exp_op(const Tensor& x) {
  return unary_op(
      x, "exp", [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

enum class BroadcastKind { Same, Row, Scalar };

static BroadcastKind broadcast_kind(const Tensor& a, const Tensor& b, const char* name) {
  if (a->shape == b->shape) return BroadcastKind::Same;
  if (b->size() == 1) return BroadcastKind::Scalar;
  if (a->rank() == 2 && b->rank() == 1 && b->dim(0) == a->dim(1)) return BroadcastKind::Row;
  throw ShapeError(std::string(name) + ": shapes " + shape_str(a->shape) + " and " +
                   shape_str(b->shape) + " are not broadcast-compatible");
}

static std::size_t broadcast_index(BroadcastKind kind, std::size_t i, std::size_t cols) {
  switch (kind) {
    case BroadcastKind::Same: return i;
    case BroadcastKind::Row: return i % cols;
    case BroadcastKind::Scalar: return 0;
  }
  return 0;
}

Tensor add(const Tensor& a, const Tensor& b) {
  const BroadcastKind kind = broadcast_kind(a, b, "add");
  const std::size_t cols = a->rank() == 2 ? a->dim(1) : 1;
  Tensor out = make_tensor(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i)
    out->v[i] = a->v[i] + b->v[broadcast_index(kind, i, cols)];
  check_finite(*out, "add");
  if (should_track({&a, &b})) {
    out->requires_grad = true;
    active_tape()->record([a, b, out, kind, cols]() {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < a->size(); ++i) a->g[i] += out->g[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < a->size(); ++i)
          b->g[broadcast_index(kind, i, cols)] += out->g[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const BroadcastKind kind = broadcast_kind(a, b, "mul");
  const std::size_t cols = a->rank() == 2 ? a->dim(1) : 1;
  Tensor out = make_tensor(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i)
    out->v[i] = a->v[i] * b->v[broadcast_index(kind, i, cols)];
  check_finite(*out, "mul");
  if (should_track({&a, &b})) {
    out->requires_grad = true;
    active_tape()->record([a, b, out, kind, cols]() {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < a->size(); ++i)
          a->g[i] += out->g[i] * b->v[broadcast_index(kind, i, cols)];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < a->size(); ++i)
          b->g[broadcast_index(kind, i, cols)] += out->g[i] * a->v[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double c) {
  Tensor out = make_tensor(x->shape);
  for (std::size_t i = 0; i < x->size(); ++i) out->v[i] = x->v[i] * c;
  check_finite(*out, "scale");
  if (should_track({&x})) {
    out->requires_grad = true;
    active_tape()->record([x, out, c]() {
      x->ensure_grad();
      for (std::size_t i = 0; i < x->size(); ++i) x->g[i] += out->g[i] * c;
    });
  }
  return out;
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no parts");
  const std::size_t L = parts.front()->dim(0);
  std::size_t c_total = 0;
  for (const auto& p : parts) {
    if (p->rank() != 2 || p->dim(0) != L)
      throw ShapeError("concat_channels: all parts must share L");
    c_total += p->dim(1);
  }
  Tensor out = make_tensor({L, c_total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t c = p->dim(1);
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t j = 0; j < c; ++j) out->v[t * c_total + off + j] = p->v[t * c + j];
    off += c;
  }
  bool track = false;
  for (const auto& p : parts) {
    const Tensor& pr = p;
    if (should_track({&pr})) track = true;
  }
  if (track) {
    out->requires_grad = true;
    active_tape()->record([parts, out, L, c_total]() {
      std::size_t off = 0;
      for (const auto& p : parts) {
        const std::size_t c = p->dim(1);
        if (p->requires_grad) {
          p->ensure_grad();
          for (std::size_t t = 0; t < L; ++t)
            for (std::size_t j = 0; j < c; ++j)
              p->g[t * c + j] += out->g[t * c_total + off + j];
        }
        off += c;
      }
    });
  }
  return out;
}

Tensor slice_channels(const Tensor& x, std::size_t c0, std::size_t c1) {
  if (x->rank() != 2 || c1 > x->dim(1) || c0 >= c1)
    throw ShapeError("slice_channels: bad column range");
  const std::size_t L = x->dim(0), c_in = x->dim(1), c = c1 - c0;
  Tensor out = make_tensor({L, c});
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t j = 0; j < c; ++j) out->v[t * c + j] = x->v[t * c_in + c0 + j];
  if (should_track({&x})) {
    out->requires_grad = true;
    active_tape()->record([x, out, L, c_in, c0, c]() {
      x->ensure_grad();
      for (std::size_t t = 0; t < L; ++t)
        for (std::size_t j = 0; j < c; ++j) x->g[t * c_in + c0 + j] += out->g[t * c + j];
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x->v) acc += v;
  Tensor out = scalar_tensor(acc);
  check_finite(*out, "sum");
  if (should_track({&x})) {
    out->requires_grad = true;
    active_tape()->record([x, out]() {
      x->ensure_grad();
      for (std::size_t i = 0; i < x->size(); ++i) x->g[i] += out->g[0];
    });
  }
  return out;
}

}  // namespace sed
