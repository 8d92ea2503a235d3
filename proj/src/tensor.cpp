#include "sed/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace sed {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

static std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor make_tensor(Shape shape, double fill, bool requires_grad) {
  auto t = std::make_shared<TensorData>();
  std::size_t n = shape_numel(shape);
  t->shape = std::move(shape);
  t->v.assign(n, fill);
  t->requires_grad = requires_grad;
  return t;
}

Tensor make_tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw ShapeError("make_tensor: " + std::to_string(values.size()) +
                     " values do not fill shape " + shape_str(shape));
  auto t = std::make_shared<TensorData>();
  t->shape = std::move(shape);
  t->v = std::move(values);
  t->requires_grad = requires_grad;
  return t;
}

Tensor scalar_tensor(double value, bool requires_grad) {
  return make_tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

void check_finite(const TensorData& t, const char* op) {
  for (double x : t.v) {
    if (!std::isfinite(x))
      throw NumericError(std::string(op) + ": non-finite value produced");
  }
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw NumericError("backward: tape already consumed");
  if (loss->size() != 1)
    throw ShapeError("backward: loss must be scalar, got " + shape_str(loss->shape));
  if (!loss->requires_grad)
    throw NumericError("backward: loss is detached from the graph");
  consumed_ = true;
  loss->ensure_grad();
  loss->g[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  nodes_.clear();
}

static thread_local Tape* g_active_tape = nullptr;

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = prev_; }

}  // namespace sed
