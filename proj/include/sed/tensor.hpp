#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace sed {

// Error taxonomy; CLI maps each family to a distinct exit code.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : ConfigError {
  using ConfigError::ConfigError;
};

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

// Dense row-major tensor of doubles with an optional gradient buffer.
struct TensorData {
  Shape shape;
  std::vector<double> v;
  std::vector<double> g;  // allocated on demand, same length as v
  bool requires_grad = false;

  std::size_t size() const { return v.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  std::size_t rank() const { return shape.size(); }

  void ensure_grad() {
    if (g.size() != v.size()) g.assign(v.size(), 0.0);
  }
  void zero_grad() {
    if (!g.empty()) std::fill(g.begin(), g.end(), 0.0);
  }
};

using Tensor = std::shared_ptr<TensorData>;

Tensor make_tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
Tensor make_tensor(Shape shape, std::vector<double> values, bool requires_grad = false);
Tensor scalar_tensor(double value, bool requires_grad = false);

// Throws NumericError if any element is NaN/Inf. Called at every op boundary.
void check_finite(const TensorData& t, const char* op);

// Reverse-mode tape. Ops append backward closures in forward order; backward()
// runs them in reverse, which is a valid topological order because the forward
// pass is sequential. A tape is single-use.
class Tape {
 public:
  void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }
  void backward(const Tensor& loss);
  bool consumed() const { return consumed_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<std::function<void()>> nodes_;
  bool consumed_ = false;
};

// Thread-local active tape; ops record only while a TapeScope is alive.
Tape* active_tape();

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

}  // namespace sed
