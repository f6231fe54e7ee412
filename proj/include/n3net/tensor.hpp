#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace n3net::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor of doubles with shared ownership.
///
/// Copies are shallow: a parameter held by a model and the same parameter
/// captured by a tape refer to one buffer. clone() makes a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<double> data();
  std::span<const double> data() const;
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  /// Gradient buffer, allocated (zero-filled) on first access. The buffer
  /// belongs to the shared state, so it is writable through const handles.
  std::span<double> grad() const;
  void zero_grad() const;

  Tensor clone() const;
  bool is_same(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

/// Records differentiable operations in execution order.
///
/// Nodes are appended as ops run, so the list is already topologically
/// sorted; backward() walks it once in reverse. A tape and the tensors it
/// produced are a single-threaded unit of work.
class Tape {
 public:
  enum class Mode { kRecord, kInference };

  explicit Tape(Mode mode = Mode::kRecord) : mode_(mode) {}

  bool recording() const { return mode_ == Mode::kRecord; }

  /// True when an op over `inputs` has to be recorded.
  bool wants(std::initializer_list<const Tensor*> inputs) const;
  bool wants(std::span<const Tensor> inputs) const;

  /// Registers `output` as produced by an op; marks it as requiring grad.
  void record(Tensor output, std::function<void()> backward_fn);

  /// Accumulates dloss/dx into every requires_grad leaf reachable from
  /// `loss`. Intermediate gradients are reset on each call, leaf gradients
  /// are not, so repeated calls add up.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor output;
    std::function<void()> backward_fn;
  };
  Mode mode_;
  std::vector<Node> nodes_;
};

}  // namespace n3net::ad
