#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace pmdm {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

// Tape node recorded by a differentiable op. `backward` reads the output's
// gradient buffer and accumulates into the parents' gradient buffers.
struct GraphNode {
  std::vector<Tensor> parents;
  std::function<void(const Tensor& out)> backward;
};

// Dense row-major tensor of 64-bit reals. Copies share the underlying
// buffer; values are treated as immutable once an op has consumed them
// (parameter updates go through ParamStore, which owns its leaves).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t extent(std::size_t axis) const { return shape().at(axis); }
  bool is_scalar() const { return defined() && shape().empty(); }

  const std::vector<double>& values() const;
  std::vector<double>& mutable_values();
  const double* data() const { return values().data(); }
  double item() const;  // scalar only

  bool requires_grad() const;
  void set_requires_grad(bool rg);

  // Gradient buffer, zero-allocated on demand.
  std::vector<double>& grad();
  const std::vector<double>* grad_if_present() const;
  void zero_grad();

  const std::shared_ptr<GraphNode>& node() const;
  void set_node(std::shared_ptr<GraphNode> node);

  bool all_finite() const;
  bool same_buffer(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until requested
    bool requires_grad = false;
    std::shared_ptr<GraphNode> node;
  };
  std::shared_ptr<Impl> impl_;
};

// Runs reverse-mode differentiation from a scalar loss. Gradients accumulate
// into the grad buffers of every reachable tensor with requires_grad set.
// Throws if loss is not scalar or if the recorded graph contains a cycle.
void backward(const Tensor& loss);

// Scoped switch that stops ops from recording tape nodes (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace pmdm
