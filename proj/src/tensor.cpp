#include "pmdm/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace pmdm {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->values.assign(numel(shape), 0.0);
  t.impl_->shape = std::move(shape);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& v : t.impl_->values) v = value;
  return t;
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values,
                           bool requires_grad) {
  if (values.size() != numel(shape))
    throw std::invalid_argument("Tensor::from_values: " +
                                std::to_string(values.size()) +
                                " values for shape " + shape_str(shape));
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->values = std::move(values);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_values({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!impl_) throw std::logic_error("Tensor: undefined");
  return impl_->shape;
}

std::size_t Tensor::size() const { return values().size(); }

const std::vector<double>& Tensor::values() const {
  if (!impl_) throw std::logic_error("Tensor: undefined");
  return impl_->values;
}

std::vector<double>& Tensor::mutable_values() {
  if (!impl_) throw std::logic_error("Tensor: undefined");
  return impl_->values;
}

double Tensor::item() const {
  if (!is_scalar()) throw std::invalid_argument("Tensor::item: not a scalar");
  return impl_->values[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool rg) {
  if (!impl_) throw std::logic_error("Tensor: undefined");
  impl_->requires_grad = rg;
}

std::vector<double>& Tensor::grad() {
  if (!impl_) throw std::logic_error("Tensor: undefined");
  if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
  return impl_->grad;
}

const std::vector<double>* Tensor::grad_if_present() const {
  if (!impl_ || impl_->grad.empty()) return nullptr;
  return &impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.clear();
}

const std::shared_ptr<GraphNode>& Tensor::node() const {
  static const std::shared_ptr<GraphNode> kNone;
  return impl_ ? impl_->node : kNone;
}

void Tensor::set_node(std::shared_ptr<GraphNode> node) {
  if (!impl_) throw std::logic_error("Tensor: undefined");
  impl_->node = std::move(node);
}

bool Tensor::all_finite() const {
  for (double v : values())
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

void backward(const Tensor& loss) {
  if (!loss.defined() || !loss.is_scalar())
    throw std::invalid_argument("backward: loss must be a scalar tensor");

  // Iterative post-order DFS over the recorded graph; `state` distinguishes
  // in-progress from finished so a cycle is detectable.
  enum class Mark { open, done };
  std::unordered_map<const GraphNode*, Mark> state;
  std::vector<Tensor> order;
  std::vector<std::pair<Tensor, std::size_t>> stack;
  if (loss.node()) stack.emplace_back(loss, 0);

  while (!stack.empty()) {
    auto& [t, next] = stack.back();
    const GraphNode* n = t.node().get();
    if (next == 0) {
      auto it = state.find(n);
      if (it != state.end()) {
        if (it->second == Mark::open)
          throw std::runtime_error("backward: cycle in computation graph");
        stack.pop_back();
        continue;
      }
      state.emplace(n, Mark::open);
    }
    bool descended = false;
    while (next < n->parents.size()) {
      const Tensor& p = n->parents[next];
      ++next;
      if (!p.node()) continue;
      auto it = state.find(p.node().get());
      if (it == state.end()) {
        stack.emplace_back(p, 0);
        descended = true;
        break;
      }
      if (it->second == Mark::open)
        throw std::runtime_error("backward: cycle in computation graph");
    }
    if (descended) continue;
    state[n] = Mark::done;
    order.push_back(t);
    stack.pop_back();
  }

  Tensor seed = loss;
  seed.grad()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const GraphNode* n = it->node().get();
    if (it->grad_if_present() == nullptr) continue;  // detached from the loss
    n->backward(*it);
  }
}

}  // namespace pmdm
