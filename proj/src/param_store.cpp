#include "pmdm/param_store.hpp"

#include <cmath>
#include <stdexcept>

#include "pmdm/kernels.hpp"

namespace pmdm {

namespace {
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;
}  // namespace

ParamStore::ParamStore(std::uint64_t seed) : rng_(seed) {}

Tensor ParamStore::register_param(const std::string& name, Tensor t) {
  if (entries_.count(name))
    throw std::invalid_argument("ParamStore: duplicate parameter '" + name +
                                "'");
  t.set_requires_grad(true);
  Entry e;
  e.param = t;
  e.m.assign(t.size(), 0.0);
  e.v.assign(t.size(), 0.0);
  entries_.emplace(name, std::move(e));
  order_.push_back(name);
  return t;
}

Tensor ParamStore::create_uniform(const std::string& name, Shape shape,
                                  double bound) {
  Tensor t = Tensor::zeros(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.mutable_values()) v = dist(rng_);
  return register_param(name, std::move(t));
}

Tensor ParamStore::create_fan_in(const std::string& name, Shape shape,
                                 std::size_t fan_in) {
  if (fan_in == 0) throw std::invalid_argument("create_fan_in: zero fan-in");
  return create_uniform(name, std::move(shape),
                        1.0 / std::sqrt(static_cast<double>(fan_in)));
}

Tensor ParamStore::create_zeros(const std::string& name, Shape shape) {
  return register_param(name, Tensor::zeros(std::move(shape)));
}

bool ParamStore::contains(const std::string& name) const {
  return entries_.count(name) != 0;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw std::invalid_argument("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw std::invalid_argument("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

Tensor ParamStore::get(const std::string& name) const {
  return entry(name).param;
}

std::size_t ParamStore::value_count() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.param.size();
  return n;
}

std::map<std::string, Tensor> ParamStore::gradients() const {
  std::map<std::string, Tensor> out;
  for (const auto& name : order_) {
    const Entry& e = entries_.at(name);
    if (const std::vector<double>* g = e.param.grad_if_present()) {
      out.emplace(name, Tensor::from_values(e.param.shape(), *g));
    } else {
      out.emplace(name, Tensor::zeros(e.param.shape()));
    }
  }
  return out;
}

void ParamStore::zero_grads() {
  for (auto& [name, e] : entries_) e.param.zero_grad();
}

void ParamStore::adam_step(const std::map<std::string, Tensor>& grads,
                           double lr) {
  if (!(lr >= 0.0))
    throw std::invalid_argument("adam_step: learning rate must be >= 0");
  for (const auto& [name, g] : grads) {
    const Entry& e = entry(name);
    if (g.shape() != e.param.shape())
      throw std::invalid_argument("adam_step: gradient shape " +
                                  shape_str(g.shape()) + " for parameter '" +
                                  name + "' of shape " +
                                  shape_str(e.param.shape()));
  }
  ++step_;
  const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
  static const std::vector<double> kEmpty;
  for (const auto& name : order_) {
    Entry& e = entries_.at(name);
    auto it = grads.find(name);
    const std::vector<double>* g = &kEmpty;
    std::vector<double> zeros;
    if (it != grads.end()) {
      g = &it->second.values();
    } else {
      zeros.assign(e.param.size(), 0.0);
      g = &zeros;
    }
    kernels::adam_update(e.param.mutable_values().data(), g->data(),
                         e.m.data(), e.v.data(), e.param.size(), lr, kBeta1,
                         kBeta2, kEps, bias1, bias2);
  }
}

std::vector<std::vector<double>> ParamStore::snapshot_values() const {
  std::vector<std::vector<double>> snap;
  snap.reserve(order_.size());
  for (const auto& name : order_) snap.push_back(entries_.at(name).param.values());
  return snap;
}

void ParamStore::restore_values(const std::vector<std::vector<double>>& snap) {
  if (snap.size() != order_.size())
    throw std::invalid_argument("restore_values: snapshot size mismatch");
  for (std::size_t i = 0; i < order_.size(); ++i) {
    Entry& e = entries_.at(order_[i]);
    if (snap[i].size() != e.param.size())
      throw std::invalid_argument("restore_values: size mismatch for '" +
                                  order_[i] + "'");
    e.param.mutable_values() = snap[i];
  }
}

void ParamStore::load_values(const std::string& name,
                             const std::vector<double>& values) {
  Entry& e = entry(name);
  if (values.size() != e.param.size())
    throw std::invalid_argument("load_values: '" + name + "' expects " +
                                std::to_string(e.param.size()) +
                                " values, got " +
                                std::to_string(values.size()));
  e.param.mutable_values() = values;
}

}  // namespace pmdm
