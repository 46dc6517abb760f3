#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "pmdm/tensor.hpp"

namespace pmdm {

// Named learnable tensors plus Adam moment accumulators. Creation order is
// preserved; it defines checkpoint layout and the deterministic order of
// parameter initialization draws.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0);

  // Registers a parameter initialized uniformly on [-bound, bound].
  Tensor create_uniform(const std::string& name, Shape shape, double bound);
  // Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)]; the default for weight
  // matrices, with fan_in the contracted width.
  Tensor create_fan_in(const std::string& name, Shape shape,
                       std::size_t fan_in);
  Tensor create_zeros(const std::string& name, Shape shape);

  bool contains(const std::string& name) const;
  Tensor get(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  std::size_t count() const { return order_.size(); }
  std::size_t value_count() const;

  std::uint64_t step() const { return step_; }

  // Collects d(loss)/d(param) for every registered parameter after a
  // backward() pass; parameters off the loss path get zero tensors.
  std::map<std::string, Tensor> gradients() const;
  void zero_grads();

  // One Adam step (beta1 0.9, beta2 0.999, eps 1e-8, bias-corrected) from a
  // gradient map; missing entries are treated as zero gradient, shape
  // mismatches raise naming the parameter. Increments the step counter once.
  void adam_step(const std::map<std::string, Tensor>& grads, double lr);

  // In-place snapshot/restore of all parameter values (moments untouched).
  std::vector<std::vector<double>> snapshot_values() const;
  void restore_values(const std::vector<std::vector<double>>& snap);

  // Replaces the values of an existing parameter (checkpoint load).
  void load_values(const std::string& name, const std::vector<double>& values);

  std::mt19937_64& rng() { return rng_; }

 private:
  struct Entry {
    Tensor param;
    std::vector<double> m, v;
  };
  Tensor register_param(const std::string& name, Tensor t);
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;

  std::vector<std::string> order_;
  std::map<std::string, Entry> entries_;
  std::uint64_t step_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace pmdm
