#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "mvan/autodiff.hpp"
#include "mvan/rng.hpp"
#include "mvan/tensor.hpp"

namespace mvan {

/// Named collection of model tensors. Iteration order is by name, which keeps
/// checkpoints and optimizer updates deterministic.
class ParameterStore {
 public:
  Tensor& add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return values_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  std::size_t size() const { return values_.size(); }
  std::size_t scalar_count() const;

  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  friend bool operator==(const ParameterStore& a, const ParameterStore& b) { return a.values_ == b.values_; }

 private:
  std::map<std::string, Tensor> values_;
};

/// Glorot/Xavier uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);
Tensor uniform_tensor(std::vector<std::size_t> shape, double lo, double hi, Rng& rng);

struct AdamState {
  std::uint64_t step = 0;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
};

/// One Adam update with bias correction. Every parameter in `params` not
/// listed in `frozen` must have an entry in `grads`.
void adam_step(ParameterStore& params, const ad::Gradients& grads, AdamState& state,
               const std::set<std::string>& frozen = {});

/// Checkpoint file: a version header followed by one record per tensor
/// (name, rank, dims, then values as hexadecimal floats). Saving a loaded
/// checkpoint reproduces the original bytes.
void save_checkpoint(const ParameterStore& params, const std::filesystem::path& path);
ParameterStore load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_string(const ParameterStore& params);
ParameterStore parse_checkpoint(const std::string& text);

}  // namespace mvan
