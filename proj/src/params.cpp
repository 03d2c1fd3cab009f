#include "mvan/params.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mvan {

namespace {
constexpr const char* kCheckpointMagic = "MVAN-CHECKPOINT";
constexpr int kCheckpointVersion = 1;
}  // namespace

Tensor& ParameterStore::add(const std::string& name, Tensor value) {
  auto [it, inserted] = values_.emplace(name, std::move(value));
  if (!inserted) throw std::invalid_argument("duplicate parameter name: " + name);
  return it->second;
}

Tensor& ParameterStore::at(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParameterStore::at(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : values_) n += t.size();
  return n;
}

Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return uniform_tensor({rows, cols}, -limit, limit, rng);
}

Tensor uniform_tensor(std::vector<std::size_t> shape, double lo, double hi, Rng& rng) {
  Tensor t(std::move(shape), 0.0);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

void adam_step(ParameterStore& params, const ad::Gradients& grads, AdamState& state,
               const std::set<std::string>& frozen) {
  for (const auto& [name, value] : params) {
    if (frozen.count(name)) continue;
    auto g = grads.find(name);
    if (g == grads.end()) throw NumericError("adam_step: missing gradient for parameter '" + name + "'");
    if (!g->second.same_shape(value)) {
      throw NumericError("adam_step: gradient for '" + name + "' has shape " + g->second.shape_string() +
                         ", parameter has " + value.shape_string());
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, value] : params) {
    if (frozen.count(name)) continue;
    const Tensor& g = grads.at(name);
    auto& m = state.m.try_emplace(name, Tensor(value.shape(), 0.0)).first->second;
    auto& v = state.v.try_emplace(name, Tensor(value.shape(), 0.0)).first->second;
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      value[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

std::string checkpoint_string(const ParameterStore& params) {
  std::string out;
  out += kCheckpointMagic;
  out += " " + std::to_string(kCheckpointVersion) + "\n";
  out += std::to_string(params.size()) + "\n";
  char buf[64];
  for (const auto& [name, t] : params) {
    out += name + " " + std::to_string(t.rank());
    for (auto d : t.shape()) out += " " + std::to_string(d);
    out += "\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%a", t[i]);
      if (i) out += ' ';
      out += buf;
    }
    out += "\n";
  }
  return out;
}

ParameterStore parse_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic) {
    throw std::runtime_error("checkpoint: missing '" + std::string(kCheckpointMagic) + "' header");
  }
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
  }
  std::size_t count = 0;
  if (!(in >> count)) throw std::runtime_error("checkpoint: missing tensor count");
  ParameterStore store;
  for (std::size_t k = 0; k < count; ++k) {
    std::string name;
    std::size_t rank = 0;
    if (!(in >> name >> rank) || rank == 0) throw std::runtime_error("checkpoint: bad record header #" + std::to_string(k));
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      if (!(in >> d)) throw std::runtime_error("checkpoint: bad shape for " + name);
      n *= d;
    }
    std::vector<double> data(n);
    std::string tok;
    for (auto& v : data) {
      if (!(in >> tok)) throw std::runtime_error("checkpoint: truncated values for " + name);
      char* end = nullptr;
      v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') throw std::runtime_error("checkpoint: bad value '" + tok + "' in " + name);
    }
    store.add(name, Tensor(std::move(shape), std::move(data)));
  }
  return store;
}

void save_checkpoint(const ParameterStore& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << checkpoint_string(params);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ParameterStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace mvan
