#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvan/rng.hpp"
#include "mvan/tensor.hpp"

namespace mvan::ad {

/// Gradients of a scalar loss keyed by parameter name.
using Gradients = std::map<std::string, Tensor>;

class Tape;

/// Handle to one node on a tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run operation record. Each op computes its forward value when it
/// is recorded, so records are appended in evaluation (topological) order and
/// the backward sweep simply walks the records in reverse.
class Tape {
 public:
  /// Adds d(loss)/d(output) contributions into the inputs' gradient buffers.
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() { nodes_.reserve(512); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Non-trainable leaf aliasing externally owned storage (no copy).
  Var constant_view(const Tensor& value);
  /// Trainable leaf that aliases externally owned storage. Registering the
  /// same name twice returns the existing node.
  Var parameter(const std::string& name, const Tensor& value);

  Var record(std::string_view op, Tensor value, std::vector<std::size_t> inputs, Backward backward);

  const Tensor& value(std::size_t id) const;
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  /// Gradient buffer of an input, or nullptr when that input does not lead to
  /// any parameter.
  Tensor* grad_target(std::size_t id);
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
  const std::string& op_name(std::size_t id) const { return nodes_[id].op; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Reverse sweep from a scalar node. Returns a gradient for every parameter
  /// registered on this tape (zeros when the loss does not depend on it).
  Gradients gradient(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::string op;
    Tensor value;
    const Tensor* external = nullptr;
    std::vector<std::size_t> inputs;
    Backward backward;
    Tensor grad;
    bool requires_grad = false;
    std::string param_name;
  };

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t, std::less<>> params_;
};

// ---------------------------------------------------------------------------
// Operations. Rank-1 values are treated as 1 x n rows throughout.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a (r x c) + bias (1 x c) broadcast over rows.
Var add_row(Var a, Var bias);
Var scale(Var a, double k);
Var add_scalar(Var a, double k);
/// Elementwise product with a constant tensor (masks, fixed weights).
Var mul_const(Var a, const Tensor& k);

Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var elu(Var a, double alpha = 1.0);
Var leaky_relu(Var a, double slope = 0.3);
/// Softmax over the last axis, i.e. independently per row.
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);

enum class ActivationKind { Sigmoid, Tanh, Relu, Elu, LeakyRelu, Softmax };
struct Activation {
  ActivationKind kind;
  double slope = 0.3;  // LeakyRelu only
};
Var activation(const Activation& act, Var x);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var gather_rows(Var table, std::span<const std::size_t> indices);
Var reshape(Var a, std::vector<std::size_t> shape);
Var transpose(Var a);

Var sum(Var a);
Var mean_rows(Var a);
Var max_rows(Var a);

/// Softmax over the entries of each segment of a column vector (E x 1);
/// segment i spans [offsets[i], offsets[i+1]).
Var segment_softmax(Var logits, std::span<const std::size_t> offsets);
/// out[i] = sum over e in segment i of coeffs[e] * feats[targets[e]].
Var segment_weighted_sum(Var coeffs, Var feats, std::span<const std::size_t> offsets,
                         std::span<const std::size_t> targets);

/// Negative log-likelihood of class `label` under softmax(logits), computed
/// via log-sum-exp and clamped so that probabilities below 1e-12 cost at most
/// -log(1e-12).
Var cross_entropy(Var logits, std::size_t label);

/// Inverted dropout. Identity when !training or rate == 0; otherwise zeroes
/// each entry with probability `rate` and scales survivors by 1/(1-rate).
Var dropout(Var x, double rate, bool training, Rng& rng);

}  // namespace mvan::ad
