#include "mvan/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mvan::ad {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant: non-finite input value");
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant_view(const Tensor& value) {
  Node n;
  n.op = "constant";
  n.external = &value;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const std::string& name, const Tensor& value) {
  if (auto it = params_.find(name); it != params_.end()) return Var(this, it->second);
  if (!value.all_finite()) throw NumericError("parameter '" + name + "' holds non-finite values");
  Node n;
  n.op = "parameter";
  n.external = &value;
  n.requires_grad = true;
  n.param_name = name;
  nodes_.push_back(std::move(n));
  params_.emplace(name, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::vector<std::size_t> inputs, Backward backward) {
  if (!value.all_finite()) {
    throw NumericError(std::string(op) + ": produced a non-finite value (shape " + value.shape_string() + ")");
  }
  Node n;
  n.op = std::string(op);
  n.value = std::move(value);
  for (auto i : inputs) n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Tensor* Tape::grad_target(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.size() == 0) n.grad = Tensor(value(id).shape(), 0.0);
  return &n.grad;
}

Gradients Tape::gradient(Var loss) {
  if (loss.tape_ != this) throw NumericError("gradient: loss node belongs to a different tape");
  if (value(loss.id_).size() != 1) {
    throw NumericError("gradient: loss must be scalar, got shape " + value(loss.id_).shape_string());
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (nodes_[loss.id_].requires_grad) {
    Tensor* g = grad_target(loss.id_);
    (*g)[0] = 1.0;
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      n.backward(*this, i);
    }
  }
  Gradients out;
  for (const auto& [name, id] : params_) {
    const Node& n = nodes_[id];
    out.emplace(name, n.grad.size() ? n.grad : Tensor(n.external->shape(), 0.0));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Tape& same_tape(Var a, Var b, std::string_view op) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw NumericError(std::string(op) + ": operands must live on the same tape");
  }
  return a.tape();
}

[[noreturn]] void shape_error(std::string_view op, const Tensor& a, const Tensor& b) {
  throw NumericError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " + b.shape_string());
}

Tensor like(const Tensor& t) { return Tensor(t.shape(), 0.0); }

template <typename Fwd, typename Deriv>
Var unary(std::string_view op, Var a, Fwd fwd, Deriv deriv) {
  const Tensor& x = a.value();
  Tensor y = like(x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  return a.tape().record(op, std::move(y), {a.id()}, [deriv](Tape& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    Tensor* g = t.grad_target(in);
    if (!g) return;
    const Tensor& x = t.value(in);
    const Tensor& y = t.value(self);
    const Tensor& gy = t.grad(self);
    for (std::size_t i = 0; i < x.size(); ++i) (*g)[i] += gy[i] * deriv(x[i], y[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  if (B.rows() != k) shape_error("matmul", A, B);
  Tensor C = Tensor::matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = C.ptr() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B.ptr() + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
  return t.record("matmul", std::move(C), {a.id(), b.id()}, [](Tape& t, std::size_t self) {
    const auto& in = t.inputs(self);
    const Tensor& A = t.value(in[0]);
    const Tensor& B = t.value(in[1]);
    const Tensor& G = t.grad(self);
    const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
    if (Tensor* gA = t.grad_target(in[0])) {
      // dA = G B^T
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          const double* grow = G.ptr() + i * m;
          const double* brow = B.ptr() + p * m;
          for (std::size_t j = 0; j < m; ++j) s += grow[j] * brow[j];
          (*gA)[i * k + p] += s;
        }
      }
    }
    if (Tensor* gB = t.grad_target(in[1])) {
      // dB = A^T G
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = G.ptr() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          if (av == 0.0) continue;
          double* gbrow = gB->ptr() + p * m;
          for (std::size_t j = 0; j < m; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
}

namespace {

template <typename F, typename DA, typename DB>
Var binary_same_shape(std::string_view op, Var a, Var b, F f, DA da, DB db) {
  Tape& t = same_tape(a, b, op);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.size() != B.size() || A.rows() != B.rows()) shape_error(op, A, B);
  Tensor C = like(A);
  for (std::size_t i = 0; i < A.size(); ++i) C[i] = f(A[i], B[i]);
  return t.record(op, std::move(C), {a.id(), b.id()}, [da, db](Tape& t, std::size_t self) {
    const auto& in = t.inputs(self);
    const Tensor& A = t.value(in[0]);
    const Tensor& B = t.value(in[1]);
    const Tensor& G = t.grad(self);
    if (Tensor* gA = t.grad_target(in[0])) {
      for (std::size_t i = 0; i < A.size(); ++i) (*gA)[i] += G[i] * da(A[i], B[i]);
    }
    if (Tensor* gB = t.grad_target(in[1])) {
      for (std::size_t i = 0; i < B.size(); ++i) (*gB)[i] += G[i] * db(A[i], B[i]);
    }
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary_same_shape(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary_same_shape(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary_same_shape(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var add_row(Var a, Var bias) {
  Tape& t = same_tape(a, bias, "add_row");
  const Tensor& A = a.value();
  const Tensor& B = bias.value();
  if (B.rows() != 1 || B.cols() != A.cols()) shape_error("add_row", A, B);
  Tensor C = A;
  const std::size_t r = A.rows(), c = A.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) C[i * c + j] += B[j];
  return t.record("add_row", std::move(C), {a.id(), bias.id()}, [](Tape& t, std::size_t self) {
    const auto& in = t.inputs(self);
    const Tensor& G = t.grad(self);
    const std::size_t c = t.value(in[1]).cols();
    if (Tensor* gA = t.grad_target(in[0])) {
      for (std::size_t i = 0; i < G.size(); ++i) (*gA)[i] += G[i];
    }
    if (Tensor* gB = t.grad_target(in[1])) {
      for (std::size_t i = 0; i < G.size(); ++i) (*gB)[i % c] += G[i];
    }
  });
}

Var scale(Var a, double k) {
  return unary("scale", a, [k](double x) { return k * x; }, [k](double, double) { return k; });
}

Var add_scalar(Var a, double k) {
  return unary("add_scalar", a, [k](double x) { return x + k; }, [](double, double) { return 1.0; });
}

Var mul_const(Var a, const Tensor& k) {
  const Tensor& A = a.value();
  if (A.size() != k.size()) shape_error("mul_const", A, k);
  Tensor C = like(A);
  for (std::size_t i = 0; i < A.size(); ++i) C[i] = A[i] * k[i];
  return a.tape().record("mul_const", std::move(C), {a.id()}, [k](Tape& t, std::size_t self) {
    Tensor* g = t.grad_target(t.inputs(self)[0]);
    if (!g) return;
    const Tensor& G = t.grad(self);
    for (std::size_t i = 0; i < G.size(); ++i) (*g)[i] += G[i] * k[i];
  });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary("relu", a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var elu(Var a, double alpha) {
  return unary(
      "elu", a, [alpha](double x) { return x > 0 ? x : alpha * std::expm1(x); },
      [alpha](double x, double y) { return x > 0 ? 1.0 : y + alpha; });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      "leaky_relu", a, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var softmax_rows(Var a) {
  const Tensor& X = a.value();
  const std::size_t r = X.rows(), c = X.cols();
  Tensor Y = like(X);
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = X.ptr() + i * c;
    double* y = Y.ptr() + i * c;
    const double mx = *std::max_element(x, x + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < c; ++j) y[j] /= z;
  }
  return a.tape().record("softmax", std::move(Y), {a.id()}, [](Tape& t, std::size_t self) {
    Tensor* g = t.grad_target(t.inputs(self)[0]);
    if (!g) return;
    const Tensor& Y = t.value(self);
    const Tensor& G = t.grad(self);
    const std::size_t r = Y.rows(), c = Y.cols();
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += G[i * c + j] * Y[i * c + j];
      for (std::size_t j = 0; j < c; ++j) (*g)[i * c + j] += Y[i * c + j] * (G[i * c + j] - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  const Tensor& X = a.value();
  const std::size_t r = X.rows(), c = X.cols();
  Tensor Y = like(X);
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = X.ptr() + i * c;
    const double mx = *std::max_element(x, x + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(x[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) Y[i * c + j] = x[j] - lse;
  }
  return a.tape().record("log_softmax", std::move(Y), {a.id()}, [](Tape& t, std::size_t self) {
    Tensor* g = t.grad_target(t.inputs(self)[0]);
    if (!g) return;
    const Tensor& Y = t.value(self);
    const Tensor& G = t.grad(self);
    const std::size_t r = Y.rows(), c = Y.cols();
    for (std::size_t i = 0; i < r; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < c; ++j) gs += G[i * c + j];
      for (std::size_t j = 0; j < c; ++j) (*g)[i * c + j] += G[i * c + j] - std::exp(Y[i * c + j]) * gs;
    }
  });
}

Var activation(const Activation& act, Var x) {
  switch (act.kind) {
    case ActivationKind::Sigmoid: return sigmoid(x);
    case ActivationKind::Tanh: return tanh(x);
    case ActivationKind::Relu: return relu(x);
    case ActivationKind::Elu: return elu(x);
    case ActivationKind::LeakyRelu: return leaky_relu(x, act.slope);
    case ActivationKind::Softmax: return softmax_rows(x);
  }
  throw NumericError("activation: unknown kind");
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw NumericError("concat_cols: no inputs");
  Tape& t = parts[0].tape();
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    same_tape(parts[0], p, "concat_cols");
    if (p.rows() != r) shape_error("concat_cols", parts[0].value(), p.value());
    total += p.cols();
    ids.push_back(p.id());
  }
  Tensor C = Tensor::matrix(r, total);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& P = p.value();
    const std::size_t c = P.cols();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(P.ptr() + i * c, c, C.ptr() + i * total + off);
    off += c;
  }
  return t.record("concat_cols", std::move(C), std::move(ids), [](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    const std::size_t r = G.rows(), total = G.cols();
    std::size_t off = 0;
    for (std::size_t in : t.inputs(self)) {
      const std::size_t c = t.value(in).cols();
      if (Tensor* g = t.grad_target(in)) {
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) (*g)[i * c + j] += G[i * total + off + j];
      }
      off += c;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw NumericError("concat_rows: no inputs");
  Tape& t = parts[0].tape();
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    same_tape(parts[0], p, "concat_rows");
    if (p.cols() != c) shape_error("concat_rows", parts[0].value(), p.value());
    total += p.rows();
    ids.push_back(p.id());
  }
  Tensor C = Tensor::matrix(total, c);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& P = p.value();
    std::copy(P.data().begin(), P.data().end(), C.data().begin() + static_cast<std::ptrdiff_t>(off));
    off += P.size();
  }
  return t.record("concat_rows", std::move(C), std::move(ids), [](Tape& t, std::size_t self) {
    const Tensor& G = t.grad(self);
    std::size_t off = 0;
    for (std::size_t in : t.inputs(self)) {
      const std::size_t n = t.value(in).size();
      if (Tensor* g = t.grad_target(in)) {
        for (std::size_t i = 0; i < n; ++i) (*g)[i] += G[off + i];
      }
      off += n;
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Tensor& A = a.value();
  const std::size_t c = A.cols();
  if (count == 0 || begin + count > A.rows()) {
    throw NumericError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                       ") out of range for shape " + A.shape_string());
  }
  std::vector<double> d(A.data().begin() + static_cast<std::ptrdiff_t>(begin * c),
                        A.data().begin() + static_cast<std::ptrdiff_t>((begin + count) * c));
  return a.tape().record("slice_rows", Tensor({count, c}, std::move(d)), {a.id()},
                         [begin](Tape& t, std::size_t self) {
                           Tensor* g = t.grad_target(t.inputs(self)[0]);
                           if (!g) return;
                           const Tensor& G = t.grad(self);
                           const std::size_t off = begin * G.cols();
                           for (std::size_t i = 0; i < G.size(); ++i) (*g)[off + i] += G[i];
                         });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  if (count == 0 || begin + count > c) {
    throw NumericError("slice_cols: columns out of range for shape " + A.shape_string());
  }
  Tensor C = Tensor::matrix(r, count);
  for (std::size_t i = 0; i < r; ++i) std::copy_n(A.ptr() + i * c + begin, count, C.ptr() + i * count);
  return a.tape().record("slice_cols", std::move(C), {a.id()}, [begin](Tape& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    Tensor* g = t.grad_target(in);
    if (!g) return;
    const Tensor& G = t.grad(self);
    const std::size_t c = t.value(in).cols(), n = G.cols();
    for (std::size_t i = 0; i < G.rows(); ++i)
      for (std::size_t j = 0; j < n; ++j) (*g)[i * c + begin + j] += G[i * n + j];
  });
}

Var gather_rows(Var table, std::span<const std::size_t> indices) {
  const Tensor& T = table.value();
  const std::size_t c = T.cols();
  if (indices.empty()) throw NumericError("gather_rows: empty index list");
  Tensor C = Tensor::matrix(indices.size(), c);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= T.rows()) {
      throw NumericError("gather_rows: index " + std::to_string(indices[i]) + " out of range for shape " +
                         T.shape_string());
    }
    std::copy_n(T.ptr() + indices[i] * c, c, C.ptr() + i * c);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return table.tape().record("gather_rows", std::move(C), {table.id()},
                             [idx = std::move(idx)](Tape& t, std::size_t self) {
                               Tensor* g = t.grad_target(t.inputs(self)[0]);
                               if (!g) return;
                               const Tensor& G = t.grad(self);
                               const std::size_t c = G.cols();
                               for (std::size_t i = 0; i < idx.size(); ++i)
                                 for (std::size_t j = 0; j < c; ++j) (*g)[idx[i] * c + j] += G[i * c + j];
                             });
}

Var reshape(Var a, std::vector<std::size_t> shape) {
  Tensor r(std::move(shape), a.value().data());
  return a.tape().record("reshape", std::move(r), {a.id()}, [](Tape& t, std::size_t self) {
    Tensor* g = t.grad_target(t.inputs(self)[0]);
    if (!g) return;
    const Tensor& G = t.grad(self);
    for (std::size_t i = 0; i < G.size(); ++i) (*g)[i] += G[i];
  });
}

Var transpose(Var a) {
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor C = Tensor::matrix(c, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) C[j * r + i] = A[i * c + j];
  return a.tape().record("transpose", std::move(C), {a.id()}, [](Tape& t, std::size_t self) {
    Tensor* g = t.grad_target(t.inputs(self)[0]);
    if (!g) return;
    const Tensor& G = t.grad(self);
    const std::size_t c = G.rows(), r = G.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*g)[i * c + j] += G[j * r + i];
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape().record("sum", Tensor::scalar(s), {a.id()}, [](Tape& t, std::size_t self) {
    Tensor* g = t.grad_target(t.inputs(self)[0]);
    if (!g) return;
    const double gs = t.grad(self)[0];
    for (double& v : g->data()) v += gs;
  });
}

Var mean_rows(Var a) {
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor C = Tensor::matrix(1, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) C[j] += A[i * c + j];
  for (double& v : C.data()) v /= static_cast<double>(r);
  return a.tape().record("mean_rows", std::move(C), {a.id()}, [](Tape& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    Tensor* g = t.grad_target(in);
    if (!g) return;
    const Tensor& G = t.grad(self);
    const std::size_t r = t.value(in).rows(), c = G.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*g)[i * c + j] += G[j] / static_cast<double>(r);
  });
}

Var max_rows(Var a) {
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), c = A.cols();
  Tensor C = Tensor::matrix(1, c);
  std::vector<std::size_t> arg(c, 0);
  for (std::size_t j = 0; j < c; ++j) {
    C[j] = A[j];
    for (std::size_t i = 1; i < r; ++i) {
      if (A[i * c + j] > C[j]) {
        C[j] = A[i * c + j];
        arg[j] = i;
      }
    }
  }
  return a.tape().record("max_rows", std::move(C), {a.id()}, [arg = std::move(arg)](Tape& t, std::size_t self) {
    Tensor* g = t.grad_target(t.inputs(self)[0]);
    if (!g) return;
    const Tensor& G = t.grad(self);
    const std::size_t c = G.cols();
    for (std::size_t j = 0; j < c; ++j) (*g)[arg[j] * c + j] += G[j];
  });
}

Var segment_softmax(Var logits, std::span<const std::size_t> offsets) {
  const Tensor& X = logits.value();
  if (X.cols() != 1 || offsets.empty() || offsets.back() != X.rows()) {
    throw NumericError("segment_softmax: offsets do not cover logits of shape " + X.shape_string());
  }
  Tensor Y = like(X);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t b = offsets[s], e = offsets[s + 1];
    if (b == e) continue;
    double mx = X[b];
    for (std::size_t i = b + 1; i < e; ++i) mx = std::max(mx, X[i]);
    double z = 0.0;
    for (std::size_t i = b; i < e; ++i) z += (Y[i] = std::exp(X[i] - mx));
    for (std::size_t i = b; i < e; ++i) Y[i] /= z;
  }
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  return logits.tape().record("segment_softmax", std::move(Y), {logits.id()},
                              [off = std::move(off)](Tape& t, std::size_t self) {
                                Tensor* g = t.grad_target(t.inputs(self)[0]);
                                if (!g) return;
                                const Tensor& Y = t.value(self);
                                const Tensor& G = t.grad(self);
                                for (std::size_t s = 0; s + 1 < off.size(); ++s) {
                                  double dot = 0.0;
                                  for (std::size_t i = off[s]; i < off[s + 1]; ++i) dot += G[i] * Y[i];
                                  for (std::size_t i = off[s]; i < off[s + 1]; ++i) (*g)[i] += Y[i] * (G[i] - dot);
                                }
                              });
}

Var segment_weighted_sum(Var coeffs, Var feats, std::span<const std::size_t> offsets,
                         std::span<const std::size_t> targets) {
  Tape& t = same_tape(coeffs, feats, "segment_weighted_sum");
  const Tensor& A = coeffs.value();
  const Tensor& F = feats.value();
  if (A.cols() != 1 || A.rows() != targets.size() || offsets.empty() || offsets.back() != targets.size()) {
    shape_error("segment_weighted_sum", A, F);
  }
  const std::size_t n = offsets.size() - 1, c = F.cols();
  Tensor C = Tensor::matrix(n, c);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t e = offsets[s]; e < offsets[s + 1]; ++e) {
      if (targets[e] >= F.rows()) throw NumericError("segment_weighted_sum: target index out of range");
      for (std::size_t j = 0; j < c; ++j) C[s * c + j] += A[e] * F[targets[e] * c + j];
    }
  }
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return t.record("segment_weighted_sum", std::move(C), {coeffs.id(), feats.id()},
                  [off = std::move(off), tgt = std::move(tgt)](Tape& t, std::size_t self) {
                    const auto& in = t.inputs(self);
                    const Tensor& A = t.value(in[0]);
                    const Tensor& F = t.value(in[1]);
                    const Tensor& G = t.grad(self);
                    const std::size_t c = F.cols();
                    Tensor* gA = t.grad_target(in[0]);
                    Tensor* gF = t.grad_target(in[1]);
                    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
                      for (std::size_t e = off[s]; e < off[s + 1]; ++e) {
                        const std::size_t f = tgt[e];
                        if (gA) {
                          double d = 0.0;
                          for (std::size_t j = 0; j < c; ++j) d += G[s * c + j] * F[f * c + j];
                          (*gA)[e] += d;
                        }
                        if (gF) {
                          for (std::size_t j = 0; j < c; ++j) (*gF)[f * c + j] += A[e] * G[s * c + j];
                        }
                      }
                    }
                  });
}

Var cross_entropy(Var logits, std::size_t label) {
  const Tensor& X = logits.value();
  if (X.rows() != 1 || label >= X.cols()) {
    throw NumericError("cross_entropy: label " + std::to_string(label) + " invalid for logits " + X.shape_string());
  }
  const std::size_t c = X.cols();
  const double mx = *std::max_element(X.data().begin(), X.data().end());
  double z = 0.0;
  for (std::size_t j = 0; j < c; ++j) z += std::exp(X[j] - mx);
  const double nll = mx + std::log(z) - X[label];
  const double cap = -std::log(1e-12);
  const bool clamped = nll > cap;
  return logits.tape().record("cross_entropy", Tensor::scalar(clamped ? cap : nll), {logits.id()},
                              [label, clamped](Tape& t, std::size_t self) {
                                if (clamped) return;
                                const std::size_t in = t.inputs(self)[0];
                                Tensor* g = t.grad_target(in);
                                if (!g) return;
                                const Tensor& X = t.value(in);
                                const double gs = t.grad(self)[0];
                                const double mx = *std::max_element(X.data().begin(), X.data().end());
                                double z = 0.0;
                                for (double v : X.data()) z += std::exp(v - mx);
                                for (std::size_t j = 0; j < X.size(); ++j) {
                                  const double p = std::exp(X[j] - mx) / z;
                                  (*g)[j] += gs * (p - (j == label ? 1.0 : 0.0));
                                }
                              });
}

Var dropout(Var x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0) || rate >= 1.0) {
    throw NumericError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  Tensor mask(x.value().shape(), 0.0);
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask.data()) m = rng.uniform() < rate ? 0.0 : keep;
  return mul_const(x, mask);
}

}  // namespace mvan::ad
