#include "lcseq/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace lcseq::ad {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

void check_finite(std::span<const double> values, const char* where) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteError(std::string("non-finite value in ") + where);
  }
}

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
  for (std::size_t extent : shape) {
    if (extent == 0) throw ShapeError("tensor extents must be positive: " + to_string(shape));
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Rows/columns of an operand when viewed as a matrix.
struct MatView {
  std::size_t rows;
  std::size_t cols;
};

}  // namespace

// ---------------------------------------------------------------- Tensor

Tensor::Tensor() : shape_{1}, values_(1, 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : shape_(std::move(shape)), values_(std::move(values)), requires_grad_(requires_grad) {
  check_shape(shape_);
  if (numel(shape_) != values_.size()) {
    throw ShapeError("shape " + to_string(shape_) + " does not match " + std::to_string(values_.size()) +
                     " values");
  }
  check_finite(values_, "tensor construction");
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  check_shape(shape);
  const std::size_t n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

double Tensor::item() const {
  if (values_.size() != 1) throw ShapeError("item() on non-scalar tensor " + to_string(shape_));
  return values_[0];
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::hadamard: return "hadamard";
    case OpKind::scalar_mul: return "scalar_mul";
    case OpKind::tanh: return "tanh";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::softmax_lastdim: return "softmax_lastdim";
    case OpKind::log_softmax_lastdim: return "log_softmax_lastdim";
    case OpKind::concat_lastdim: return "concat_lastdim";
    case OpKind::stack_rows: return "stack_rows";
    case OpKind::slice_lastdim: return "slice_lastdim";
    case OpKind::row_lookup: return "row_lookup";
    case OpKind::pick: return "pick";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::log: return "log";
    case OpKind::neg: return "neg";
  }
  return "unknown";
}

void accumulate(GradientMap& into, const GradientMap& from, double scale) {
  for (const auto& [name, grad] : from) {
    auto& dst = into[name];
    if (dst.empty()) dst.assign(grad.size(), 0.0);
    if (dst.size() != grad.size()) throw ShapeError("gradient size mismatch for " + name);
    for (std::size_t i = 0; i < grad.size(); ++i) dst[i] += scale * grad[i];
  }
}

// ---------------------------------------------------------------- Tape: leaves

void Tape::check_live() const {
  if (consumed_) throw TapeError("tape already consumed by backward(); start a new forward pass");
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape_ != this || v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size()) {
    throw TapeError("variable does not belong to this tape");
  }
  return nodes_[static_cast<std::size_t>(v.id_)];
}

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  check_live();
  Node n;
  n.shape = value.shape();
  n.value.assign(value.values().begin(), value.values().end());
  return Var(this, push(std::move(n)));
}

Var Tape::parameter(const Tensor& param, std::string name) {
  check_live();
  if (auto it = param_ids_.find(&param); it != param_ids_.end()) return Var(this, it->second);
  check_finite(param.values(), name.c_str());
  Node n;
  n.shape = param.shape();
  n.external = param.values().data();
  n.requires_grad = param.requires_grad();
  n.name = std::move(name);
  const int id = push(std::move(n));
  param_ids_.emplace(&param, id);
  return Var(this, id);
}

const Shape& Tape::shape(Var v) const { return node(v).shape; }
std::span<const double> Tape::value(Var v) const { return node(v).data(); }
bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

double Tape::item(Var v) const {
  const auto& n = node(v);
  if (numel(n.shape) != 1) throw ShapeError("item() on non-scalar value " + to_string(n.shape));
  return n.data()[0];
}

Tensor Tape::tensor(Var v) const {
  const auto& n = node(v);
  auto data = n.data();
  return Tensor(n.shape, std::vector<double>(data.begin(), data.end()));
}

// ---------------------------------------------------------------- Tape: forward

namespace {

MatView as_lhs(const Shape& s) {
  return s.size() == 1 ? MatView{1, s[0]} : MatView{s[0], s[1]};
}

MatView as_rhs(const Shape& s) {
  return s.size() == 1 ? MatView{s[0], 1} : MatView{s[0], s[1]};
}

// Four independent partial sums so the reduction vectorizes without
// reassociation flags; the summation order is fixed, so results stay
// deterministic.
double dot(const double* x, const double* y, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i] * y[i];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
  }
  for (; i < n; ++i) s0 += x[i] * y[i];
  return (s0 + s1) + (s2 + s3);
}

// c[m x n] += a[m x k] * b[k x n]
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  if (n == 1) {
    for (std::size_t i = 0; i < m; ++i) c[i] += dot(a + i * k, b, k);
    return;
  }
  for (std::size_t i = 0; i < m; ++i) {
    double* cr = c + i * n;
    const double* ar = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ar[p];
      const double* br = b + p * n;
      for (std::size_t j = 0; j < n; ++j) cr[j] += s * br[j];
    }
  }
}

void softmax_row(const double* x, double* y, std::size_t n) {
  const double mx = *std::max_element(x, x + n);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    y[j] = std::exp(x[j] - mx);
    total += y[j];
  }
  for (std::size_t j = 0; j < n; ++j) y[j] /= total;
}

void log_softmax_row(const double* x, double* y, std::size_t n) {
  const double mx = *std::max_element(x, x + n);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) total += std::exp(x[j] - mx);
  const double lse = mx + std::log(total);
  for (std::size_t j = 0; j < n; ++j) y[j] = x[j] - lse;
}

}  // namespace

Var Tape::apply(OpKind kind, std::span<const Var> inputs, const OpArgs& args) {
  check_live();
  std::vector<const Node*> in;
  in.reserve(inputs.size());
  for (Var v : inputs) in.push_back(&node(v));

  auto need = [&](std::size_t count) {
    if (in.size() != count) {
      throw ShapeError(std::string(op_name(kind)) + " expects " + std::to_string(count) + " inputs");
    }
  };
  auto mismatch = [&]() -> ShapeError {
    std::string msg = std::string(op_name(kind)) + ": incompatible shapes";
    for (const Node* p : in) msg += ' ' + to_string(p->shape);
    return ShapeError(msg);
  };

  Node out;
  out.kind = kind;
  out.args = args;
  for (Var v : inputs) out.inputs.push_back(v.id_);
  out.requires_grad = std::any_of(in.begin(), in.end(), [](const Node* p) { return p->requires_grad; });

  switch (kind) {
    case OpKind::matmul: {
      need(2);
      const Shape& sa = in[0]->shape;
      const Shape& sb = in[1]->shape;
      if (sa.size() > 2 || sb.size() > 2) throw mismatch();
      const MatView a = as_lhs(sa);
      const MatView b = as_rhs(sb);
      if (a.cols != b.rows) throw mismatch();
      if (sa.size() == 2 && sb.size() == 2) {
        out.shape = {a.rows, b.cols};
      } else if (sa.size() == 2) {
        out.shape = {a.rows};
      } else if (sb.size() == 2) {
        out.shape = {b.cols};
      } else {
        out.shape = {1};
      }
      out.value.assign(a.rows * b.cols, 0.0);
      gemm_acc(in[0]->data().data(), in[1]->data().data(), out.value.data(), a.rows, a.cols, b.cols);
      break;
    }
    case OpKind::add: {
      need(2);
      const Shape& sa = in[0]->shape;
      const Shape& sb = in[1]->shape;
      auto x = in[0]->data();
      auto y = in[1]->data();
      out.shape = sa;
      out.value.resize(x.size());
      if (sa == sb) {
        for (std::size_t i = 0; i < x.size(); ++i) out.value[i] = x[i] + y[i];
      } else if (sa.size() == 2 && sb.size() == 1 && sb[0] == sa[1]) {
        const std::size_t cols = sa[1];
        for (std::size_t i = 0; i < x.size(); ++i) out.value[i] = x[i] + y[i % cols];
      } else {
        throw mismatch();
      }
      break;
    }
    case OpKind::hadamard: {
      need(2);
      if (in[0]->shape != in[1]->shape) throw mismatch();
      auto x = in[0]->data();
      auto y = in[1]->data();
      out.shape = in[0]->shape;
      out.value.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) out.value[i] = x[i] * y[i];
      break;
    }
    case OpKind::scalar_mul: {
      need(1);
      if (!std::isfinite(args.scalar)) throw NonFiniteError("scalar_mul factor is not finite");
      auto x = in[0]->data();
      out.shape = in[0]->shape;
      out.value.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) out.value[i] = x[i] * args.scalar;
      break;
    }
    case OpKind::tanh:
    case OpKind::sigmoid:
    case OpKind::log:
    case OpKind::neg: {
      need(1);
      auto x = in[0]->data();
      out.shape = in[0]->shape;
      out.value.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        switch (kind) {
          case OpKind::tanh: out.value[i] = std::tanh(x[i]); break;
          case OpKind::sigmoid: out.value[i] = stable_sigmoid(x[i]); break;
          case OpKind::log: out.value[i] = std::log(x[i]); break;
          default: out.value[i] = -x[i]; break;
        }
      }
      break;
    }
    case OpKind::softmax_lastdim:
    case OpKind::log_softmax_lastdim: {
      need(1);
      const Shape& s = in[0]->shape;
      if (s.size() > 2) throw mismatch();
      const std::size_t cols = s.back();
      const std::size_t rows = numel(s) / cols;
      auto x = in[0]->data();
      out.shape = s;
      out.value.resize(x.size());
      for (std::size_t r = 0; r < rows; ++r) {
        if (kind == OpKind::softmax_lastdim) {
          softmax_row(x.data() + r * cols, out.value.data() + r * cols, cols);
        } else {
          log_softmax_row(x.data() + r * cols, out.value.data() + r * cols, cols);
        }
      }
      break;
    }
    case OpKind::concat_lastdim: {
      if (in.empty()) throw ShapeError("concat_lastdim needs at least one input");
      std::size_t total = 0;
      for (const Node* p : in) {
        if (p->shape.size() != 1) throw mismatch();
        total += p->shape[0];
      }
      out.shape = {total};
      out.value.reserve(total);
      for (const Node* p : in) out.value.insert(out.value.end(), p->data().begin(), p->data().end());
      break;
    }
    case OpKind::stack_rows: {
      if (in.empty()) throw ShapeError("stack_rows needs at least one input");
      const Shape& first = in[0]->shape;
      for (const Node* p : in) {
        if (p->shape.size() != 1 || p->shape != first) throw mismatch();
      }
      out.shape = {in.size(), first[0]};
      out.value.reserve(in.size() * first[0]);
      for (const Node* p : in) out.value.insert(out.value.end(), p->data().begin(), p->data().end());
      break;
    }
    case OpKind::slice_lastdim: {
      need(1);
      const Shape& s = in[0]->shape;
      if (s.size() != 1 || args.length == 0 || args.index + args.length > s[0]) throw mismatch();
      auto x = in[0]->data();
      out.shape = {args.length};
      out.value.assign(x.begin() + static_cast<std::ptrdiff_t>(args.index),
                       x.begin() + static_cast<std::ptrdiff_t>(args.index + args.length));
      break;
    }
    case OpKind::row_lookup: {
      need(1);
      const Shape& s = in[0]->shape;
      if (s.size() != 2) throw mismatch();
      if (args.index >= s[0]) {
        throw ShapeError("row_lookup index " + std::to_string(args.index) + " out of range " + to_string(s));
      }
      auto x = in[0]->data();
      out.shape = {s[1]};
      const auto begin = x.begin() + static_cast<std::ptrdiff_t>(args.index * s[1]);
      out.value.assign(begin, begin + static_cast<std::ptrdiff_t>(s[1]));
      break;
    }
    case OpKind::pick: {
      need(1);
      auto x = in[0]->data();
      if (args.index >= x.size()) {
        throw ShapeError("pick index " + std::to_string(args.index) + " out of range " +
                         to_string(in[0]->shape));
      }
      out.shape = {1};
      out.value = {x[args.index]};
      break;
    }
    case OpKind::sum:
    case OpKind::mean: {
      need(1);
      auto x = in[0]->data();
      double total = 0.0;
      for (double v : x) total += v;
      if (kind == OpKind::mean) total /= static_cast<double>(x.size());
      out.shape = {1};
      out.value = {total};
      break;
    }
    case OpKind::leaf:
    default:
      throw std::invalid_argument("unknown op kind " + std::to_string(static_cast<int>(kind)));
  }

  check_finite(out.value, op_name(kind));
  return Var(this, push(std::move(out)));
}

Var Tape::matmul(Var a, Var b) { return apply(OpKind::matmul, std::array{a, b}); }
Var Tape::add(Var a, Var b) { return apply(OpKind::add, std::array{a, b}); }
Var Tape::hadamard(Var a, Var b) { return apply(OpKind::hadamard, std::array{a, b}); }
Var Tape::scalar_mul(Var a, double factor) {
  return apply(OpKind::scalar_mul, std::array{a}, OpArgs{.scalar = factor});
}
Var Tape::tanh(Var a) { return apply(OpKind::tanh, std::array{a}); }
Var Tape::sigmoid(Var a) { return apply(OpKind::sigmoid, std::array{a}); }
Var Tape::softmax(Var a) { return apply(OpKind::softmax_lastdim, std::array{a}); }
Var Tape::log_softmax(Var a) { return apply(OpKind::log_softmax_lastdim, std::array{a}); }
Var Tape::concat(std::span<const Var> parts) { return apply(OpKind::concat_lastdim, parts); }
Var Tape::concat(std::initializer_list<Var> parts) {
  return apply(OpKind::concat_lastdim, std::span<const Var>(parts.begin(), parts.size()));
}
Var Tape::stack_rows(std::span<const Var> rows) { return apply(OpKind::stack_rows, rows); }
Var Tape::slice(Var a, std::size_t offset, std::size_t length) {
  return apply(OpKind::slice_lastdim, std::array{a}, OpArgs{.index = offset, .length = length});
}
Var Tape::row(Var matrix, std::size_t index) {
  return apply(OpKind::row_lookup, std::array{matrix}, OpArgs{.index = index});
}
Var Tape::pick(Var a, std::size_t index) {
  return apply(OpKind::pick, std::array{a}, OpArgs{.index = index});
}
Var Tape::sum(Var a) { return apply(OpKind::sum, std::array{a}); }
Var Tape::mean(Var a) { return apply(OpKind::mean, std::array{a}); }
Var Tape::log(Var a) { return apply(OpKind::log, std::array{a}); }
Var Tape::neg(Var a) { return apply(OpKind::neg, std::array{a}); }

// ---------------------------------------------------------------- Tape: backward

std::vector<double>& Tape::grad_of(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad.assign(numel(n.shape), 0.0);
  return n.grad;
}

void Tape::backprop(const Node& n) {
  const std::vector<double>& g = n.grad;
  auto input = [&](std::size_t k) -> const Node& { return nodes_[static_cast<std::size_t>(n.inputs[k])]; };
  auto wants = [&](std::size_t k) { return input(k).requires_grad; };

  switch (n.kind) {
    case OpKind::matmul: {
      const Node& a = input(0);
      const Node& b = input(1);
      const MatView av = as_lhs(a.shape);
      const MatView bv = as_rhs(b.shape);
      const std::size_t m = av.rows, k = av.cols, cols = bv.cols;
      const double* ad = a.data().data();
      const double* bd = b.data().data();
      if (wants(0)) {
        double* ga = grad_of(n.inputs[0]).data();
        // ga[i][p] += sum_j g[i][j] * b[p][j]
        for (std::size_t i = 0; i < m; ++i) {
          const double* gr = g.data() + i * cols;
          for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += dot(gr, bd + p * cols, cols);
        }
      }
      if (wants(1)) {
        double* gb = grad_of(n.inputs[1]).data();
        // gb[p][j] += sum_i a[i][p] * g[i][j]
        for (std::size_t i = 0; i < m; ++i) {
          const double* gr = g.data() + i * cols;
          const double* ar = ad + i * k;
          for (std::size_t p = 0; p < k; ++p) {
            const double s = ar[p];
            double* gbr = gb + p * cols;
            for (std::size_t j = 0; j < cols; ++j) gbr[j] += s * gr[j];
          }
        }
      }
      break;
    }
    case OpKind::add: {
      if (wants(0)) {
        auto& ga = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(1)) {
        auto& gb = grad_of(n.inputs[1]);
        const std::size_t cols = gb.size();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % cols] += g[i];
      }
      break;
    }
    case OpKind::hadamard: {
      auto x = input(0).data();
      auto y = input(1).data();
      if (wants(0)) {
        auto& ga = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
      }
      if (wants(1)) {
        auto& gb = grad_of(n.inputs[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
      }
      break;
    }
    case OpKind::scalar_mul: {
      auto& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.args.scalar;
      break;
    }
    case OpKind::tanh: {
      auto& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      break;
    }
    case OpKind::sigmoid: {
      auto& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
      break;
    }
    case OpKind::log: {
      auto x = input(0).data();
      auto& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
      break;
    }
    case OpKind::neg: {
      auto& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
      break;
    }
    case OpKind::softmax_lastdim: {
      auto& ga = grad_of(n.inputs[0]);
      const std::size_t cols = n.shape.back();
      for (std::size_t r = 0; r < g.size() / cols; ++r) {
        const double* y = n.value.data() + r * cols;
        const double* gr = g.data() + r * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * y[j];
        for (std::size_t j = 0; j < cols; ++j) ga[r * cols + j] += y[j] * (gr[j] - dot);
      }
      break;
    }
    case OpKind::log_softmax_lastdim: {
      auto& ga = grad_of(n.inputs[0]);
      const std::size_t cols = n.shape.back();
      for (std::size_t r = 0; r < g.size() / cols; ++r) {
        const double* y = n.value.data() + r * cols;
        const double* gr = g.data() + r * cols;
        double total = 0.0;
        for (std::size_t j = 0; j < cols; ++j) total += gr[j];
        for (std::size_t j = 0; j < cols; ++j) ga[r * cols + j] += gr[j] - std::exp(y[j]) * total;
      }
      break;
    }
    case OpKind::concat_lastdim:
    case OpKind::stack_rows: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t len = numel(input(k).shape);
        if (wants(k)) {
          auto& gk = grad_of(n.inputs[k]);
          for (std::size_t i = 0; i < len; ++i) gk[i] += g[offset + i];
        }
        offset += len;
      }
      break;
    }
    case OpKind::slice_lastdim: {
      auto& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[n.args.index + i] += g[i];
      break;
    }
    case OpKind::row_lookup: {
      auto& ga = grad_of(n.inputs[0]);
      const std::size_t cols = g.size();
      for (std::size_t i = 0; i < cols; ++i) ga[n.args.index * cols + i] += g[i];
      break;
    }
    case OpKind::pick: {
      grad_of(n.inputs[0])[n.args.index] += g[0];
      break;
    }
    case OpKind::sum:
    case OpKind::mean: {
      auto& ga = grad_of(n.inputs[0]);
      const double s = n.kind == OpKind::mean ? g[0] / static_cast<double>(ga.size()) : g[0];
      for (double& v : ga) v += s;
      break;
    }
    case OpKind::leaf:
      break;
  }
}

void Tape::run_backward(Var loss) {
  check_live();
  const Node& l = node(loss);
  if (numel(l.shape) != 1) throw ShapeError("backward() needs a scalar loss, got " + to_string(l.shape));
  consumed_ = true;
  grad_of(loss.id_)[0] = 1.0;
  for (int id = loss.id_; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.empty() || n.kind == OpKind::leaf) continue;
    backprop(n);
    check_finite(n.grad, "backward");
  }
}

GradientMap Tape::backward(Var loss) {
  run_backward(loss);
  GradientMap out;
  for (const Node& n : nodes_) {
    if (n.kind != OpKind::leaf || !n.requires_grad || n.name.empty()) continue;
    out[n.name] = n.grad.empty() ? std::vector<double>(numel(n.shape), 0.0) : n.grad;
  }
  return out;
}

void Tape::backward_into(Var loss, GradientMap& into, double scale) {
  run_backward(loss);
  for (const Node& n : nodes_) {
    if (n.kind != OpKind::leaf || !n.requires_grad || n.name.empty()) continue;
    auto& dst = into[n.name];
    if (dst.empty()) dst.assign(numel(n.shape), 0.0);
    if (n.grad.empty()) continue;
    if (dst.size() != n.grad.size()) throw ShapeError("gradient size mismatch for " + n.name);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * n.grad[i];
  }
}

// ---------------------------------------------------------------- finite differences

namespace {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-12, std::abs(analytic) + std::abs(numeric));
}

}  // namespace

double finite_difference_check(const std::function<Var(Tape&)>& f,
                               std::span<const std::pair<std::string, Tensor*>> params, double eps,
                               Stencil stencil) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_difference_check: eps must be positive");

  auto evaluate = [&]() {
    Tape tape;
    return tape.item(f(tape));
  };

  GradientMap analytic;
  double base = 0.0;
  {
    Tape tape;
    const Var loss = f(tape);
    base = tape.item(loss);
    analytic = tape.backward(loss);
  }
  if (evaluate() != base) throw std::runtime_error("finite_difference_check: function is not deterministic");

  double worst = 0.0;
  for (const auto& [name, tensor] : params) {
    auto it = analytic.find(name);
    const bool has_grad = it != analytic.end();
    auto values = tensor->mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      auto at = [&](double offset) {
        values[i] = saved + offset;
        const double v = evaluate();
        values[i] = saved;
        return v;
      };
      const double near = at(eps) - at(-eps);
      const double numeric = stencil == Stencil::second_order
                                 ? near / (2.0 * eps)
                                 : (8.0 * near - (at(2.0 * eps) - at(-2.0 * eps))) / (12.0 * eps);
      const double a = has_grad ? it->second[i] : 0.0;
      worst = std::max(worst, relative_error(a, numeric));
    }
  }
  return worst;
}

double finite_difference_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double eps,
                               Stencil stencil) {
  Tensor probe(x.shape(), std::vector<double>(x.values().begin(), x.values().end()), true);
  const std::pair<std::string, Tensor*> entry{"x", &probe};
  return finite_difference_check([&](Tape& tape) { return f(tape, tape.parameter(probe, "x")); },
                                 std::span(&entry, 1), eps, stencil);
}

}  // namespace lcseq::ad
