#pragma once

// Reverse-mode automatic differentiation over dense 64-bit arrays.
//
// A Tape records every primitive evaluated during a forward pass. Values live
// on the tape; parameters are referenced (not copied) and must outlive it.
// backward() walks the record in reverse and returns d loss / d parameter for
// every named leaf that requires a gradient.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace lcseq::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Dense row-major array. Scalars have shape {1}.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  // Callers writing through this view must keep the values finite.
  std::span<double> mutable_values() noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double item() const;

  bool requires_grad() const noexcept { return requires_grad_; }
  void set_requires_grad(bool on) noexcept { requires_grad_ = on; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
  bool requires_grad_ = false;
};

enum class OpKind : std::uint8_t {
  leaf,
  matmul,
  add,
  hadamard,
  scalar_mul,
  tanh,
  sigmoid,
  softmax_lastdim,
  log_softmax_lastdim,
  concat_lastdim,
  stack_rows,
  slice_lastdim,
  row_lookup,
  pick,
  sum,
  mean,
  log,
  neg,
};

const char* op_name(OpKind kind);

/// Non-tensor operands: scalar_mul factor, row_lookup/pick index, slice offset+length.
struct OpArgs {
  double scalar = 0.0;
  std::size_t index = 0;
  std::size_t length = 0;
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  int id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(const Tape* tape, int id) : tape_(tape), id_(id) {}
  const Tape* tape_ = nullptr;
  int id_ = -1;
};

using GradientMap = std::map<std::string, std::vector<double>, std::less<>>;

/// Adds `scale * from` into `into`, creating entries as needed.
void accumulate(GradientMap& into, const GradientMap& from, double scale = 1.0);

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Tensor value);
  /// Registers `param` as a leaf (once per tape; repeated calls return the
  /// same handle). Gradients are reported under `name` when
  /// param.requires_grad() is set.
  Var parameter(const Tensor& param, std::string name);

  Var apply(OpKind kind, std::span<const Var> inputs, const OpArgs& args = {});

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scalar_mul(Var a, double factor);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softmax(Var a);
  Var log_softmax(Var a);
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts);
  Var stack_rows(std::span<const Var> rows);
  Var slice(Var a, std::size_t offset, std::size_t length);
  Var row(Var matrix, std::size_t index);
  Var pick(Var a, std::size_t index);
  Var sum(Var a);
  Var mean(Var a);
  Var log(Var a);
  Var neg(Var a);

  const Shape& shape(Var v) const;
  std::span<const double> value(Var v) const;
  double item(Var v) const;
  Tensor tensor(Var v) const;
  bool requires_grad(Var v) const;

  /// Consumes the tape. Throws TapeError when called twice.
  GradientMap backward(Var loss);
  /// As backward(), adding `scale * gradient` into `into`.
  void backward_into(Var loss, GradientMap& into, double scale = 1.0);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

 private:
  struct Node {
    OpKind kind = OpKind::leaf;
    std::vector<int> inputs;
    Shape shape;
    std::vector<double> value;
    const double* external = nullptr;
    std::vector<double> grad;
    OpArgs args;
    bool requires_grad = false;
    std::string name;

    std::span<const double> data() const {
      return external ? std::span<const double>(external, numel(shape))
                      : std::span<const double>(value);
    }
  };

  const Node& node(Var v) const;
  int push(Node node);
  void check_live() const;
  void run_backward(Var loss);
  void backprop(const Node& n);
  std::vector<double>& grad_of(int id);

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, int> param_ids_;
  bool consumed_ = false;
};

/// Central difference stencils. `fourth_order` uses f(x +- h) and f(x +- 2h);
/// it tolerates a larger h, which matters when some gradient coordinates are
/// close to the rounding noise of a second-order estimate.
enum class Stencil { second_order, fourth_order };

/// Max over coordinates of |analytic - numeric| / max(1e-12, |analytic| + |numeric|),
/// using central differences with step `eps`. Throws std::runtime_error when two
/// evaluations of `f` at the same point disagree.
double finite_difference_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double eps,
                               Stencil stencil = Stencil::second_order);

/// Multi-parameter form: `f` must register every tensor in `params` via
/// Tape::parameter. Each tensor is perturbed in place and restored.
double finite_difference_check(const std::function<Var(Tape&)>& f,
                               std::span<const std::pair<std::string, Tensor*>> params, double eps,
                               Stencil stencil = Stencil::second_order);

}  // namespace lcseq::ad
