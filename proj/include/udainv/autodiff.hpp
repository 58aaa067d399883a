#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "udainv/tensor.hpp"

// Reverse-mode automatic differentiation over dense double tensors.
//
// A Tape owns every value produced during one forward pass. Var is a cheap
// handle (tape pointer + node index). Parameters live outside the tape as
// plain Tensors and are re-registered on a fresh tape for every pass, so a
// tape never caches stale parameter values.
//
// Broadcasting follows the matrix view of a tensor (rank 1 == one row): each
// of rows/cols must match or be 1 on one side.
namespace udainv::ad {

enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  Add,
  Sub,
  Mul,
  Div,
  Exp,
  Log,
  Tanh,
  Sigmoid,
  LeakyRelu,
  Square,
  Abs,
  Sqrt,
  Clamp,
  Sum,
  SumAxis,
  Mean,
  MeanAxis,
  Concat,
  SliceCols,
};

const char* op_name(Op op);

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Tensor& grad() const;
  const std::vector<std::size_t>& shape() const { return value().shape(); }
  double item() const;

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var constant(double value) { return constant(Tensor::scalar(value)); }
  // Leaf that receives a gradient on backward().
  Var parameter(Tensor value);

  // Accumulates d(loss)/d(node) for every node that depends on a parameter.
  // Parameters not reachable from loss end up with a zero gradient.
  void backward(Var loss);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  Op op(std::size_t index) const { return nodes_[index].op; }

  // Used by the primitive functions below; not part of the user surface.
  Var record(Op op, Tensor value, std::initializer_list<Var> inputs, double p0 = 0.0,
             double p1 = 0.0);
  Var record(Op op, Tensor value, const std::vector<Var>& inputs, double p0 = 0.0,
             double p1 = 0.0);

 private:
  struct Node {
    Op op = Op::Leaf;
    Tensor value;
    Tensor grad;
    std::vector<std::uint32_t> inputs;
    double p0 = 0.0;  // op parameter: slope, clamp lo, axis, slice begin
    double p1 = 0.0;  // op parameter: clamp hi, slice end
    bool requires_grad = false;
  };

  void backward_node(const Node& node);
  Tensor& ensure_grad(std::uint32_t id);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var exp(Var a);
Var log(Var a);  // DomainError on non-positive input
Var tanh(Var a);
Var sigmoid(Var a);
Var leaky_relu(Var a, double slope);
Var square(Var a);
Var abs(Var a);   // subgradient 0 at the origin
Var sqrt(Var a);  // DomainError on negative input
Var clamp(Var a, double lo, double hi);
Var sum(Var a);
Var sum(Var a, int axis);  // keeps the reduced axis with extent 1
Var mean(Var a);
Var mean(Var a, int axis);
Var concat(const std::vector<Var>& parts, int axis);
Var slice_cols(Var a, std::size_t begin, std::size_t end);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator+(Var a, double s) { return add(a, a.tape().constant(s)); }
inline Var operator+(double s, Var a) { return add(a.tape().constant(s), a); }
inline Var operator-(Var a, double s) { return sub(a, a.tape().constant(s)); }
inline Var operator-(double s, Var a) { return sub(a.tape().constant(s), a); }
inline Var operator*(Var a, double s) { return mul(a, a.tape().constant(s)); }
inline Var operator*(double s, Var a) { return mul(a.tape().constant(s), a); }
inline Var operator/(Var a, double s) { return div(a, a.tape().constant(s)); }
inline Var operator/(double s, Var a) { return div(a.tape().constant(s), a); }
inline Var operator-(Var a) { return mul(a, a.tape().constant(-1.0)); }

// Builds a graph on the given tape; inputs are registered as parameters.
using Graph = std::function<Var(Tape&, std::span<const Var>)>;
Var forward_eval(Tape& tape, const Graph& graph, std::span<const Tensor> inputs);

// Scalar-valued function of one tensor, built on the supplied tape.
using ScalarFn = std::function<Var(Tape&, Var)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares the tape gradient of f at point against central differences.
// Relative error per coordinate: |analytic - numeric| / max(1e-12, |numeric|).
GradCheckResult grad_check_detailed(const ScalarFn& f, const Tensor& point, double step);
double grad_check(const ScalarFn& f, const Tensor& point, double step);

// Value and gradient of f at point.
Tensor gradient(const ScalarFn& f, const Tensor& point, double* value = nullptr);

}  // namespace udainv::ad
