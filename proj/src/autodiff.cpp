#include "udainv/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "udainv/error.hpp"
#include "udainv/kernels.hpp"

namespace udainv::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::Square: return "square";
    case Op::Abs: return "abs";
    case Op::Sqrt: return "sqrt";
    case Op::Clamp: return "clamp";
    case Op::Sum: return "sum";
    case Op::SumAxis: return "sum_axis";
    case Op::Mean: return "mean";
    case Op::MeanAxis: return "mean_axis";
    case Op::Concat: return "concat";
    case Op::SliceCols: return "slice_cols";
  }
  return "?";
}

const Tensor& Var::value() const { return tape_->value(*this); }
const Tensor& Var::grad() const { return tape_->grad(*this); }

double Var::item() const {
  const Tensor& v = value();
  if (v.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_string(v.shape()));
  return v[0];
}

Var Tape::constant(Tensor value) {
  backward_done_ = false;
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::parameter(Tensor value) {
  Var v = constant(std::move(value));
  nodes_.back().requires_grad = true;
  return v;
}

Var Tape::record(Op op, Tensor value, std::initializer_list<Var> inputs, double p0, double p1) {
  return record(op, std::move(value), std::vector<Var>(inputs), p0, p1);
}

Var Tape::record(Op op, Tensor value, const std::vector<Var>& inputs, double p0, double p1) {
  backward_done_ = false;
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.p0 = p0;
  n.p1 = p1;
  n.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw ValidationError(std::string(op_name(op)) + ": input from another tape");
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

const Tensor& Tape::value(Var v) const { return nodes_.at(v.id()).value; }

const Tensor& Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (n.grad.size() == 0)
    throw ValidationError("no gradient available for node " + std::to_string(v.id()) +
                          " (run backward first)");
  return n.grad;
}

Tensor& Tape::ensure_grad(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ValidationError("backward: loss belongs to another tape");
  if (loss.value().size() != 1)
    throw ShapeError("backward: loss must be scalar, got shape " + shape_string(loss.shape()));
  if (backward_done_)
    throw ValidationError("backward: called twice without a new forward pass");
  for (Node& n : nodes_) n.grad = Tensor();
  ensure_grad(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.requires_grad || n.op == Op::Leaf || n.grad.size() == 0) continue;
    backward_node(n);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].op == Op::Leaf && nodes_[i].requires_grad) ensure_grad(static_cast<std::uint32_t>(i));
  backward_done_ = true;
}

namespace {

struct Dims {
  std::size_t rows, cols;
};

Dims dims(const Tensor& t) { return {t.rows(), t.cols()}; }

std::vector<std::size_t> broadcast_shape(Op op, const Tensor& a, const Tensor& b) {
  const Dims da = dims(a), db = dims(b);
  auto join = [&](std::size_t x, std::size_t y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw ShapeError(std::string(op_name(op)) + ": cannot broadcast shapes " +
                     shape_string(a.shape()) + " and " + shape_string(b.shape()));
  };
  const std::size_t r = join(da.rows, db.rows);
  const std::size_t c = join(da.cols, db.cols);
  if (r == 1 && a.rank() == 1 && b.rank() == 1) return {c};
  return {r, c};
}

inline std::size_t bidx(const Dims& d, std::size_t r, std::size_t c) {
  return (d.rows == 1 ? 0 : r) * d.cols + (d.cols == 1 ? 0 : c);
}

template <class F>
Var binary(Op op, Var a, Var b, F f) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(broadcast_shape(op, av, bv));
  const Dims da = dims(av), db = dims(bv), dout = dims(out);
  if (da.rows == dout.rows && da.cols == dout.cols && db.rows == dout.rows && db.cols == dout.cols) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
  } else {
    for (std::size_t r = 0; r < dout.rows; ++r)
      for (std::size_t c = 0; c < dout.cols; ++c)
        out[r * dout.cols + c] = f(av[bidx(da, r, c)], bv[bidx(db, r, c)]);
  }
  return a.tape().record(op, std::move(out), {a, b});
}

template <class F>
Var unary(Op op, Var a, F f, double p0 = 0.0, double p1 = 0.0) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return a.tape().record(op, std::move(out), {a}, p0, p1);
}

}  // namespace

void Tape::backward_node(const Node& node) {
  const Tensor& g = node.grad;
  const Tensor& y = node.value;
  auto in = [&](std::size_t k) -> const Node& { return nodes_[node.inputs[k]]; };
  auto wants = [&](std::size_t k) { return nodes_[node.inputs[k]].requires_grad; };

  switch (node.op) {
    case Op::Leaf:
      return;
    case Op::MatMul: {
      const Tensor& a = in(0).value;
      const Tensor& b = in(1).value;
      const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
      if (wants(0)) kernels::matmul_bt_acc(g.values(), b.values(), ensure_grad(node.inputs[0]).values(), m, n, k);
      if (wants(1)) kernels::matmul_at_acc(a.values(), g.values(), ensure_grad(node.inputs[1]).values(), m, k, n);
      return;
    }
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      const Tensor& a = in(0).value;
      const Tensor& b = in(1).value;
      const Dims da = dims(a), db = dims(b), dout = dims(y);
      const bool wa = wants(0), wb = wants(1);
      Tensor* ga = wa ? &ensure_grad(node.inputs[0]) : nullptr;
      Tensor* gb = wb ? &ensure_grad(node.inputs[1]) : nullptr;
      for (std::size_t r = 0; r < dout.rows; ++r) {
        for (std::size_t c = 0; c < dout.cols; ++c) {
          const double go = g[r * dout.cols + c];
          const std::size_t ia = bidx(da, r, c), ib = bidx(db, r, c);
          double pa = 1.0, pb = 1.0;
          switch (node.op) {
            case Op::Sub: pb = -1.0; break;
            case Op::Mul: pa = b[ib]; pb = a[ia]; break;
            case Op::Div: pa = 1.0 / b[ib]; pb = -a[ia] / (b[ib] * b[ib]); break;
            default: break;
          }
          if (wa) (*ga)[ia] += go * pa;
          if (wb) (*gb)[ib] += go * pb;
        }
      }
      return;
    }
    default:
      break;
  }

  if (!wants(0) && node.op != Op::Concat) return;
  const Tensor& x = in(0).value;

  switch (node.op) {
    case Op::Exp:
    case Op::Log:
    case Op::Tanh:
    case Op::Sigmoid:
    case Op::LeakyRelu:
    case Op::Square:
    case Op::Abs:
    case Op::Sqrt:
    case Op::Clamp: {
      Tensor& gx = ensure_grad(node.inputs[0]);
      for (std::size_t i = 0; i < x.size(); ++i) {
        double d = 0.0;
        switch (node.op) {
          case Op::Exp: d = y[i]; break;
          case Op::Log: d = 1.0 / x[i]; break;
          case Op::Tanh: d = 1.0 - y[i] * y[i]; break;
          case Op::Sigmoid: d = y[i] * (1.0 - y[i]); break;
          case Op::LeakyRelu: d = x[i] > 0.0 ? 1.0 : node.p0; break;
          case Op::Square: d = 2.0 * x[i]; break;
          case Op::Abs: d = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0); break;
          case Op::Sqrt: d = 0.5 / y[i]; break;
          case Op::Clamp: d = (x[i] >= node.p0 && x[i] <= node.p1) ? 1.0 : 0.0; break;
          default: break;
        }
        gx[i] += g[i] * d;
      }
      return;
    }
    case Op::Sum:
    case Op::Mean: {
      Tensor& gx = ensure_grad(node.inputs[0]);
      const double s = node.op == Op::Mean ? g[0] / static_cast<double>(x.size()) : g[0];
      for (std::size_t i = 0; i < x.size(); ++i) gx[i] += s;
      return;
    }
    case Op::SumAxis:
    case Op::MeanAxis: {
      Tensor& gx = ensure_grad(node.inputs[0]);
      const Dims dx = dims(x);
      const int axis = static_cast<int>(node.p0);
      const double scale =
          node.op == Op::MeanAxis ? 1.0 / static_cast<double>(axis == 0 ? dx.rows : dx.cols) : 1.0;
      for (std::size_t r = 0; r < dx.rows; ++r)
        for (std::size_t c = 0; c < dx.cols; ++c)
          gx[r * dx.cols + c] += scale * (axis == 0 ? g[c] : g[r]);
      return;
    }
    case Op::Concat: {
      const int axis = static_cast<int>(node.p0);
      const Dims dout = dims(y);
      std::size_t offset = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        const Dims dk = dims(in(k).value);
        if (wants(k)) {
          Tensor& gk = ensure_grad(node.inputs[k]);
          for (std::size_t r = 0; r < dk.rows; ++r)
            for (std::size_t c = 0; c < dk.cols; ++c)
              gk[r * dk.cols + c] += axis == 0 ? g[(offset + r) * dout.cols + c]
                                               : g[r * dout.cols + offset + c];
        }
        offset += axis == 0 ? dk.rows : dk.cols;
      }
      return;
    }
    case Op::SliceCols: {
      Tensor& gx = ensure_grad(node.inputs[0]);
      const Dims dx = dims(x), dout = dims(y);
      const auto begin = static_cast<std::size_t>(node.p0);
      for (std::size_t r = 0; r < dout.rows; ++r)
        for (std::size_t c = 0; c < dout.cols; ++c) gx[r * dx.cols + begin + c] += g[r * dout.cols + c];
      return;
    }
    default:
      return;
  }
}

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (bv.rank() != 2 || av.cols() != bv.rows())
    throw ShapeError("matmul: incompatible shapes " + shape_string(av.shape()) + " and " +
                     shape_string(bv.shape()));
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out(av.rank() == 2 ? std::vector<std::size_t>{m, n} : std::vector<std::size_t>{n});
  kernels::matmul(av.values(), bv.values(), out.values(), m, k, n);
  return a.tape().record(Op::MatMul, std::move(out), {a, b});
}

Var add(Var a, Var b) { return binary(Op::Add, a, b, [](double x, double y) { return x + y; }); }
Var sub(Var a, Var b) { return binary(Op::Sub, a, b, [](double x, double y) { return x - y; }); }
Var mul(Var a, Var b) { return binary(Op::Mul, a, b, [](double x, double y) { return x * y; }); }
Var div(Var a, Var b) { return binary(Op::Div, a, b, [](double x, double y) { return x / y; }); }

Var exp(Var a) { return unary(Op::Exp, a, [](double x) { return std::exp(x); }); }

Var log(Var a) {
  const Tensor& av = a.value();
  for (std::size_t i = 0; i < av.size(); ++i)
    if (!(av[i] > 0.0))
      throw DomainError("log: non-positive input " + std::to_string(av[i]) + " at index " +
                        std::to_string(i));
  return unary(Op::Log, a, [](double x) { return std::log(x); });
}

Var tanh(Var a) { return unary(Op::Tanh, a, [](double x) { return std::tanh(x); }); }

Var sigmoid(Var a) {
  return unary(Op::Sigmoid, a, [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

Var leaky_relu(Var a, double slope) {
  return unary(Op::LeakyRelu, a, [slope](double x) { return x > 0.0 ? x : slope * x; }, slope);
}

Var square(Var a) { return unary(Op::Square, a, [](double x) { return x * x; }); }
Var abs(Var a) { return unary(Op::Abs, a, [](double x) { return std::fabs(x); }); }

Var sqrt(Var a) {
  const Tensor& av = a.value();
  for (std::size_t i = 0; i < av.size(); ++i)
    if (av[i] < 0.0)
      throw DomainError("sqrt: negative input " + std::to_string(av[i]) + " at index " +
                        std::to_string(i));
  return unary(Op::Sqrt, a, [](double x) { return std::sqrt(x); });
}

Var clamp(Var a, double lo, double hi) {
  if (lo > hi) throw ValidationError("clamp: lower bound exceeds upper bound");
  return unary(Op::Clamp, a, [lo, hi](double x) { return std::clamp(x, lo, hi); }, lo, hi);
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape().record(Op::Sum, Tensor::scalar(s), {a});
}

Var mean(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape().record(Op::Mean, Tensor::scalar(s / static_cast<double>(a.value().size())), {a});
}

namespace {

Var reduce_axis(Op op, Var a, int axis) {
  if (axis != 0 && axis != 1)
    throw ShapeError(std::string(op_name(op)) + ": axis must be 0 or 1, got " + std::to_string(axis));
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out(axis == 0 ? std::vector<std::size_t>{1, cols} : std::vector<std::size_t>{rows, 1});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[axis == 0 ? c : r] += av[r * cols + c];
  if (op == Op::MeanAxis) {
    const double n = static_cast<double>(axis == 0 ? rows : cols);
    for (double& v : out.values()) v /= n;
  }
  return a.tape().record(op, std::move(out), {a}, axis);
}

}  // namespace

Var sum(Var a, int axis) { return reduce_axis(Op::SumAxis, a, axis); }
Var mean(Var a, int axis) { return reduce_axis(Op::MeanAxis, a, axis); }

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  const Tensor& first = parts.front().value();
  std::size_t rows = 0, cols = 0;
  bool any_rank2 = false;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    any_rank2 = any_rank2 || v.rank() == 2;
    if (axis == 0) {
      if (v.cols() != first.cols())
        throw ShapeError("concat: column mismatch " + shape_string(first.shape()) + " and " +
                         shape_string(v.shape()));
      rows += v.rows();
      cols = v.cols();
    } else {
      if (v.rows() != first.rows())
        throw ShapeError("concat: row mismatch " + shape_string(first.shape()) + " and " +
                         shape_string(v.shape()));
      cols += v.cols();
      rows = v.rows();
    }
  }
  Tensor out(axis == 0 || any_rank2 ? std::vector<std::size_t>{rows, cols}
                                    : std::vector<std::size_t>{cols});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < v.rows(); ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) {
        const double x = v[r * v.cols() + c];
        if (axis == 0)
          out[(offset + r) * cols + c] = x;
        else
          out[r * cols + offset + c] = x;
      }
    offset += axis == 0 ? v.rows() : v.cols();
  }
  return parts.front().tape().record(Op::Concat, std::move(out), parts, axis);
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  if (begin >= end || end > av.cols())
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for shape " + shape_string(av.shape()));
  const std::size_t rows = av.rows(), width = end - begin;
  Tensor out(av.rank() == 2 ? std::vector<std::size_t>{rows, width} : std::vector<std::size_t>{width});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] = av[r * av.cols() + begin + c];
  return a.tape().record(Op::SliceCols, std::move(out), {a}, static_cast<double>(begin),
                         static_cast<double>(end));
}

Var forward_eval(Tape& tape, const Graph& graph, std::span<const Tensor> inputs) {
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(tape.parameter(t));
  return graph(tape, vars);
}

Tensor gradient(const ScalarFn& f, const Tensor& point, double* value) {
  Tape tape;
  Var x = tape.parameter(point);
  Var y = f(tape, x);
  tape.backward(y);
  if (value) *value = y.item();
  return x.grad();
}

namespace {

double eval_checked(const ScalarFn& f, const Tensor& point) {
  Tape tape;
  Var y = f(tape, tape.constant(point));
  for (std::size_t i = 0; i < tape.size(); ++i)
    if (!tape.value(Var(&tape, static_cast<std::uint32_t>(i))).all_finite())
      throw DomainError(std::string("grad_check: non-finite intermediate in ") + op_name(tape.op(i)));
  return y.item();
}

}  // namespace

GradCheckResult grad_check_detailed(const ScalarFn& f, const Tensor& point, double step) {
  if (!(step > 0.0)) throw ValidationError("grad_check: step must be positive");
  eval_checked(f, point);
  const Tensor analytic = gradient(f, point);
  if (!analytic.all_finite()) throw DomainError("grad_check: non-finite analytic gradient");
  GradCheckResult result;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const double up = eval_checked(f, probe);
    probe[i] = point[i] - step;
    const double down = eval_checked(f, probe);
    probe[i] = point[i];
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::fabs(analytic[i] - numeric) / std::max(1e-12, std::fabs(numeric));
    if (i == 0 || err > result.max_rel_error) result = {err, i, analytic[i], numeric};
  }
  return result;
}

double grad_check(const ScalarFn& f, const Tensor& point, double step) {
  return grad_check_detailed(f, point, step).max_rel_error;
}

}  // namespace udainv::ad
