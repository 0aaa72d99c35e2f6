// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fpflow::grad {

/// Dense float64 tensor. Batches are stored one sample per row.
using Tensor = Eigen::MatrixXd;
using NodeId = std::size_t;

/// Closed operation set. Anything outside it cannot be recorded.
enum class Op : std::uint8_t {
  leaf,
  matmul,
  add,        // same shape, or (rows x cols) + (1 x cols) bias broadcast
  sub,        // same broadcast rule as add
  mul,        // elementwise, same shape
  exp,
  tanh,
  sum,
  mean,
  max_const,  // elementwise max(x, c) for a constant c
  slice,      // contiguous block of columns
  concat,     // column concatenation
  scale,      // multiplication by a constant scalar
};

/// Reduction extent for sum/mean: the whole tensor (1x1) or each row (rows x 1).
enum class Axis : std::uint8_t { all, row };

inline std::string_view op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::matmul: return "matmul";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::exp: return "exp";
    case Op::tanh: return "tanh";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::max_const: return "max_const";
    case Op::slice: return "slice";
    case Op::concat: return "concat";
    case Op::scale: return "scale";
  }
  return "?";
}

/// Non-tensor arguments of an operation.
struct OpArgs {
  double constant = 0.0;  // scale factor or max constant
  Eigen::Index begin = 0;
  Eigen::Index count = 0;
  Axis axis = Axis::all;
};

struct Node {
  Tensor value;
  Tensor grad;
  Op op = Op::leaf;
  std::array<NodeId, 2> parents{};
  std::uint8_t arity = 0;
  bool requires_grad = false;
  OpArgs args;
};

/// Append-only record of eagerly evaluated operations.
///
/// A tape is single-threaded. Parents always precede their children, so the
/// reverse of the insertion order is a valid topological order for backward.
class Tape {
 public:
  /// Leaf whose gradient is tracked (a trainable parameter or an input under test).
  NodeId variable(Tensor value) { return push_leaf(std::move(value), true); }

  /// Leaf that never receives a gradient.
  NodeId constant(Tensor value) { return push_leaf(std::move(value), false); }

  NodeId record(Op op, std::initializer_list<NodeId> inputs, OpArgs args = {});

  NodeId matmul(NodeId a, NodeId b) { return record(Op::matmul, {a, b}); }
  NodeId add(NodeId a, NodeId b) { return record(Op::add, {a, b}); }
  NodeId sub(NodeId a, NodeId b) { return record(Op::sub, {a, b}); }
  NodeId mul(NodeId a, NodeId b) { return record(Op::mul, {a, b}); }
  NodeId exp(NodeId a) { return record(Op::exp, {a}); }
  NodeId tanh(NodeId a) { return record(Op::tanh, {a}); }
  NodeId sum(NodeId a, Axis axis = Axis::all) {
    return record(Op::sum, {a}, {.axis = axis});
  }
  NodeId mean(NodeId a, Axis axis = Axis::all) {
    return record(Op::mean, {a}, {.axis = axis});
  }
  NodeId max_with(NodeId a, double c) {
    return record(Op::max_const, {a}, {.constant = c});
  }
  NodeId slice(NodeId a, Eigen::Index begin, Eigen::Index count) {
    return record(Op::slice, {a}, {.begin = begin, .count = count});
  }
  NodeId concat(NodeId a, NodeId b) { return record(Op::concat, {a, b}); }
  NodeId scale(NodeId a, double c) {
    return record(Op::scale, {a}, {.constant = c});
  }

  /// Reverse accumulation from a 1x1 node. All gradients are zeroed first, so
  /// calling this twice on the same tape yields the same gradients.
  void backward(NodeId loss);

  const Tensor& value(NodeId id) const { return at(id).value; }
  double scalar(NodeId id) const;

  /// Gradient of the last backward() loss with respect to this node. Nodes that
  /// do not depend on any variable report a zero tensor of the value's shape.
  const Tensor& grad(NodeId id) const { return at(id).grad; }
  bool requires_grad(NodeId id) const { return at(id).requires_grad; }

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(NodeId id) const { return at(id); }
  void clear() { nodes_.clear(); }

 private:
  NodeId push_leaf(Tensor value, bool requires_grad);
  const Node& at(NodeId id) const;
  Node& at(NodeId id);

  [[noreturn]] void shape_error(Op op, std::initializer_list<NodeId> inputs,
                                std::string_view what) const;

  std::vector<Node> nodes_;
};

namespace detail {

inline std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

inline bool is_row_broadcast(const Tensor& a, const Tensor& b) {
  return b.rows() == 1 && a.cols() == b.cols() && a.rows() != 1;
}

}  // namespace detail

inline NodeId Tape::push_leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

inline const Node& Tape::at(NodeId id) const {
  if (id >= nodes_.size()) {
    throw std::out_of_range("tape: node " + std::to_string(id) +
                            " does not exist (tape size " +
                            std::to_string(nodes_.size()) + ")");
  }
  return nodes_[id];
}

inline Node& Tape::at(NodeId id) {
  return const_cast<Node&>(static_cast<const Tape&>(*this).at(id));
}

inline double Tape::scalar(NodeId id) const {
  const Tensor& v = value(id);
  if (v.rows() != 1 || v.cols() != 1) {
    throw std::invalid_argument("tape: node " + std::to_string(id) +
                                " is not scalar (" + detail::shape_str(v) + ")");
  }
  return v(0, 0);
}

inline void Tape::shape_error(Op op, std::initializer_list<NodeId> inputs,
                              std::string_view what) const {
  std::ostringstream os;
  os << "tape: shape mismatch in " << op_name(op) << ": ";
  bool first = true;
  for (NodeId id : inputs) {
    os << (first ? "" : ", ") << detail::shape_str(nodes_[id].value);
    first = false;
  }
  if (!what.empty()) os << " (" << what << ")";
  throw std::invalid_argument(os.str());
}

inline NodeId Tape::record(Op op, std::initializer_list<NodeId> inputs,
                           OpArgs args) {
  const std::size_t expected =
      (op == Op::matmul || op == Op::add || op == Op::sub || op == Op::mul ||
       op == Op::concat)
          ? 2
          : 1;
  if (op == Op::leaf) {
    throw std::invalid_argument("tape: leaves are created with variable()/constant()");
  }
  if (inputs.size() != expected) {
    throw std::invalid_argument("tape: " + std::string(op_name(op)) + " takes " +
                                std::to_string(expected) + " input(s), got " +
                                std::to_string(inputs.size()));
  }
  for (NodeId id : inputs) at(id);

  const NodeId ia = *inputs.begin();
  const NodeId ib = expected == 2 ? *(inputs.begin() + 1) : ia;
  const Tensor& a = nodes_[ia].value;
  const Tensor& b = nodes_[ib].value;

  Node n;
  n.op = op;
  n.arity = static_cast<std::uint8_t>(expected);
  n.parents = {ia, ib};
  n.args = args;
  n.requires_grad = nodes_[ia].requires_grad ||
                    (expected == 2 && nodes_[ib].requires_grad);

  switch (op) {
    case Op::matmul:
      if (a.cols() != b.rows()) shape_error(op, inputs, "inner dimensions differ");
      n.value.noalias() = a * b;
      break;
    case Op::add:
    case Op::sub: {
      const double sign = op == Op::add ? 1.0 : -1.0;
      if (a.rows() == b.rows() && a.cols() == b.cols()) {
        n.value = a + sign * b;
      } else if (detail::is_row_broadcast(a, b)) {
        n.value = a;
        n.value.rowwise() += sign * b.row(0);
      } else {
        shape_error(op, inputs, "expected equal shapes or a 1-row bias");
      }
      break;
    }
    case Op::mul:
      if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, inputs, "");
      n.value = a.cwiseProduct(b);
      break;
    case Op::exp:
      n.value = a.array().exp().matrix();
      break;
    case Op::tanh:
      n.value = a.array().tanh().matrix();
      break;
    case Op::sum:
    case Op::mean: {
      const double div = op == Op::mean
                             ? (args.axis == Axis::all ? double(a.size()) : double(a.cols()))
                             : 1.0;
      if (a.size() == 0) shape_error(op, inputs, "empty reduction");
      if (args.axis == Axis::all) {
        n.value = Tensor::Constant(1, 1, a.sum() / div);
      } else {
        n.value = a.rowwise().sum() / div;
      }
      break;
    }
    case Op::max_const:
      n.value = a.array().max(args.constant).matrix();
      break;
    case Op::slice:
      if (args.begin < 0 || args.count < 0 || args.begin + args.count > a.cols()) {
        shape_error(op, inputs,
                    "columns [" + std::to_string(args.begin) + ", " +
                        std::to_string(args.begin + args.count) + ") out of range");
      }
      n.value = a.middleCols(args.begin, args.count);
      break;
    case Op::concat:
      if (a.rows() != b.rows()) shape_error(op, inputs, "row counts differ");
      n.value.resize(a.rows(), a.cols() + b.cols());
      n.value << a, b;
      break;
    case Op::scale:
      n.value = args.constant * a;
      break;
    case Op::leaf:
      break;
  }
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

inline void Tape::backward(NodeId loss) {
  const Tensor& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw std::invalid_argument("tape: backward needs a scalar loss, got " +
                                detail::shape_str(lv));
  }
  for (Node& n : nodes_) n.grad.setZero(n.value.rows(), n.value.cols());
  nodes_[loss].grad(0, 0) = 1.0;

  for (NodeId i = loss + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.op == Op::leaf) continue;
    const Tensor& g = n.grad;
    Node& pa = nodes_[n.parents[0]];
    Node& pb = nodes_[n.parents[1]];

    switch (n.op) {
      case Op::matmul:
        if (pa.requires_grad) pa.grad.noalias() += g * pb.value.transpose();
        if (pb.requires_grad) pb.grad.noalias() += pa.value.transpose() * g;
        break;
      case Op::add:
      case Op::sub: {
        const double sign = n.op == Op::add ? 1.0 : -1.0;
        if (pa.requires_grad) pa.grad += g;
        if (pb.requires_grad) {
          if (pb.value.rows() == g.rows()) {
            pb.grad += sign * g;
          } else {
            pb.grad += sign * g.colwise().sum();
          }
        }
        break;
      }
      case Op::mul:
        if (pa.requires_grad) pa.grad += g.cwiseProduct(pb.value);
        if (pb.requires_grad) pb.grad += g.cwiseProduct(pa.value);
        break;
      case Op::exp:
        pa.grad += g.cwiseProduct(n.value);
        break;
      case Op::tanh:
        pa.grad.array() += g.array() * (1.0 - n.value.array().square());
        break;
      case Op::sum:
      case Op::mean: {
        const Tensor& x = pa.value;
        const double div = n.op == Op::mean
                               ? (n.args.axis == Axis::all ? double(x.size()) : double(x.cols()))
                               : 1.0;
        if (n.args.axis == Axis::all) {
          pa.grad.array() += g(0, 0) / div;
        } else {
          pa.grad.colwise() += g.col(0) / div;
        }
        break;
      }
      case Op::max_const:
        // Subgradient 0 at the kink.
        pa.grad.array() +=
            (pa.value.array() > n.args.constant).select(g.array(), 0.0);
        break;
      case Op::slice:
        pa.grad.middleCols(n.args.begin, n.args.count) += g;
        break;
      case Op::concat:
        if (pa.requires_grad) pa.grad += g.leftCols(pa.value.cols());
        if (pb.requires_grad) pb.grad += g.rightCols(pb.value.cols());
        break;
      case Op::scale:
        pa.grad += n.args.constant * g;
        break;
      case Op::leaf:
        break;
    }
  }
}

}  // namespace fpflow::grad
