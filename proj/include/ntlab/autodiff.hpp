#pragma once

// Define-by-run reverse-mode differentiation over rank-2 tensors.
//
// A Graph is built fresh for every minibatch. Nodes are appended in creation
// order, and an op may only reference nodes that already exist, so creation
// order is a topological order and backward is a single reverse sweep.

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "ntlab/tensor.hpp"

namespace ntlab::ad {

/// Trainable tensor with an accumulated gradient. Owned by a model; graphs
/// hold non-owning pointers to it only while they are alive.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(0.0); }
};

enum class Op {
  leaf,
  matmul,
  add,
  add_row,
  sub,
  mul,
  scale,
  tanh,
  relu,
  sigmoid,
  log,
  mean_rows,
  softmax_xent,
  bce_logits,
  concat_cols,
  grad_reverse,
  stop_grad,
  clamped_odds,
};

const char* op_name(Op op) noexcept;

class Graph;

/// Handle to a node of a Graph.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Tensor& value() const;
  const Tensor& grad() const;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf that receives a gradient (readable through grad()).
  Var variable(Tensor value);
  /// Leaf bound to a parameter; backward accumulates into param.grad.
  /// Repeated calls with the same parameter return the same node.
  Var param(Parameter& p);

  /// Reverse sweep from a 1x1 loss node with upstream gradient 1.
  void backward(Var loss);
  /// Reverse sweep from any node with an explicit upstream gradient.
  void backward(Var out, const Tensor& upstream);

  /// Clears node gradients (parameter gradients are left alone).
  void zero_grad();

  const Tensor& value(Var v) const;
  /// Gradient of a node after backward; zeros when it was not reached.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;
  Op op(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }

  // Appends an op node. Inputs must already belong to this graph.
  Var push(Op op, std::vector<Var> inputs, Tensor value, double attr = 0.0, Tensor aux = {});

 private:
  struct Node {
    Op op = Op::leaf;
    std::vector<int> inputs;
    Tensor value;
    Tensor grad;
    Tensor aux;  // labels / targets for the fused loss primitives
    double attr = 0.0;
    bool requires_grad = false;
    Parameter* param = nullptr;
  };

  int check(Var v) const;
  Var push_leaf(Tensor value, bool requires_grad, Parameter* param);
  void propagate(const Node& node);
  void accumulate(int id, const Tensor& g);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  mutable Tensor zero_scratch_;
};

// Primitive ops. All operands must come from the same graph.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
/// a (n x m) + b (1 x m), broadcast over the batch axis.
Var add_row(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var tanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);
/// Elementwise natural log; every entry must be positive.
Var log(Var a);
/// Mean over the batch axis: (n x m) -> (1 x m).
Var mean_rows(Var a);
/// Fused softmax + cross-entropy: logits (n x K), labels in [0, K) -> (n x 1).
Var softmax_xent(Var logits, const std::vector<int>& labels);
/// Fused sigmoid + binary cross-entropy: logits (n x 1), targets in [0,1] -> (n x 1).
/// Equals -t*log(sigmoid(z)) - (1-t)*log(1-sigmoid(z)).
Var bce_logits(Var logits, const std::vector<double>& targets);
Var concat_cols(Var a, Var b);
/// Identity forward; backward maps upstream g to -mu * g. mu must be >= 0.
Var grad_reverse(Var a, double mu);
/// Identity forward; backward transmits exactly zero.
Var stop_grad(Var a);
/// c / (1 - c) with c = clamp(a, delta, 1 - delta), 0 < delta < 0.5.
Var clamped_odds(Var a, double delta);

}  // namespace ntlab::ad
