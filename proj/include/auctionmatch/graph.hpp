#ifndef AUCTIONMATCH_GRAPH_HPP
#define AUCTIONMATCH_GRAPH_HPP

#include <cstddef>
#include <vector>

#include "auctionmatch/tensor.hpp"

namespace am {

class Graph;

// Lightweight handle to a node on a Graph tape. Cheap to copy; only valid as
// long as the owning Graph is alive.
struct Var {
  Graph* g = nullptr;
  int id = -1;
  bool valid() const { return g != nullptr && id >= 0; }
  const Tensor& value() const;
  const Tensor& grad() const;
};

// Record-and-replay tape. Every op appends a node holding its forward value;
// backward() walks the tape once in reverse. The tape is rebuilt for every
// forward pass, so data-dependent control flow (Sinkhorn's stopping rule)
// needs no special casing.
class Graph {
 public:
  enum class Op {
    leaf,
    add,
    sub,
    mul,
    minimum,
    maximum,
    exp,
    log,
    tanh,
    sigmoid,
    negate,
    scale,       // c * x
    add_scalar,  // x + c
    matmul,
    logsumexp_last,
    sum_last,
    sum_all,
    expand_last,
    transpose_last2,
    pad_last2,
    block_last2,
    reshape,
    splice_row,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    bool requires_grad = false;
    double c = 0.0;                 // scale / add_scalar constant
    std::size_t p0 = 0, p1 = 0;    // op-specific (block offsets, expand size, row)
    std::size_t p2 = 0, p3 = 0;    // block extent
  };

  // Differentiable leaf (weights, inputs under ascent).
  Var input(Tensor value);
  // Non-differentiable leaf (data, masks, padded constants).
  Var constant(Tensor value);

  void backward(Var out);

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Tensor& grad(int id) const;
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

 private:
  friend Var make_node(Graph& g, Graph::Node node);
  std::vector<Node> nodes_;
};

// Op builders. Binary ops require both operands to live on the same graph.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var minimum(Var a, Var b);  // ties send the gradient to the first operand
Var maximum(Var a, Var b);  // ties send the gradient to the first operand
Var vexp(Var a);
Var vlog(Var a);
Var vtanh(Var a);
Var sigmoid(Var a);
Var negate(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var matmul(Var a, Var b);
Var logsumexp_last(Var a);
Var sum_last(Var a);
Var sum_all(Var a);
Var expand_last(Var a, std::size_t k);
Var transpose_last2(Var a);
Var pad_last2(Var a, std::size_t extra_rows, std::size_t extra_cols);
Var block_last2(Var a, std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols);
Var reshape(Var a, std::vector<std::size_t> shape);
Var splice_row(Var base, Var rows, std::size_t row);

// Rank-2 axis forms; axis 0 works per column, axis 1 per row.
Var logsumexp(Var a, int axis);
Var softmax(Var a, int axis);  // composed as exp(x - logsumexp(x))
Var softmax_last(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return negate(a); }

}  // namespace am

#endif
