#include "auctionmatch/graph.hpp"

#include <cmath>
#include <string>

#include "auctionmatch/errors.hpp"

namespace am {

const Tensor& Var::value() const { return g->value(id); }
const Tensor& Var::grad() const { return g->grad(id); }

Var make_node(Graph& g, Graph::Node node) {
  g.nodes_.push_back(std::move(node));
  return Var{&g, static_cast<int>(g.nodes_.size()) - 1};
}

Var Graph::input(Tensor value) {
  Node n;
  n.op = Op::leaf;
  n.value = std::move(value);
  n.requires_grad = true;
  return make_node(*this, std::move(n));
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = Op::leaf;
  n.value = std::move(value);
  return make_node(*this, std::move(n));
}

const Tensor& Graph::grad(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.numel() == 0)
    throw Error("grad: node " + std::to_string(id) +
                " has no gradient (constant, or backward not run)");
  return n.grad;
}

namespace {

void check_same_graph(Var a, Var b) {
  if (a.g != b.g) throw Error("op: operands live on different graphs");
}

Graph::Node binary(Graph::Op op, Var a, Var b, Tensor value) {
  Graph::Node n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.value = std::move(value);
  return n;
}

Graph::Node unary(Graph::Op op, Var a, Tensor value) {
  Graph::Node n;
  n.op = op;
  n.a = a.id;
  n.value = std::move(value);
  return n;
}

struct Builder {
  Graph& g;
  Var finish(Graph::Node n) {
    bool rg = false;
    if (n.a >= 0) rg = rg || g.requires_grad(n.a);
    if (n.b >= 0) rg = rg || g.requires_grad(n.b);
    n.requires_grad = rg;
    return make_node(g, std::move(n));
  }
};

}  // namespace

Var add(Var a, Var b) {
  check_same_graph(a, b);
  return Builder{*a.g}.finish(binary(Graph::Op::add, a, b, add(a.value(), b.value())));
}

Var sub(Var a, Var b) {
  check_same_graph(a, b);
  return Builder{*a.g}.finish(binary(Graph::Op::sub, a, b, sub(a.value(), b.value())));
}

Var mul(Var a, Var b) {
  check_same_graph(a, b);
  return Builder{*a.g}.finish(binary(Graph::Op::mul, a, b, mul(a.value(), b.value())));
}

Var minimum(Var a, Var b) {
  check_same_graph(a, b);
  return Builder{*a.g}.finish(binary(Graph::Op::minimum, a, b, minimum(a.value(), b.value())));
}

Var maximum(Var a, Var b) {
  check_same_graph(a, b);
  return Builder{*a.g}.finish(binary(Graph::Op::maximum, a, b, maximum(a.value(), b.value())));
}

Var vexp(Var a) { return Builder{*a.g}.finish(unary(Graph::Op::exp, a, vexp(a.value()))); }
Var vlog(Var a) { return Builder{*a.g}.finish(unary(Graph::Op::log, a, vlog(a.value()))); }
Var vtanh(Var a) { return Builder{*a.g}.finish(unary(Graph::Op::tanh, a, vtanh(a.value()))); }

Var sigmoid(Var a) {
  return Builder{*a.g}.finish(unary(Graph::Op::sigmoid, a, sigmoid(a.value())));
}

Var negate(Var a) {
  return Builder{*a.g}.finish(unary(Graph::Op::negate, a, negate(a.value())));
}

Var scale(Var a, double c) {
  auto n = unary(Graph::Op::scale, a, scale(a.value(), c));
  n.c = c;
  return Builder{*a.g}.finish(std::move(n));
}

Var add_scalar(Var a, double c) {
  auto n = unary(Graph::Op::add_scalar, a, add_scalar(a.value(), c));
  n.c = c;
  return Builder{*a.g}.finish(std::move(n));
}

Var matmul(Var a, Var b) {
  check_same_graph(a, b);
  return Builder{*a.g}.finish(binary(Graph::Op::matmul, a, b, matmul(a.value(), b.value())));
}

Var logsumexp_last(Var a) {
  return Builder{*a.g}.finish(unary(Graph::Op::logsumexp_last, a, logsumexp_last(a.value())));
}

Var sum_last(Var a) {
  return Builder{*a.g}.finish(unary(Graph::Op::sum_last, a, sum_last(a.value())));
}

Var sum_all(Var a) {
  return Builder{*a.g}.finish(unary(Graph::Op::sum_all, a, sum_all(a.value())));
}

Var expand_last(Var a, std::size_t k) {
  auto n = unary(Graph::Op::expand_last, a, expand_last(a.value(), k));
  n.p0 = k;
  return Builder{*a.g}.finish(std::move(n));
}

Var transpose_last2(Var a) {
  return Builder{*a.g}.finish(unary(Graph::Op::transpose_last2, a, transpose_last2(a.value())));
}

Var pad_last2(Var a, std::size_t extra_rows, std::size_t extra_cols) {
  auto n = unary(Graph::Op::pad_last2, a, pad_last2(a.value(), extra_rows, extra_cols));
  n.p0 = extra_rows;
  n.p1 = extra_cols;
  return Builder{*a.g}.finish(std::move(n));
}

Var block_last2(Var a, std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) {
  auto n = unary(Graph::Op::block_last2, a, block_last2(a.value(), r0, c0, rows, cols));
  n.p0 = r0;
  n.p1 = c0;
  n.p2 = rows;
  n.p3 = cols;
  return Builder{*a.g}.finish(std::move(n));
}

Var reshape(Var a, std::vector<std::size_t> shape) {
  return Builder{*a.g}.finish(unary(Graph::Op::reshape, a, reshape(a.value(), std::move(shape))));
}

Var splice_row(Var base, Var rows, std::size_t row) {
  check_same_graph(base, rows);
  auto n = binary(Graph::Op::splice_row, base, rows, splice_row(base.value(), rows.value(), row));
  n.p0 = row;
  return Builder{*base.g}.finish(std::move(n));
}

Var logsumexp(Var a, int axis) {
  if (a.value().rank() != 2 || (axis != 0 && axis != 1))
    throw ShapeError("logsumexp: rank-2 operand with axis 0 or 1 required");
  return axis == 1 ? logsumexp_last(a) : logsumexp_last(transpose_last2(a));
}

Var softmax_last(Var a) {
  const std::size_t k = a.value().last_dim();
  return vexp(sub(a, expand_last(logsumexp_last(a), k)));
}

Var softmax(Var a, int axis) {
  if (a.value().rank() != 2 || (axis != 0 && axis != 1))
    throw ShapeError("softmax: rank-2 operand with axis 0 or 1 required");
  return axis == 1 ? softmax_last(a) : transpose_last2(softmax_last(transpose_last2(a)));
}

namespace {

void ensure_grad(Graph::Node& n) {
  if (n.grad.numel() == 0) n.grad = Tensor(n.value.shape());
}

// dst += src
void acc(Tensor& dst, const Tensor& src) {
  double* pd = dst.data();
  const double* ps = src.data();
  const std::size_t n = dst.numel();
  for (std::size_t i = 0; i < n; ++i) pd[i] += ps[i];
}

}  // namespace

void Graph::backward(Var out) {
  if (out.g != this) throw Error("backward: output lives on a different graph");
  Node& root = nodes_[static_cast<std::size_t>(out.id)];
  if (root.value.numel() != 1)
    throw ShapeError("backward: output must be scalar, got " + root.value.shape_str());
  if (!root.requires_grad)
    throw Error("backward: output does not depend on any differentiable leaf");
  // Old gradients (from a previous backward on this tape) would otherwise
  // accumulate; reset them.
  for (Node& n : nodes_) n.grad = Tensor();
  ensure_grad(root);
  root.grad[0] = 1.0;

  for (std::size_t idx = nodes_.size(); idx-- > 0;) {
    Node& n = nodes_[idx];
    if (!n.requires_grad || n.grad.numel() == 0 || n.op == Op::leaf) continue;
    const Tensor& g = n.grad;
    Node* na = n.a >= 0 ? &nodes_[static_cast<std::size_t>(n.a)] : nullptr;
    Node* nb = n.b >= 0 ? &nodes_[static_cast<std::size_t>(n.b)] : nullptr;
    const bool wa = na != nullptr && na->requires_grad;
    const bool wb = nb != nullptr && nb->requires_grad;
    if (wa) ensure_grad(*na);
    if (wb) ensure_grad(*nb);

    switch (n.op) {
      case Op::leaf:
        break;
      case Op::add:
        if (wa) acc(na->grad, g);
        if (wb) acc(nb->grad, g);
        break;
      case Op::sub:
        if (wa) acc(na->grad, g);
        if (wb) {
          double* pd = nb->grad.data();
          const double* pg = g.data();
          for (std::size_t i = 0; i < g.numel(); ++i) pd[i] -= pg[i];
        }
        break;
      case Op::mul: {
        const double* pg = g.data();
        if (wa) {
          double* pd = na->grad.data();
          const double* pv = nb->value.data();
          for (std::size_t i = 0; i < g.numel(); ++i) pd[i] += pg[i] * pv[i];
        }
        if (wb) {
          double* pd = nb->grad.data();
          const double* pv = na->value.data();
          for (std::size_t i = 0; i < g.numel(); ++i) pd[i] += pg[i] * pv[i];
        }
        break;
      }
      case Op::minimum:
      case Op::maximum: {
        // Ties route the gradient to the first operand.
        const double* pg = g.data();
        const double* pa = na->value.data();
        const double* pb = nb->value.data();
        for (std::size_t i = 0; i < g.numel(); ++i) {
          const bool first = n.op == Op::minimum ? pa[i] <= pb[i] : pa[i] >= pb[i];
          if (first) {
            if (wa) na->grad[i] += pg[i];
          } else {
            if (wb) nb->grad[i] += pg[i];
          }
        }
        break;
      }
      case Op::exp: {
        if (!wa) break;
        double* pd = na->grad.data();
        const double* pg = g.data();
        const double* py = n.value.data();
        for (std::size_t i = 0; i < g.numel(); ++i) pd[i] += pg[i] * py[i];
        break;
      }
      case Op::log: {
        if (!wa) break;
        double* pd = na->grad.data();
        const double* pg = g.data();
        const double* px = na->value.data();
        for (std::size_t i = 0; i < g.numel(); ++i) pd[i] += pg[i] / px[i];
        break;
      }
      case Op::tanh: {
        if (!wa) break;
        double* pd = na->grad.data();
        const double* pg = g.data();
        const double* py = n.value.data();
        for (std::size_t i = 0; i < g.numel(); ++i) pd[i] += pg[i] * (1.0 - py[i] * py[i]);
        break;
      }
      case Op::sigmoid: {
        if (!wa) break;
        double* pd = na->grad.data();
        const double* pg = g.data();
        const double* py = n.value.data();
        for (std::size_t i = 0; i < g.numel(); ++i) pd[i] += pg[i] * py[i] * (1.0 - py[i]);
        break;
      }
      case Op::negate: {
        if (!wa) break;
        double* pd = na->grad.data();
        const double* pg = g.data();
        for (std::size_t i = 0; i < g.numel(); ++i) pd[i] -= pg[i];
        break;
      }
      case Op::scale: {
        if (!wa) break;
        double* pd = na->grad.data();
        const double* pg = g.data();
        for (std::size_t i = 0; i < g.numel(); ++i) pd[i] += n.c * pg[i];
        break;
      }
      case Op::add_scalar:
        if (wa) acc(na->grad, g);
        break;
      case Op::matmul: {
        const std::size_t rows = na->value.dim(0), k = na->value.dim(1), m = nb->value.dim(1);
        const double* pg = g.data();
        if (wa) {
          // dA = dY * B^T
          double* pd = na->grad.data();
          const double* pb = nb->value.data();
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double s = 0.0;
              const double* grow = pg + i * m;
              const double* brow = pb + p * m;
              for (std::size_t j = 0; j < m; ++j) s += grow[j] * brow[j];
              pd[i * k + p] += s;
            }
        }
        if (wb) {
          // dB = A^T * dY
          double* pd = nb->grad.data();
          const double* pa = na->value.data();
          for (std::size_t i = 0; i < rows; ++i) {
            const double* grow = pg + i * m;
            for (std::size_t p = 0; p < k; ++p) {
              const double av = pa[i * k + p];
              double* drow = pd + p * m;
              for (std::size_t j = 0; j < m; ++j) drow[j] += av * grow[j];
            }
          }
        }
        break;
      }
      case Op::logsumexp_last: {
        if (!wa) break;
        const std::size_t c = na->value.last_dim(), rows = na->value.outer_size();
        double* pd = na->grad.data();
        const double* px = na->value.data();
        const double* py = n.value.data();
        const double* pg = g.data();
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < c; ++j)
            pd[i * c + j] += pg[i] * std::exp(px[i * c + j] - py[i]);
        break;
      }
      case Op::sum_last: {
        if (!wa) break;
        const std::size_t c = na->value.last_dim(), rows = na->value.outer_size();
        double* pd = na->grad.data();
        const double* pg = g.data();
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < c; ++j) pd[i * c + j] += pg[i];
        break;
      }
      case Op::sum_all: {
        if (!wa) break;
        double* pd = na->grad.data();
        const double gv = g[0];
        for (std::size_t i = 0; i < na->grad.numel(); ++i) pd[i] += gv;
        break;
      }
      case Op::expand_last: {
        if (!wa) break;
        const std::size_t k = n.p0;
        double* pd = na->grad.data();
        const double* pg = g.data();
        for (std::size_t i = 0; i < na->grad.numel(); ++i, pg += k) {
          double s = 0.0;
          for (std::size_t j = 0; j < k; ++j) s += pg[j];
          pd[i] += s;
        }
        break;
      }
      case Op::transpose_last2:
        if (wa) acc(na->grad, transpose_last2(g));
        break;
      case Op::pad_last2: {
        if (!wa) break;
        const std::size_t r = na->value.dim(na->value.rank() - 2);
        const std::size_t c = na->value.last_dim();
        acc(na->grad, block_last2(g, 0, 0, r, c));
        break;
      }
      case Op::block_last2: {
        if (!wa) break;
        const std::size_t rfull = na->value.dim(na->value.rank() - 2);
        const std::size_t cfull = na->value.last_dim();
        const std::size_t batches = na->value.numel() / (rfull * cfull);
        double* pd = na->grad.data();
        const double* pg = g.data();
        for (std::size_t b = 0; b < batches; ++b, pd += rfull * cfull, pg += n.p2 * n.p3)
          for (std::size_t i = 0; i < n.p2; ++i)
            for (std::size_t j = 0; j < n.p3; ++j)
              pd[(n.p0 + i) * cfull + n.p1 + j] += pg[i * n.p3 + j];
        break;
      }
      case Op::reshape:
        if (wa) acc(na->grad, reshape(g, na->value.shape()));
        break;
      case Op::splice_row: {
        const std::size_t nr = na->value.dim(na->value.rank() - 2);
        const std::size_t m = na->value.last_dim();
        const std::size_t batches = na->value.numel() / (nr * m);
        const double* pg = g.data();
        if (wa) {
          double* pd = na->grad.data();
          for (std::size_t b = 0; b < batches; ++b)
            for (std::size_t i = 0; i < nr; ++i) {
              if (i == n.p0) continue;
              for (std::size_t j = 0; j < m; ++j)
                pd[(b * nr + i) * m + j] += pg[(b * nr + i) * m + j];
            }
        }
        if (wb) {
          double* pd = nb->grad.data();
          for (std::size_t b = 0; b < batches; ++b)
            for (std::size_t j = 0; j < m; ++j) pd[b * m + j] += pg[(b * nr + n.p0) * m + j];
        }
        break;
      }
    }
  }
}

}  // namespace am
