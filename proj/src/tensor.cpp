#include "auctionmatch/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "auctionmatch/errors.hpp"

namespace am {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a) {
  throw ShapeError(std::string(op) + ": bad operand shape " + a.shape_str());
}

[[noreturn]] void shape_fail2(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": mismatched shapes " + a.shape_str() + " vs " +
                   b.shape_str());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), v_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), v_(std::move(values)) {
  if (v_.size() != shape_numel(shape_))
    throw ShapeError("Tensor: value count " + std::to_string(v_.size()) +
                     " does not match shape " + shape_str());
}

Tensor Tensor::scalar(double v) {
  Tensor t{std::vector<std::size_t>{}};
  t.v_ = {v};
  return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  Tensor t(std::move(shape));
  std::fill(t.v_.begin(), t.v_.end(), v);
  return t;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ',';
    os << shape_[i];
  }
  os << ')';
  return os.str();
}

bool Tensor::all_finite() const {
  for (double x : v_)
    if (!std::isfinite(x)) return false;
  return true;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) shape_fail2("matmul", a, b);
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor out({n, m});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = po + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      const double* brow = pb + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor transpose_last2(const Tensor& a) {
  if (a.rank() < 2) shape_fail("transpose_last2", a);
  std::vector<std::size_t> shape = a.shape();
  const std::size_t r = shape[shape.size() - 2], c = shape[shape.size() - 1];
  std::swap(shape[shape.size() - 2], shape[shape.size() - 1]);
  Tensor out(std::move(shape));
  const std::size_t batches = a.numel() / (r * c);
  const double* pa = a.data();
  double* po = out.data();
  for (std::size_t b = 0; b < batches; ++b, pa += r * c, po += r * c)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) po[j * r + i] = pa[i * c + j];
  return out;
}

namespace {

template <class F>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, F f) {
  if (!a.same_shape(b)) shape_fail2(name, a, b);
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
  return out;
}

template <class F>
Tensor unary_op(const Tensor& a, F f) {
  Tensor out(a.shape());
  const double* pa = a.data();
  double* po = out.data();
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i]);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op("add", a, b, [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op("sub", a, b, [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op("mul", a, b, [](double x, double y) { return x * y; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary_op("minimum", a, b, [](double x, double y) { return x <= y ? x : y; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary_op("maximum", a, b, [](double x, double y) { return x >= y ? x : y; });
}

Tensor vexp(const Tensor& a) {
  Tensor out(a.shape());
  const double* pa = a.data();
  double* po = out.data();
  for (std::size_t i = 0; i < a.numel(); ++i) {
    po[i] = std::exp(pa[i]);
    if (std::isinf(po[i]))
      throw NumericError("exp overflow at flat index " + std::to_string(i));
  }
  return out;
}

Tensor vlog(const Tensor& a) {
  Tensor out(a.shape());
  const double* pa = a.data();
  double* po = out.data();
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (!(pa[i] > 0.0))
      throw NumericError("log domain violation at flat index " + std::to_string(i) +
                         " (value " + std::to_string(pa[i]) + ")");
    po[i] = std::log(pa[i]);
  }
  return out;
}

Tensor vtanh(const Tensor& a) {
  return unary_op(a, [](double x) { return std::tanh(x); });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor negate(const Tensor& a) {
  return unary_op(a, [](double x) { return -x; });
}

Tensor scale(const Tensor& a, double c) {
  return unary_op(a, [c](double x) { return c * x; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary_op(a, [c](double x) { return x + c; });
}

Tensor logsumexp_last(const Tensor& a) {
  if (a.rank() == 0) shape_fail("logsumexp_last", a);
  std::vector<std::size_t> shape(a.shape().begin(), a.shape().end() - 1);
  Tensor out(std::move(shape));
  const std::size_t rows = a.outer_size(), c = a.last_dim();
  const double* pa = a.data();
  double* po = out.data();
  for (std::size_t i = 0; i < rows; ++i, pa += c) {
    double mx = pa[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, pa[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(pa[j] - mx);
    po[i] = mx + std::log(s);
  }
  return out;
}

Tensor sum_last(const Tensor& a) {
  if (a.rank() == 0) shape_fail("sum_last", a);
  std::vector<std::size_t> shape(a.shape().begin(), a.shape().end() - 1);
  Tensor out(std::move(shape));
  const std::size_t rows = a.outer_size(), c = a.last_dim();
  const double* pa = a.data();
  double* po = out.data();
  for (std::size_t i = 0; i < rows; ++i, pa += c) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += pa[j];
    po[i] = s;
  }
  return out;
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i];
  return Tensor::scalar(s);
}

Tensor expand_last(const Tensor& a, std::size_t k) {
  std::vector<std::size_t> shape = a.shape();
  shape.push_back(k);
  Tensor out(std::move(shape));
  const double* pa = a.data();
  double* po = out.data();
  for (std::size_t i = 0; i < a.numel(); ++i, po += k)
    for (std::size_t j = 0; j < k; ++j) po[j] = pa[i];
  return out;
}

Tensor softmax_last(const Tensor& a) {
  Tensor lse = logsumexp_last(a);
  Tensor out(a.shape());
  const std::size_t rows = a.outer_size(), c = a.last_dim();
  const double* pa = a.data();
  const double* pl = lse.data();
  double* po = out.data();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < c; ++j, ++pa, ++po) *po = std::exp(*pa - pl[i]);
  return out;
}

Tensor pad_last2(const Tensor& a, std::size_t extra_rows, std::size_t extra_cols) {
  if (a.rank() < 2) shape_fail("pad_last2", a);
  std::vector<std::size_t> shape = a.shape();
  const std::size_t r = shape[shape.size() - 2], c = shape[shape.size() - 1];
  shape[shape.size() - 2] = r + extra_rows;
  shape[shape.size() - 1] = c + extra_cols;
  Tensor out(std::move(shape));
  const std::size_t batches = a.numel() / (r * c);
  const std::size_t ro = r + extra_rows, co = c + extra_cols;
  const double* pa = a.data();
  double* po = out.data();
  for (std::size_t b = 0; b < batches; ++b, pa += r * c, po += ro * co)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) po[i * co + j] = pa[i * c + j];
  return out;
}

Tensor block_last2(const Tensor& a, std::size_t r0, std::size_t c0, std::size_t rows,
                   std::size_t cols) {
  if (a.rank() < 2) shape_fail("block_last2", a);
  std::vector<std::size_t> shape = a.shape();
  const std::size_t r = shape[shape.size() - 2], c = shape[shape.size() - 1];
  if (r0 + rows > r || c0 + cols > c)
    throw ShapeError("block_last2: block exceeds operand " + a.shape_str());
  shape[shape.size() - 2] = rows;
  shape[shape.size() - 1] = cols;
  Tensor out(std::move(shape));
  const std::size_t batches = a.numel() / (r * c);
  const double* pa = a.data();
  double* po = out.data();
  for (std::size_t b = 0; b < batches; ++b, pa += r * c, po += rows * cols)
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) po[i * cols + j] = pa[(r0 + i) * c + c0 + j];
  return out;
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape) {
  if (shape_numel(shape) != a.numel())
    throw ShapeError("reshape: cannot view " + a.shape_str() + " with new element count");
  return Tensor(std::move(shape), a.values());
}

Tensor slice_front(const Tensor& a, std::size_t lo, std::size_t hi) {
  if (a.rank() == 0 || lo > hi || hi > a.dim(0))
    throw ShapeError("slice_front: bad range on " + a.shape_str());
  std::vector<std::size_t> shape;
  shape.push_back(hi - lo);
  for (std::size_t d = 1; d < a.rank(); ++d) shape.push_back(a.dim(d));
  const std::size_t stride = a.numel() / a.dim(0);
  Tensor out(std::move(shape));
  std::copy(a.data() + lo * stride, a.data() + hi * stride, out.data());
  return out;
}

Tensor splice_row(const Tensor& base, const Tensor& rows, std::size_t row) {
  if (base.rank() < 2) shape_fail("splice_row", base);
  const std::size_t n = base.dim(base.rank() - 2), m = base.dim(base.rank() - 1);
  if (rows.rank() + 1 != base.rank() || rows.last_dim() != m ||
      rows.numel() / m != base.numel() / (n * m))
    shape_fail2("splice_row", base, rows);
  if (row >= n) throw ShapeError("splice_row: row index out of range");
  Tensor out = base;
  const std::size_t batches = base.numel() / (n * m);
  const double* pr = rows.data();
  double* po = out.data();
  for (std::size_t b = 0; b < batches; ++b, pr += m)
    for (std::size_t j = 0; j < m; ++j) po[(b * n + row) * m + j] = pr[j];
  return out;
}

Tensor logsumexp(const Tensor& a, int axis) {
  if (a.rank() != 2 || (axis != 0 && axis != 1)) shape_fail("logsumexp", a);
  return axis == 1 ? logsumexp_last(a) : logsumexp_last(transpose_last2(a));
}

Tensor softmax(const Tensor& a, int axis) {
  if (a.rank() != 2 || (axis != 0 && axis != 1)) shape_fail("softmax", a);
  return axis == 1 ? softmax_last(a) : transpose_last2(softmax_last(transpose_last2(a)));
}

}  // namespace am
