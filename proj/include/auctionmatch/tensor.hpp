#ifndef AUCTIONMATCH_TENSOR_HPP
#define AUCTIONMATCH_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace am {

// Dense row-major tensor of doubles. Rank 0 (scalar) through rank 3 are used;
// the layout is general. Value semantics throughout: copies are deep.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, double v);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return v_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  // Size of the last axis, 1 for scalars.
  std::size_t last_dim() const { return shape_.empty() ? 1 : shape_.back(); }
  // Product of all axes except the last, 1 for scalars.
  std::size_t outer_size() const { return shape_.empty() ? 1 : numel() / shape_.back(); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  std::string shape_str() const;

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }

  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }

  // Rank-2 accessors (row, col) and rank-3 accessors (batch, row, col).
  double& at(std::size_t r, std::size_t c) { return v_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return v_[r * shape_[1] + c]; }
  double& at(std::size_t b, std::size_t r, std::size_t c) {
    return v_[(b * shape_[1] + r) * shape_[2] + c];
  }
  double at(std::size_t b, std::size_t r, std::size_t c) const {
    return v_[(b * shape_[1] + r) * shape_[2] + c];
  }

  bool all_finite() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> v_;
};

// Eager kernels. These are the single implementation of each op's forward
// math; the autodiff graph calls into them and the non-differentiable
// Sinkhorn path uses them directly. All of them validate shapes and throw
// am::ShapeError on mismatch, am::NumericError on domain violations.

Tensor matmul(const Tensor& a, const Tensor& b);           // (n,k)x(k,m) -> (n,m)
Tensor transpose_last2(const Tensor& a);                   // swap last two axes (rank 2 or 3)
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor vexp(const Tensor& a);                              // throws on overflow
Tensor vlog(const Tensor& a);                              // throws on x <= 0
Tensor vtanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor negate(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor logsumexp_last(const Tensor& a);                    // reduce last axis
Tensor sum_last(const Tensor& a);
Tensor sum_all(const Tensor& a);                           // -> scalar tensor
Tensor expand_last(const Tensor& a, std::size_t k);        // append axis of size k, tile
Tensor softmax_last(const Tensor& a);
Tensor pad_last2(const Tensor& a, std::size_t extra_rows, std::size_t extra_cols);
Tensor block_last2(const Tensor& a, std::size_t r0, std::size_t c0, std::size_t rows,
                   std::size_t cols);
Tensor reshape(const Tensor& a, std::vector<std::size_t> shape);
// Rows [lo, hi) along the first axis.
Tensor slice_front(const Tensor& a, std::size_t lo, std::size_t hi);
// Replace row `row` of each matrix in `base` (.., n, m) with the matching row
// of `rows` (.., m).
Tensor splice_row(const Tensor& base, const Tensor& rows, std::size_t row);

// Axis variants for rank-2 tensors; axis 0 reduces over rows (per column),
// axis 1 over columns (per row).
Tensor logsumexp(const Tensor& a, int axis);
Tensor softmax(const Tensor& a, int axis);

}  // namespace am

#endif
