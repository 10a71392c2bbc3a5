// include/ft/tensor.h
//
// Dense row-major tensors of 64-bit floats and the forward kernels shared by
// the autodiff tape and the inference paths.

#ifndef FT_TENSOR_H_
#define FT_TENSOR_H_

#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ft {

using Shape = std::vector<std::size_t>;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a primitive produces NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> data);
  static Tensor vector(std::vector<double> data);
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-2 view: every axis but the last is folded into rows.
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }
  std::size_t rows() const { return cols() == 0 ? 0 : size() / cols(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) {
    return std::span<double>(data_).subspan(r * cols(), cols());
  }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols(), cols());
  }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  // Same data, new shape of equal element count.
  Tensor reshaped(Shape shape) const;

  // Scalar value of a one-element tensor.
  double item() const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Bitwise comparison; distinguishes -0.0 from 0.0 and compares NaN payloads.
bool bit_identical(const Tensor& a, const Tensor& b);

void check_finite(const Tensor& t, const char* op);

// Forward kernels. Matrices use the rank-2 view described above.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& m, const Tensor& bias);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor log_softmax(const Tensor& x);
Tensor scale(const Tensor& x, double factor);

// out[i * b.rows() + j] = a[i] + b[j], row-wise.
Tensor pair_add(const Tensor& a, const Tensor& b);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& table, std::span<const int> ids);
Tensor take_row(const Tensor& x, std::size_t r);

// log(sum(exp(x))) with max shift; -inf for an all -inf input.
double logsumexp(std::span<const double> x);
double log_add(double a, double b);

}  // namespace ft

#endif  // FT_TENSOR_H_
