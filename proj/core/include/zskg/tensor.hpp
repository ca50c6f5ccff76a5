#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace zskg {

/// Dense row-major 2-D array of doubles. Vectors are 1×n rows.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor row_vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor(1, n, std::move(values));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& storage() const { return data_; }

  bool all_finite() const;
  void fill(double value);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace kernels {

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

/// a·b / (‖a‖‖b‖). Throws std::invalid_argument on a zero vector or
/// mismatched lengths.
double cosine(std::span<const double> a, std::span<const double> b);
/// As cosine(), but 0 when either vector is zero.
double cosine_or_zero(std::span<const double> a, std::span<const double> b);

/// (x - mean) / sqrt(var + eps) * gain + bias, population variance.
std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias, double eps = 1e-5);

/// y = W x (W is out×in).
std::vector<double> matvec(const Tensor& w, std::span<const double> x);
/// y = Wᵀ x.
std::vector<double> matvec_transposed(const Tensor& w, std::span<const double> x);

}  // namespace kernels

}  // namespace zskg
