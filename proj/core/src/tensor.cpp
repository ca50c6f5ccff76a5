#include "zskg/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace zskg {

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("Tensor: value count does not match shape");
  }
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double value) {
  for (double& v : data_) v = value;
}

namespace kernels {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: length mismatch");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine: zero vector");
  return dot(a, b) / (na * nb);
}

double cosine_or_zero(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a), nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias, double eps) {
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("layer_norm: need at least 2 features");
  if (gain.size() != n || bias.size() != n) {
    throw std::invalid_argument("layer_norm: gain/bias length mismatch");
  }
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double inv = 1.0 / std::sqrt(var + eps);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (x[i] - mean) * inv * gain[i] + bias[i];
  return out;
}

std::vector<double> matvec(const Tensor& w, std::span<const double> x) {
  if (w.cols() != x.size()) throw std::invalid_argument("matvec: shape mismatch");
  std::vector<double> y(w.rows(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    auto row = w.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * x[c];
    y[r] = s;
  }
  return y;
}

std::vector<double> matvec_transposed(const Tensor& w, std::span<const double> x) {
  if (w.rows() != x.size()) throw std::invalid_argument("matvec_transposed: shape mismatch");
  std::vector<double> y(w.cols(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    auto row = w.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) y[c] += row[c] * x[r];
  }
  return y;
}

}  // namespace kernels
}  // namespace zskg
