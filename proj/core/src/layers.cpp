#include "zskg/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace zskg {
namespace {

bool normalize_in_place(std::vector<double>& x) {
  const double n = kernels::l2_norm(x);
  if (n == 0.0 || !std::isfinite(n)) return false;
  for (double& v : x) v /= n;
  return true;
}

Tensor random_unit_row(std::size_t n, Rng& rng) {
  std::vector<double> x(n);
  do {
    for (double& v : x) v = rng.normal();
  } while (!normalize_in_place(x));
  return Tensor::row_vector(std::move(x));
}

}  // namespace

SpectralNorm::SpectralNorm(std::size_t rows, std::size_t cols, Rng& rng)
    : u_(random_unit_row(rows, rng)), v_(random_unit_row(cols, rng)) {}

void SpectralNorm::power_iteration(const Tensor& weight, int iterations) {
  if (weight.rows() != u_.cols() || weight.cols() != v_.cols()) {
    throw std::invalid_argument("SpectralNorm: weight shape does not match state");
  }
  for (int i = 0; i < iterations; ++i) {
    auto v = kernels::matvec_transposed(weight, u_.values());
    if (!normalize_in_place(v)) return;
    auto u = kernels::matvec(weight, v);
    if (!normalize_in_place(u)) return;
    v_ = Tensor::row_vector(std::move(v));
    u_ = Tensor::row_vector(std::move(u));
  }
}

void SpectralNorm::lanczos(const Tensor& weight, int steps) {
  if (weight.rows() != u_.cols() || weight.cols() != v_.cols()) {
    throw std::invalid_argument("SpectralNorm: weight shape does not match state");
  }
  const std::size_t n = weight.cols();
  const std::size_t k = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(steps, 1)));
  // Krylov basis of WᵀW from the current v, fully reorthogonalized.
  std::vector<std::vector<double>> basis{std::vector<double>(v_.values().begin(), v_.values().end())};
  std::vector<double> alpha, beta;
  for (std::size_t j = 0; j < k; ++j) {
    auto w = kernels::matvec_transposed(weight, kernels::matvec(weight, basis[j]));
    const double a = kernels::dot(basis[j], w);
    alpha.push_back(a);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis) {
        const double c = kernels::dot(q, w);
        for (std::size_t i = 0; i < n; ++i) w[i] -= c * q[i];
      }
    }
    const double b = kernels::l2_norm(w);
    if (j + 1 == k || !(b > 1e-12 * std::max(std::abs(a), 1e-300))) break;
    for (double& x : w) x /= b;
    beta.push_back(b);
    basis.push_back(std::move(w));
  }
  const std::size_t m = alpha.size();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(m)),
                                Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(m - 1)),
                                Eigen::ComputeEigenvectors);
  const auto y = solver.eigenvectors().col(static_cast<Eigen::Index>(m - 1));
  std::vector<double> v(n, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < n; ++i) v[i] += y(static_cast<Eigen::Index>(j)) * basis[j][i];
  }
  if (!normalize_in_place(v)) return;
  auto u = kernels::matvec(weight, v);
  if (!normalize_in_place(u)) return;
  v_ = Tensor::row_vector(std::move(v));
  u_ = Tensor::row_vector(std::move(u));
}

double SpectralNorm::sigma(const Tensor& weight) const {
  return kernels::dot(u_.values(), kernels::matvec(weight, v_.values()));
}

Tensor SpectralNorm::normalize(const Tensor& weight) const {
  double s = sigma(weight);
  if (s == 0.0) s = 1.0;
  Tensor out = weight;
  for (double& x : out.values()) x /= s;
  return out;
}

ad::Var SpectralNorm::normalize(const ad::Var& weight) const {
  if (sigma(weight.value()) == 0.0) return weight;
  // σ = uᵀ W v, differentiable in W.
  ad::Var u = ad::Var::constant(u_);
  ad::Var v = ad::Var::constant(v_);
  ad::Var s = ad::matmul_nt(ad::matmul(u, weight), v);
  ad::Var inv = ad::div(ad::Var::constant(Tensor(1, 1, 1.0)), s);
  return ad::scale_by(weight, inv);
}

void SpectralNorm::set_vectors(Tensor u, Tensor v) {
  if (u.rows() != 1 || v.rows() != 1) throw std::invalid_argument("SpectralNorm: vectors must be rows");
  u_ = std::move(u);
  v_ = std::move(v);
}

Tensor spectral_normalize(const Tensor& weight, SpectralNorm& state) {
  state.power_iteration(weight, 1);
  return state.normalize(weight);
}

Tensor uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

Dense::Dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool spectral_norm)
    : weight(name + ".weight", uniform_init(out, in, in, rng)),
      bias(name + ".bias", uniform_init(1, out, in, rng)) {
  if (spectral_norm) spectral.emplace(out, in, rng);
}

ad::Var Dense::effective_weight_var() const {
  return spectral ? spectral->normalize(weight.var()) : weight.var();
}

Tensor Dense::effective_weight() const {
  return spectral ? spectral->normalize(weight.value()) : weight.value();
}

ad::Var Dense::forward(const ad::Var& x) const {
  return ad::linear(x, effective_weight_var(), bias.var());
}

void Dense::refresh_spectral() {
  if (spectral) spectral->lanczos(weight.value(), kRefreshLanczosSteps);
}

void Dense::warm_up_spectral(int steps) {
  if (spectral) spectral->lanczos(weight.value(), steps);
}

}  // namespace zskg
