#pragma once

// Test-only reference implementations. Nothing here calls into the library
// code it is used to check; the loops are deliberately naive.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "zskg/autodiff.hpp"
#include "zskg/dataset.hpp"
#include "zskg/rng.hpp"
#include "zskg/tensor.hpp"

namespace zskg::testing {

// ---- generators -------------------------------------------------------------

Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0);
/// Entries with |x| in [gap, hi], random sign; keeps kinks of relu-like ops
/// away from finite-difference stencils.
Tensor random_away_from_zero(std::size_t rows, std::size_t cols, Rng& rng, double gap, double hi = 1.0);
std::vector<double> random_vector(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0);

// ---- finite differences -----------------------------------------------------

struct GradCheck {
  double max_error = 0.0;  // max |analytic − numeric| / max(1, |analytic|, |numeric|)
  std::size_t probes = 0;
};

/// Compares ad::grad of f(inputs) against central differences on `probes`
/// randomly chosen input entries. f must return a 1×1 Var.
GradCheck check_input_gradients(const std::function<ad::Var(std::span<const ad::Var>)>& f,
                                std::vector<Tensor> inputs, Rng& rng, std::size_t probes = 4,
                                double h = 1e-5);

/// Second-order path: g(inputs) = Σ c ⊙ ∂f/∂inputs[0] (built with
/// create_graph) is differentiated again and compared with central
/// differences of the first-order gradient.
GradCheck check_second_order(const std::function<ad::Var(std::span<const ad::Var>)>& f,
                             std::vector<Tensor> inputs, Rng& rng, std::size_t probes = 4,
                             double h = 1e-5);

/// Gradient of `loss()` with respect to parameters, probed by perturbing the
/// parameter storage in place.
GradCheck check_parameter_gradients(const std::function<ad::Var()>& loss,
                                    std::span<ad::Parameter* const> params, Rng& rng,
                                    std::size_t probes = 4, double h = 1e-5);

// ---- formula oracles ---------------------------------------------------------

double brute_cosine(std::span<const double> a, std::span<const double> b);
double brute_hinge(double margin, double positive, double negative);

/// Rank from a full sort; the ground truth is placed after every tie.
std::size_t sort_rank(std::span<const double> scores, std::size_t truth);

struct BruteMetrics {
  double mrr = 0, hits1 = 0, hits5 = 0, hits10 = 0;
};
BruteMetrics brute_metrics(std::span<const std::size_t> ranks);

/// Scalar Adam on a single coordinate.
struct ScalarAdam {
  double lr, b1, b2, eps;
  double m = 0, v = 0;
  int t = 0;
  double step(double theta, double g);
};

/// Singular values of W, largest first, from a cyclic Jacobi
/// eigen-decomposition of the smaller Gram matrix (WᵀW or WWᵀ).
std::vector<double> singular_values(const Tensor& w);
double top_singular_value(const Tensor& w);

/// tf·ln(N/df) normalized to unit L2 norm, recomputed from raw documents.
std::map<std::string, double> brute_tfidf(const std::vector<std::string>& doc,
                                          const std::vector<std::vector<std::string>>& corpus);

// ---- fixtures ----------------------------------------------------------------

/// Small hand-made split: 8 entities, relations r0..r2 seen, v0 validation,
/// u0 unseen, with candidates for every valid/test triple.
data::ZeroShotSplit toy_split();

/// Fresh empty directory under the system temp directory.
std::filesystem::path scratch_dir(const std::string& name);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace zskg::testing
