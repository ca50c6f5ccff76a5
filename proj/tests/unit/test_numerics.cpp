#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <tuple>

#include "gradcases.hpp"
#include "oracles.hpp"
#include "zskg/autodiff.hpp"
#include "zskg/checkpoint.hpp"
#include "zskg/error.hpp"
#include "zskg/layers.hpp"
#include "zskg/optim.hpp"
#include "zskg/rng.hpp"
#include "zskg/tensor.hpp"

using namespace zskg;
using namespace zskg::testing;
using ad::Var;

namespace {

Var scalar(double x) { return Var::variable(Tensor(1, 1, x)); }

}  // namespace

TEST(Autodiff, IdentityGradientIsOne) {
  Var x = scalar(3.0);
  std::vector<Var> in{x};
  EXPECT_EQ(ad::grad(ad::sum_all(x), in)[0].value()[0], 1.0);
}

TEST(Autodiff, TanhSlopeAtZero) {
  Var x = scalar(0.0);
  std::vector<Var> in{x};
  EXPECT_DOUBLE_EQ(ad::grad(ad::tanh(x), in)[0].value()[0], 1.0);
}

TEST(Autodiff, UnusedInputGetsZeroGradient) {
  Var x = scalar(2.0), y = scalar(5.0);
  std::vector<Var> in{x, y};
  const auto g = ad::grad(ad::square(x), in);
  EXPECT_DOUBLE_EQ(g[0].value()[0], 4.0);
  EXPECT_EQ(g[1].value()[0], 0.0);
}

TEST(Autodiff, NonFiniteGradientThrows) {
  Var x = scalar(0.0);
  std::vector<Var> in{x};
  EXPECT_THROW(ad::grad(ad::sqrt(x), in), NumericalError);
}

TEST(Autodiff, EveryPrimitiveMatchesFiniteDifferences) {
  for (const auto& s : check_all_primitives(100, 11)) {
    EXPECT_GE(s.trials, 100u) << s.name;
    EXPECT_LE(s.max_error, 1e-4) << s.name;
  }
}

TEST(Autodiff, SecondOrderMatchesFiniteDifferences) {
  for (const auto& s : check_all_second_order(100, 12)) {
    EXPECT_LE(s.max_error, 1e-3) << s.name;
  }
}

TEST(Autodiff, TwoLayerMlpParameterProbes) {
  Rng rng(5);
  ad::Parameter w1("w1", random_tensor(6, 4, rng)), b1("b1", random_tensor(1, 6, rng));
  ad::Parameter w2("w2", random_tensor(1, 6, rng)), b2("b2", random_tensor(1, 1, rng));
  const Tensor x = random_tensor(5, 4, rng);
  auto loss = [&] {
    Var h = ad::tanh(ad::linear(Var::constant(x), w1.var(), b1.var()));
    return ad::mean_all(ad::square(ad::linear(h, w2.var(), b2.var())));
  };
  std::vector<ad::Parameter*> ps{&w1, &b1, &w2, &b2};
  const auto g = check_parameter_gradients(loss, ps, rng, 20, 1e-3);
  EXPECT_EQ(g.probes, 20u);
  EXPECT_LE(g.max_error, 1e-4);
}

TEST(Autodiff, BackwardAccumulatesIntoParameters) {
  ad::Parameter p("p", Tensor(1, 2, std::vector<double>{1.0, -2.0}));
  std::vector<ad::Parameter*> ps{&p};
  ad::backward(ad::sum_all(ad::square(p.var())), ps);
  ad::backward(ad::sum_all(p.var()), ps);
  EXPECT_DOUBLE_EQ(p.grad()[0], 3.0);
  EXPECT_DOUBLE_EQ(p.grad()[1], -3.0);
}

// Input-gradient norm of a linear critic is the weight norm.
TEST(Autodiff, InputGradientNormOfLinearCritic) {
  for (auto [w0, w1, expected] : {std::tuple{0.6, 0.8, 1.0}, std::tuple{3.0, 4.0, 5.0}}) {
    Var w = Var::variable(Tensor(1, 2, std::vector<double>{w0, w1}));
    Rng rng(3);
    Var x = Var::variable(random_tensor(4, 2, rng, -5, 5));
    std::vector<Var> in{x};
    Var g = ad::grad(ad::sum_all(ad::matmul_nt(x, w)), in, true)[0];
    const Tensor norms = ad::row_norm(g).value();
    for (double n : norms.values()) EXPECT_NEAR(n, expected, 1e-12);
  }
}

TEST(Kernels, CosineExamples) {
  const std::vector<double> a{1, 2, 2}, b{2, 1, 2};
  EXPECT_NEAR(kernels::cosine(a, b), 8.0 / 9.0, 1e-15);
  EXPECT_DOUBLE_EQ(kernels::cosine(a, a), 1.0);
  const std::vector<double> e1{1, 0}, e2{0, 1};
  EXPECT_EQ(kernels::cosine(e1, e2), 0.0);
  const std::vector<double> zero{0, 0};
  EXPECT_THROW(kernels::cosine(zero, e1), std::invalid_argument);
  EXPECT_EQ(kernels::cosine_or_zero(zero, e1), 0.0);
}

TEST(Kernels, CosineMatchesBruteForce) {
  Rng rng(21);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.index(12);
    const auto a = random_vector(n, rng), b = random_vector(n, rng);
    EXPECT_NEAR(kernels::cosine(a, b), brute_cosine(a, b), 1e-12);
    const double c = kernels::cosine(a, b);
    EXPECT_LE(std::abs(c), 1.0 + 1e-15);
  }
}

TEST(Kernels, LayerNormExamples) {
  const std::vector<double> one{1, 1, 1}, zero3{0, 0, 0};
  for (double v : kernels::layer_norm(std::vector<double>{4, 4, 4}, one, zero3)) EXPECT_EQ(v, 0.0);
  const std::vector<double> g2{1, 1}, b2{0, 0};
  const auto y = kernels::layer_norm(std::vector<double>{-1, 1}, g2, b2);
  EXPECT_NEAR(y[0], -1.0, 1e-5);
  EXPECT_NEAR(y[1], 1.0, 1e-5);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor p(1, 3, std::vector<double>{0.5, -1.0, 2.0});
  const Tensor before = p;
  std::vector<const Tensor*> cp{&p};
  auto state = make_adam_state({0.001, 0.5, 0.9, 1e-8}, cp);
  std::vector<Tensor*> ps{&p};
  std::vector<Tensor> gs{Tensor(1, 3)};
  adam_step(ps, gs, state);
  EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepHandValue) {
  Tensor p(1, 1, 0.0);
  std::vector<const Tensor*> cp{&p};
  auto state = make_adam_state({0.001, 0.5, 0.9, 1e-8}, cp);
  std::vector<Tensor*> ps{&p};
  std::vector<Tensor> gs{Tensor(1, 1, 1.0)};
  adam_step(ps, gs, state);
  // m̂ = v̂ = 1, so the step is lr / (1 + eps).
  EXPECT_NEAR(p[0], -0.001 / (1 + 1e-8), 1e-18);
}

TEST(Adam, MatchesScalarOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const AdamConfig cfg{rng.uniform(1e-4, 1e-1), rng.uniform(0.1, 0.95), rng.uniform(0.5, 0.999), 1e-8};
    Tensor p = random_tensor(2, 3, rng);
    std::vector<ScalarAdam> oracle(p.size(), ScalarAdam{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon});
    std::vector<double> expected(p.values().begin(), p.values().end());
    std::vector<const Tensor*> cp{&p};
    auto state = make_adam_state(cfg, cp);
    const Tensor g_same = random_tensor(2, 3, rng);
    for (int step = 0; step < 6; ++step) {
      const Tensor g = step < 2 ? g_same : random_tensor(2, 3, rng);
      std::vector<Tensor*> ps{&p};
      std::vector<Tensor> gs{g};
      adam_step(ps, gs, state);
      for (std::size_t i = 0; i < p.size(); ++i) expected[i] = oracle[i].step(expected[i], g[i]);
      for (std::size_t i = 0; i < p.size(); ++i) ASSERT_NEAR(p[i], expected[i], 1e-12);
    }
  }
}

TEST(Adam, Deterministic) {
  Rng rng(8);
  Tensor a = random_tensor(3, 3, rng), b = a;
  const Tensor g = random_tensor(3, 3, rng);
  std::vector<const Tensor*> ca{&a};
  auto sa = make_adam_state({}, ca), sb = sa;
  std::vector<Tensor*> pa{&a}, pb{&b};
  std::vector<Tensor> gs{g};
  adam_step(pa, gs, sa);
  adam_step(pb, gs, sb);
  EXPECT_EQ(a, b);
  EXPECT_EQ(sa.first_moment, sb.first_moment);
  EXPECT_EQ(sa.second_moment, sb.second_moment);
}

TEST(Adam, ShapeMismatchThrows) {
  Tensor p(1, 2);
  std::vector<const Tensor*> cp{&p};
  auto state = make_adam_state({}, cp);
  std::vector<Tensor*> ps{&p};
  std::vector<Tensor> gs{Tensor(2, 1)};
  EXPECT_THROW(adam_step(ps, gs, state), std::invalid_argument);
}

TEST(Spectral, DiagonalExample) {
  Rng rng(1);
  const Tensor w(2, 2, std::vector<double>{2, 0, 0, 0.5});
  SpectralNorm sn(2, 2, rng);
  sn.power_iteration(w, 30);
  const Tensor n = sn.normalize(w);
  EXPECT_NEAR(n(0, 0), 1.0, 1e-9);
  EXPECT_NEAR(n(1, 1), 0.25, 1e-9);
  EXPECT_NEAR(n(0, 1), 0.0, 1e-12);
  EXPECT_NEAR(top_singular_value(n), 1.0, 1e-9);
}

TEST(Spectral, UnitNormIsFixedPoint) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    Tensor w = random_tensor(5, 4, rng);
    const double s = top_singular_value(w);
    for (double& v : w.values()) v /= s;
    SpectralNorm sn(5, 4, rng);
    const Tensor n = spectral_normalize(w, sn);
    sn.power_iteration(w, 20);
    const Tensor m = sn.normalize(w);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(m[i], w[i], 1e-2);
    (void)n;
  }
}

TEST(Spectral, PowerIterationMatchesSvdOracle) {
  Rng rng(10);
  for (int t = 0; t < 50; ++t) {
    const Tensor w = random_tensor(10, 10, rng);
    SpectralNorm sn(10, 10, rng);
    sn.power_iteration(w, 50);
    EXPECT_NEAR(sn.sigma(w), top_singular_value(w), 1e-3);
  }
}

TEST(Spectral, LanczosResolvesClusteredTopValues) {
  // Two near-equal top singular values stall power iteration; Lanczos does not care.
  Rng rng(21);
  for (int t = 0; t < 20; ++t) {
    const std::size_t rows = 12, cols = 9;
    Tensor w(rows, cols);
    const std::vector<double> diag{5.0, 4.999, 4.99, 3, 2, 1, 0.5, 0.2, 0.1};
    for (std::size_t i = 0; i < cols; ++i) w(i, i) = diag[i];
    // scramble with random orthogonal-ish mixing so the basis is not aligned
    const Tensor m = random_tensor(cols, cols, rng);
    Tensor mixed(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        for (std::size_t k = 0; k < cols; ++k) mixed(i, j) += w(i, k) * m(k, j);
    SpectralNorm sn(rows, cols, rng);
    sn.lanczos(mixed, 24);
    EXPECT_NEAR(sn.sigma(mixed), top_singular_value(mixed), 1e-9 * top_singular_value(mixed));
  }
}

TEST(Spectral, LanczosFollowsMovingWeight) {
  Rng rng(22);
  Tensor w = random_tensor(8, 6, rng);
  SpectralNorm sn(8, 6, rng);
  for (int step = 0; step < 50; ++step) {
    for (double& v : w.values()) v += 0.05 * rng.normal();
    sn.lanczos(w, kRefreshLanczosSteps);
    EXPECT_LE(top_singular_value(sn.normalize(w)), 1.0 + 1e-9);
  }
}

TEST(Spectral, JacobiOracleAgreesOnKnownMatrix) {
  // [[3, 0], [4, 5]] has singular values 3√5 and √5.
  const Tensor w(2, 2, std::vector<double>{3, 0, 4, 5});
  const auto s = singular_values(w);
  EXPECT_NEAR(s[0], 3 * std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(s[1], std::sqrt(5.0), 1e-12);
}

TEST(Spectral, NormalizedWeightStaysBoundedAfterWarmUp) {
  Rng rng(13);
  for (int t = 0; t < 30; ++t) {
    Dense layer("fc", 6, 8, rng, true);
    layer.warm_up_spectral(50);
    EXPECT_LE(top_singular_value(layer.effective_weight()), 1.0 + 1e-2);
  }
}

TEST(Rng, DeriveIsStableAndDistinct) {
  Rng a = Rng::derive(7, "gan"), b = Rng::derive(7, "gan"), c = Rng::derive(7, "eval");
  const auto x = a.next_u64();
  EXPECT_EQ(x, b.next_u64());
  EXPECT_NE(x, c.next_u64());
  EXPECT_NE(Rng::derive(7, "eval-noise", {1}).next_u64(), Rng::derive(7, "eval-noise", {2}).next_u64());
}

TEST(Rng, SerializeRoundTrip) {
  Rng a(99);
  a.normal();
  Rng b;
  b.deserialize(a.serialize());
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, SampleWithoutReplacementIsDistinct) {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto s = rng.sample_without_replacement(20, 7);
    std::set<std::size_t> u(s.begin(), s.end());
    EXPECT_EQ(u.size(), 7u);
    for (auto i : s) EXPECT_LT(i, 20u);
  }
}

TEST(Checkpoint, RoundTripIsLossless) {
  Rng rng(3);
  Checkpoint c;
  c.kind = "test";
  c.tensors["a"] = random_tensor(3, 4, rng, -1e6, 1e6);
  c.tensors["b"] = Tensor(1, 1, 1.0 / 3.0);
  c.config["x"] = 1;
  const auto dir = scratch_dir("ckpt");
  c.save(dir / "c.json");
  const auto d = Checkpoint::load(dir / "c.json");
  EXPECT_EQ(d.kind, "test");
  EXPECT_EQ(d.tensors, c.tensors);
  EXPECT_EQ(d.config, c.config);
  EXPECT_THROW(d.tensor("missing"), DataError);
}

TEST(Checkpoint, AdamStateRoundTrip) {
  Tensor p(2, 2, 0.5);
  std::vector<const Tensor*> cp{&p};
  auto s = make_adam_state({0.01, 0.5, 0.9, 1e-8}, cp);
  std::vector<Tensor*> ps{&p};
  std::vector<Tensor> gs{Tensor(2, 2, 0.3)};
  adam_step(ps, gs, s);
  const auto back = adam_from_json(adam_to_json(s));
  EXPECT_EQ(back.step, s.step);
  EXPECT_EQ(back.first_moment, s.first_moment);
  EXPECT_EQ(back.second_moment, s.second_moment);
  EXPECT_EQ(back.config.learning_rate, s.config.learning_rate);
}

TEST(Checkpoint, MalformedFileIsDataError) {
  const auto dir = scratch_dir("ckpt-bad");
  write_file(dir / "bad.json", "{not json");
  EXPECT_THROW(Checkpoint::load(dir / "bad.json"), DataError);
  EXPECT_THROW(Checkpoint::load(dir / "absent.json"), DataError);
}
