#include "gradcases.hpp"

#include <algorithm>

#include "zskg/dataset.hpp"
#include "zskg/encoder.hpp"
#include "zskg/gan.hpp"
#include "zskg/kge.hpp"

namespace zskg::testing {
namespace {

using ad::Var;
using Fn = std::function<Var(std::span<const Var>)>;

struct OpCase {
  std::string name;
  std::function<std::vector<Tensor>(Rng&)> inputs;
  std::function<Var(std::span<const Var>)> op;
};

std::size_t dim(Rng& rng) { return 1 + rng.index(4); }

std::vector<OpCase> op_cases() {
  std::vector<OpCase> c;
  auto unary = [&](std::string name, std::function<Var(const Var&)> op, double lo = -1.5, double hi = 1.5) {
    c.push_back({std::move(name),
                 [lo, hi](Rng& r) { return std::vector<Tensor>{random_tensor(dim(r), dim(r), r, lo, hi)}; },
                 [op](std::span<const Var> v) { return op(v[0]); }});
  };
  auto binary = [&](std::string name, std::function<Var(const Var&, const Var&)> op) {
    c.push_back({std::move(name),
                 [](Rng& r) {
                   const std::size_t m = dim(r), n = dim(r);
                   return std::vector<Tensor>{random_tensor(m, n, r), random_tensor(m, n, r)};
                 },
                 [op](std::span<const Var> v) { return op(v[0], v[1]); }});
  };

  c.push_back({"matmul",
               [](Rng& r) {
                 const std::size_t m = dim(r), k = dim(r), n = dim(r);
                 return std::vector<Tensor>{random_tensor(m, k, r), random_tensor(k, n, r)};
               },
               [](std::span<const Var> v) { return ad::matmul(v[0], v[1]); }});
  c.push_back({"matmul_nt",
               [](Rng& r) {
                 const std::size_t m = dim(r), k = dim(r), n = dim(r);
                 return std::vector<Tensor>{random_tensor(m, k, r), random_tensor(n, k, r)};
               },
               [](std::span<const Var> v) { return ad::matmul_nt(v[0], v[1]); }});
  c.push_back({"matmul_tn",
               [](Rng& r) {
                 const std::size_t m = dim(r), k = dim(r), n = dim(r);
                 return std::vector<Tensor>{random_tensor(k, m, r), random_tensor(k, n, r)};
               },
               [](std::span<const Var> v) { return ad::matmul_tn(v[0], v[1]); }});
  binary("add", [](const Var& a, const Var& b) { return a + b; });
  binary("sub", [](const Var& a, const Var& b) { return a - b; });
  binary("mul", [](const Var& a, const Var& b) { return a * b; });
  c.push_back({"div",
               [](Rng& r) {
                 const std::size_t m = dim(r), n = dim(r);
                 return std::vector<Tensor>{random_tensor(m, n, r), random_away_from_zero(m, n, r, 0.5, 2.0)};
               },
               [](std::span<const Var> v) { return v[0] / v[1]; }});
  unary("neg", [](const Var& a) { return -a; });
  unary("scale", [](const Var& a) { return ad::scale(a, 2.5); });
  unary("add_scalar", [](const Var& a) { return ad::add_scalar(a, 0.7); });
  c.push_back({"scale_by",
               [](Rng& r) { return std::vector<Tensor>{random_tensor(dim(r), dim(r), r), random_tensor(1, 1, r)}; },
               [](std::span<const Var> v) { return ad::scale_by(v[0], v[1]); }});
  unary("tanh", [](const Var& a) { return ad::tanh(a); }, -2.0, 2.0);
  unary("sigmoid", [](const Var& a) { return ad::sigmoid(a); }, -3.0, 3.0);
  unary("softplus", [](const Var& a) { return ad::softplus(a); }, -3.0, 3.0);
  unary("sqrt", [](const Var& a) { return ad::sqrt(a); }, 0.3, 2.0);
  unary("square", [](const Var& a) { return ad::square(a); });
  for (const char* name : {"relu", "leaky_relu"}) {
    const bool leaky = std::string(name) == "leaky_relu";
    c.push_back({name,
                 [](Rng& r) { return std::vector<Tensor>{random_away_from_zero(dim(r), dim(r), r, 0.01, 1.5)}; },
                 [leaky](std::span<const Var> v) { return leaky ? ad::leaky_relu(v[0], 0.2) : ad::relu(v[0]); }});
  }
  unary("sum_rows", [](const Var& a) { return ad::sum_rows(a); });
  unary("sum_cols", [](const Var& a) { return ad::sum_cols(a); });
  unary("sum_all", [](const Var& a) { return ad::sum_all(a); });
  unary("mean_all", [](const Var& a) { return ad::mean_all(a); });
  unary("mean_rows", [](const Var& a) { return ad::mean_rows(a); });
  unary("row_norm", [](const Var& a) { return ad::row_norm(a); }, 0.2, 1.5);
  c.push_back({"broadcast_rows",
               [](Rng& r) { return std::vector<Tensor>{random_tensor(1, dim(r), r)}; },
               [](std::span<const Var> v) { return ad::broadcast_rows(v[0], 3); }});
  c.push_back({"broadcast_cols",
               [](Rng& r) { return std::vector<Tensor>{random_tensor(dim(r), 1, r)}; },
               [](std::span<const Var> v) { return ad::broadcast_cols(v[0], 3); }});
  c.push_back({"concat_cols",
               [](Rng& r) {
                 const std::size_t m = dim(r);
                 return std::vector<Tensor>{random_tensor(m, dim(r), r), random_tensor(m, dim(r), r),
                                            random_tensor(m, dim(r), r)};
               },
               [](std::span<const Var> v) { return ad::concat_cols(v); }});
  c.push_back({"concat_rows",
               [](Rng& r) {
                 const std::size_t n = dim(r);
                 return std::vector<Tensor>{random_tensor(dim(r), n, r), random_tensor(dim(r), n, r)};
               },
               [](std::span<const Var> v) { return ad::concat_rows(v); }});
  c.push_back({"slice_cols",
               [](Rng& r) { return std::vector<Tensor>{random_tensor(dim(r), 5, r)}; },
               [](std::span<const Var> v) { return ad::slice_cols(v[0], 1, 3); }});
  c.push_back({"slice_rows",
               [](Rng& r) { return std::vector<Tensor>{random_tensor(5, dim(r), r)}; },
               [](std::span<const Var> v) { return ad::slice_rows(v[0], 2, 2); }});
  c.push_back({"pad_cols",
               [](Rng& r) { return std::vector<Tensor>{random_tensor(dim(r), 2, r)}; },
               [](std::span<const Var> v) { return ad::pad_cols(v[0], 1, 5); }});
  c.push_back({"pad_rows",
               [](Rng& r) { return std::vector<Tensor>{random_tensor(2, dim(r), r)}; },
               [](std::span<const Var> v) { return ad::pad_rows(v[0], 2, 4); }});
  c.push_back({"gather_rows",
               [](Rng& r) { return std::vector<Tensor>{random_tensor(4, dim(r), r)}; },
               [](std::span<const Var> v) {
                 const std::vector<std::size_t> idx{3, 0, 3, 1, 1};
                 return ad::gather_rows(v[0], idx);
               }});
  c.push_back({"scatter_add_rows",
               [](Rng& r) { return std::vector<Tensor>{random_tensor(5, dim(r), r)}; },
               [](std::span<const Var> v) {
                 const std::vector<std::size_t> idx{2, 0, 2, 1, 2};
                 return ad::scatter_add_rows(v[0], idx, 4);
               }});
  c.push_back({"add_row",
               [](Rng& r) {
                 const std::size_t n = dim(r);
                 return std::vector<Tensor>{random_tensor(dim(r), n, r), random_tensor(1, n, r)};
               },
               [](std::span<const Var> v) { return ad::add_row(v[0], v[1]); }});
  c.push_back({"linear",
               [](Rng& r) {
                 const std::size_t b = dim(r), in = dim(r), out = dim(r);
                 return std::vector<Tensor>{random_tensor(b, in, r), random_tensor(out, in, r),
                                            random_tensor(1, out, r)};
               },
               [](std::span<const Var> v) { return ad::linear(v[0], v[1], v[2]); }});
  c.push_back({"cosine_rows",
               [](Rng& r) {
                 const std::size_t m = dim(r), n = 1 + dim(r);
                 return std::vector<Tensor>{random_away_from_zero(m, n, r, 0.2), random_away_from_zero(m, n, r, 0.2)};
               },
               [](std::span<const Var> v) { return ad::cosine_rows(v[0], v[1]); }});
  c.push_back({"layer_norm",
               [](Rng& r) {
                 const std::size_t n = 2 + dim(r);
                 return std::vector<Tensor>{random_tensor(dim(r), n, r, -2, 2), random_tensor(1, n, r),
                                            random_tensor(1, n, r)};
               },
               [](std::span<const Var> v) { return ad::layer_norm(v[0], v[1], v[2]); }});
  return c;
}

// Σ w ⊙ out²: a nonlinear reduction so second derivatives are not trivially 0.
std::pair<Fn, std::vector<Tensor>> reduced(const OpCase& oc, Rng& rng) {
  auto inputs = oc.inputs(rng);
  std::vector<Var> probe;
  for (const auto& t : inputs) probe.push_back(Var::constant(t));
  const Tensor out = oc.op(probe).value();
  inputs.push_back(random_tensor(out.rows(), out.cols(), rng));
  auto op = oc.op;
  Fn f = [op](std::span<const Var> v) {
    const Var out = op(v.first(v.size() - 1));
    return ad::sum_all(v.back() * ad::square(out));
  };
  return {f, std::move(inputs)};
}

}  // namespace

std::vector<CheckSummary> check_all_primitives(std::size_t trials, std::uint64_t seed) {
  std::vector<CheckSummary> out;
  for (const auto& oc : op_cases()) {
    Rng rng = Rng::derive(seed, "fd-first", {fnv1a(oc.name)});
    CheckSummary s{oc.name, 0, 0, 0.0, 1e-4};
    for (std::size_t t = 0; t < trials; ++t) {
      auto [f, inputs] = reduced(oc, rng);
      const auto g = check_input_gradients(f, std::move(inputs), rng, 4, 1e-5);
      s.max_error = std::max(s.max_error, g.max_error);
      s.probes += g.probes;
      ++s.trials;
    }
    out.push_back(s);
  }
  return out;
}

std::vector<CheckSummary> check_all_second_order(std::size_t trials, std::uint64_t seed) {
  std::vector<CheckSummary> out;
  for (const auto& oc : op_cases()) {
    Rng rng = Rng::derive(seed, "fd-second", {fnv1a(oc.name)});
    CheckSummary s{oc.name + " (2nd order)", 0, 0, 0.0, 1e-3};
    for (std::size_t t = 0; t < trials; ++t) {
      auto [f, inputs] = reduced(oc, rng);
      const auto g = check_second_order(f, std::move(inputs), rng, 4, 1e-5);
      s.max_error = std::max(s.max_error, g.max_error);
      s.probes += g.probes;
      ++s.trials;
    }
    out.push_back(s);
  }
  return out;
}

std::vector<CheckSummary> check_model_composites(std::size_t trials, std::uint64_t seed) {
  const data::ZeroShotSplit split = toy_split();
  CheckSummary enc_sum{"encoder ranking loss", 0, 0, 0.0, 1e-4};
  CheckSummary d_sum{"discriminator loss with penalty", 0, 0, 0.0, 1e-3};
  CheckSummary g_sum{"generator loss", 0, 0, 0.0, 1e-4};
  CheckSummary gp_sum{"gradient penalty", 0, 0, 0.0, 1e-3};

  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = Rng::derive(seed, "fd-composite", {t});
    // Neighbor aggregation, entity-pair encoder and the margin ranking loss.
    {
      const std::size_t d = 2 + rng.index(3);
      kge::EmbeddingView view{random_tensor(split.entity_count(), d, rng),
                              random_tensor(split.relations.size(), d, rng)};
      const auto index = data::NeighborIndex::build(split, 2, rng.next_u64());
      const enc::FeatureEncoder encoder(view, index);
      auto params = enc::FeatureEncoderParams::init(d, rng);
      for (auto* p : params.parameters()) {
        for (double& v : p->value().values()) v = rng.uniform(-1, 1);
      }
      const std::vector<data::Triple> refs{split.train[0], split.train[1], split.train[2]};
      const std::vector<data::Triple> pos{split.train[3], split.train[11]};
      const std::vector<data::Triple> neg{{2, 0, 7}, {3, 0, 6}};
      const double margin = rng.uniform(10.0, 13.0);  // keeps every hinge active
      auto loss = [&] {
        const Var ref = ad::mean_rows(encoder.encode_triples(refs, params));
        return enc::margin_rank_loss(ref, encoder.encode_triples(pos, params), encoder.encode_triples(neg, params),
                                     margin);
      };
      auto ps = params.parameters();
      const auto g = check_parameter_gradients(loss, ps, rng, 4, 1e-6);
      enc_sum.max_error = std::max(enc_sum.max_error, g.max_error);
      enc_sum.probes += g.probes;
      ++enc_sum.trials;
    }
    // Adversarial objectives on a small generator/discriminator pair.
    {
      const std::size_t text_dim = 3, noise = 2, width = 4, batch = 3;
      gan::Generator gen(text_dim, noise, 5, width, 0.2, true, rng);
      gan::Discriminator disc(width, 4, 0.2, true, rng);
      for (int i = 0; i < 10; ++i) {
        gen.refresh_spectral();
        disc.refresh_spectral();
      }
      const Tensor text = random_tensor(batch, text_dim, rng);
      const Tensor z = gan::sample_noise(batch, noise, rng);
      const Tensor real = random_tensor(batch, width, rng);
      const Tensor negs = random_tensor(batch, width, rng);
      const std::vector<data::RelationId> labels{0, 1, 0};
      gan::CenterTable table{{0, random_vector(width, rng)}, {1, random_vector(width, rng)}};
      const Tensor centers = gan::center_rows(labels, table);
      const Rng gp_rng = rng;
      Tensor fake;
      {
        ad::NoGradGuard guard;
        fake = gen.forward(Var::constant(text), Var::constant(z)).value();
      }
      auto critic = [&](const Var& x) { return disc.score(x); };

      auto d_loss = [&] {
        const auto r = disc.forward(Var::constant(real));
        const auto f = disc.forward(Var::constant(fake));
        const auto n = disc.forward(Var::constant(negs));
        Rng local = gp_rng;
        return ad::mean_all(f.score) - ad::mean_all(r.score) +
               ad::scale(gan::classification_loss(f.projection, centers, n.projection, 10.0), 0.5) +
               ad::scale(gan::classification_loss(r.projection, centers, n.projection, 10.0), 0.5) +
               gan::gradient_penalty(real, fake, critic, local, 10.0);
      };
      auto gp_only = [&] {
        Rng local = gp_rng;
        return gan::gradient_penalty(real, fake, critic, local, 10.0);
      };
      auto g_loss = [&] {
        const Var x = gen.forward(Var::constant(text), Var::constant(z));
        return -ad::mean_all(disc.score(x)) + gan::classification_loss(x, centers, Var::constant(negs), 10.0) +
               gan::pivot_regularizer(x, labels, table);
      };
      auto dp = disc.parameters();
      auto gpm = gen.parameters();
      const auto gd = check_parameter_gradients(d_loss, dp, rng, 4, 1e-6);
      const auto gg = check_parameter_gradients(g_loss, gpm, rng, 4, 1e-6);
      const auto gq = check_parameter_gradients(gp_only, dp, rng, 4, 1e-6);
      d_sum.max_error = std::max(d_sum.max_error, gd.max_error);
      g_sum.max_error = std::max(g_sum.max_error, gg.max_error);
      gp_sum.max_error = std::max(gp_sum.max_error, gq.max_error);
      d_sum.probes += gd.probes;
      g_sum.probes += gg.probes;
      gp_sum.probes += gq.probes;
      ++d_sum.trials;
      ++g_sum.trials;
      ++gp_sum.trials;
    }
  }
  return {enc_sum, d_sum, g_sum, gp_sum};
}

}  // namespace zskg::testing
