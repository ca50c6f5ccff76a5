#include "zskg/gan.hpp"

#include <cmath>
#include <set>

#include "zskg/error.hpp"

namespace zskg::gan {

void GanConfig::apply(const KeyValues& values) {
  for (const auto& [key, value] : values) {
    if (key == "noise_dim") noise_dim = parse_count(key, value);
    else if (key == "critic_iters") critic_iters = parse_count(key, value);
    else if (key == "learning_rate") learning_rate = parse_real(key, value);
    else if (key == "beta1") beta1 = parse_real(key, value);
    else if (key == "beta2") beta2 = parse_real(key, value);
    else if (key == "margin") margin = parse_real(key, value);
    else if (key == "gp_weight") gp_weight = parse_real(key, value);
    else if (key == "pivot_weight") pivot_weight = parse_real(key, value);
    else if (key == "leaky_slope") leaky_slope = parse_real(key, value);
    else if (key == "steps") steps = parse_count(key, value);
    else if (key == "batch_size") batch_size = parse_count(key, value);
    else if (key == "relations_per_batch") relations_per_batch = parse_count(key, value);
    else if (key == "generator_hidden") generator_hidden = parse_count(key, value);
    else if (key == "discriminator_hidden") discriminator_hidden = parse_count(key, value);
    else if (key == "eval_every") eval_every = parse_count(key, value);
    else if (key == "n_test") n_test = parse_count(key, value);
    else if (key == "spectral_norm") spectral_norm = parse_flag(key, value);
    else throw ConfigError("unknown GAN config key '" + key + "'");
  }
}

KeyValues GanConfig::to_key_values() const {
  return {{"noise_dim", std::to_string(noise_dim)},
          {"critic_iters", std::to_string(critic_iters)},
          {"learning_rate", format_real(learning_rate)},
          {"beta1", format_real(beta1)},
          {"beta2", format_real(beta2)},
          {"margin", format_real(margin)},
          {"gp_weight", format_real(gp_weight)},
          {"pivot_weight", format_real(pivot_weight)},
          {"leaky_slope", format_real(leaky_slope)},
          {"steps", std::to_string(steps)},
          {"batch_size", std::to_string(batch_size)},
          {"relations_per_batch", std::to_string(relations_per_batch)},
          {"generator_hidden", std::to_string(generator_hidden)},
          {"discriminator_hidden", std::to_string(discriminator_hidden)},
          {"eval_every", std::to_string(eval_every)},
          {"n_test", std::to_string(n_test)},
          {"spectral_norm", spectral_norm ? "true" : "false"}};
}

void GanConfig::validate() const {
  if (critic_iters < 1) throw ConfigError("critic_iters must be at least 1");
  if (learning_rate <= 0.0) throw ConfigError("GAN learning_rate must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (margin <= 0.0) throw ConfigError("GAN margin must be positive");
  if (gp_weight < 0.0 || pivot_weight < 0.0) throw ConfigError("loss weights must be non-negative");
  if (batch_size == 0 || relations_per_batch == 0) throw ConfigError("batch sizes must be positive");
  if (n_test == 0) throw ConfigError("n_test must be positive");
}

namespace {

Dense dense_from(const Checkpoint& ckpt, const std::string& prefix) {
  const Tensor& w = ckpt.tensor(prefix + ".weight");
  Rng scratch(0);
  Dense layer(prefix, w.cols(), w.rows(), scratch, ckpt.has(prefix + ".sn_u"));
  restore_dense(ckpt, prefix, layer);
  return layer;
}

double slope_from(const Checkpoint& ckpt, const std::string& prefix) {
  if (!ckpt.config.contains(prefix)) throw DataError("checkpoint lacks the '" + prefix + "' network");
  return ckpt.config.at(prefix).value("leaky_slope", 0.2);
}

}  // namespace

Generator::Generator(std::size_t text_dim, std::size_t noise_dim, std::size_t hidden, std::size_t out_dim,
                     double leaky_slope, bool spectral, Rng& rng)
    : fc1("fc1", text_dim + noise_dim, hidden, rng, spectral),
      fc2("fc2", hidden, out_dim, rng, spectral),
      ln_gain("ln_gain", Tensor(1, hidden, 1.0)),
      ln_bias("ln_bias", Tensor(1, hidden, 0.0)),
      text_dim_(text_dim),
      noise_dim_(noise_dim),
      slope_(leaky_slope) {
  if (text_dim == 0 || hidden < 2 || out_dim == 0) throw ConfigError("generator: bad layer sizes");
}

ad::Var Generator::forward(const ad::Var& text, const ad::Var& noise) const {
  if (text.cols() != text_dim_) throw DataError("generator: text embedding has the wrong width");
  ad::Var input = text;
  if (noise_dim_ > 0) {
    if (noise.cols() != noise_dim_ || noise.rows() != text.rows()) {
      throw DataError("generator: noise has the wrong shape");
    }
    std::vector<ad::Var> parts{text, noise};
    input = ad::concat_cols(parts);
  }
  ad::Var h = ad::leaky_relu(fc1.forward(input), slope_);
  return fc2.forward(ad::layer_norm(h, ln_gain.var(), ln_bias.var()));
}

std::vector<double> Generator::generate(std::span<const double> text, std::span<const double> z) const {
  ad::NoGradGuard no_grad;
  ad::Var t = ad::Var::constant(Tensor(1, text.size(), std::vector<double>(text.begin(), text.end())));
  ad::Var n = ad::Var::constant(Tensor(1, z.size(), std::vector<double>(z.begin(), z.end())));
  const Tensor out = forward(t, n).value();
  return {out.values().begin(), out.values().end()};
}

std::vector<ad::Parameter*> Generator::parameters() {
  return {&fc1.weight, &fc1.bias, &fc2.weight, &fc2.bias, &ln_gain, &ln_bias};
}

void Generator::refresh_spectral() {
  fc1.refresh_spectral();
  fc2.refresh_spectral();
}

void Generator::store(Checkpoint& ckpt, const std::string& prefix) const {
  store_dense(ckpt, prefix + ".fc1", fc1);
  store_dense(ckpt, prefix + ".fc2", fc2);
  ckpt.tensors[prefix + ".ln_gain"] = ln_gain.value();
  ckpt.tensors[prefix + ".ln_bias"] = ln_bias.value();
  ckpt.config[prefix] = {{"text_dim", text_dim_}, {"noise_dim", noise_dim_}, {"leaky_slope", slope_}};
}

Generator Generator::restore(const Checkpoint& ckpt, const std::string& prefix) {
  Generator g;
  g.slope_ = slope_from(ckpt, prefix);
  const auto& meta = ckpt.config.at(prefix);
  g.text_dim_ = meta.at("text_dim").get<std::size_t>();
  g.noise_dim_ = meta.at("noise_dim").get<std::size_t>();
  g.fc1 = dense_from(ckpt, prefix + ".fc1");
  g.fc2 = dense_from(ckpt, prefix + ".fc2");
  if (g.fc1.in_features() != g.text_dim_ + g.noise_dim_ || g.fc2.in_features() != g.fc1.out_features()) {
    throw DataError("generator checkpoint: inconsistent layer shapes");
  }
  g.ln_gain = ad::Parameter("ln_gain", ckpt.tensor(prefix + ".ln_gain"));
  g.ln_bias = ad::Parameter("ln_bias", ckpt.tensor(prefix + ".ln_bias"));
  if (g.ln_gain.value().cols() != g.fc1.out_features() || !g.ln_bias.value().same_shape(g.ln_gain.value())) {
    throw DataError("generator checkpoint: layer-norm shape mismatch");
  }
  return g;
}

Discriminator::Discriminator(std::size_t in_dim, std::size_t hidden, double leaky_slope, bool spectral, Rng& rng)
    : shared("shared", in_dim, hidden, rng, spectral),
      critic("critic", hidden, 1, rng, spectral),
      classifier("classifier", hidden, in_dim, rng, spectral),
      slope_(leaky_slope) {
  if (in_dim == 0 || hidden == 0) throw ConfigError("discriminator: bad layer sizes");
}

DiscriminatorOutput Discriminator::forward(const ad::Var& x) const {
  if (x.cols() != in_dim()) throw DataError("discriminator: input has the wrong width");
  ad::Var h = ad::leaky_relu(shared.forward(x), slope_);
  return {critic.forward(h), classifier.forward(h)};
}

ad::Var Discriminator::score(const ad::Var& x) const {
  if (x.cols() != in_dim()) throw DataError("discriminator: input has the wrong width");
  return critic.forward(ad::leaky_relu(shared.forward(x), slope_));
}

std::vector<ad::Parameter*> Discriminator::parameters() {
  return {&shared.weight, &shared.bias, &critic.weight, &critic.bias, &classifier.weight, &classifier.bias};
}

void Discriminator::refresh_spectral() {
  shared.refresh_spectral();
  critic.refresh_spectral();
  classifier.refresh_spectral();
}

void Discriminator::store(Checkpoint& ckpt, const std::string& prefix) const {
  store_dense(ckpt, prefix + ".shared", shared);
  store_dense(ckpt, prefix + ".critic", critic);
  store_dense(ckpt, prefix + ".classifier", classifier);
  ckpt.config[prefix] = {{"leaky_slope", slope_}};
}

Discriminator Discriminator::restore(const Checkpoint& ckpt, const std::string& prefix) {
  Discriminator d;
  d.slope_ = slope_from(ckpt, prefix);
  d.shared = dense_from(ckpt, prefix + ".shared");
  d.critic = dense_from(ckpt, prefix + ".critic");
  d.classifier = dense_from(ckpt, prefix + ".classifier");
  const std::size_t h = d.shared.out_features();
  if (d.critic.in_features() != h || d.critic.out_features() != 1 || d.classifier.in_features() != h ||
      d.classifier.out_features() != d.shared.in_features()) {
    throw DataError("discriminator checkpoint: inconsistent layer shapes");
  }
  return d;
}

Tensor center_rows(std::span<const data::RelationId> labels, const CenterTable& centers) {
  if (labels.empty()) return Tensor();
  std::size_t width = 0;
  Tensor out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = centers.find(labels[i]);
    if (it == centers.end()) throw DataError("no center for relation " + std::to_string(labels[i]));
    if (i == 0) {
      width = it->second.size();
      out = Tensor(labels.size(), width);
    }
    if (it->second.size() != width) throw DataError("relation centers have different widths");
    std::copy(it->second.begin(), it->second.end(), out.row(i).begin());
  }
  return out;
}

ad::Var classification_loss(const ad::Var& candidates, const Tensor& centers, const ad::Var& negatives,
                            double margin) {
  using namespace ad;
  Var c = Var::constant(centers);
  return mean_all(relu(add_scalar(cosine_rows(c, negatives) - cosine_rows(c, candidates), margin)));
}

ad::Var gradient_penalty(const Tensor& real, const Tensor& fake,
                         const std::function<ad::Var(const ad::Var&)>& critic, Rng& rng, double weight) {
  if (!real.same_shape(fake)) throw std::invalid_argument("gradient_penalty: real and fake shapes differ");
  Tensor mix(real.rows(), real.cols());
  for (std::size_t i = 0; i < real.rows(); ++i) {
    const double eps = rng.uniform();
    for (std::size_t j = 0; j < real.cols(); ++j) mix(i, j) = eps * real(i, j) + (1.0 - eps) * fake(i, j);
  }
  ad::Var x = ad::Var::variable(std::move(mix));
  ad::Var scores = critic(x);
  std::vector<ad::Var> inputs{x};
  ad::Var g = ad::grad(ad::sum_all(scores), inputs, /*create_graph=*/true)[0];
  // The tiny offset keeps the norm differentiable when a gradient row is 0.
  ad::Var norms = ad::sqrt(ad::add_scalar(ad::sum_cols(ad::square(g)), 1e-12));
  return ad::scale(ad::mean_all(ad::square(ad::add_scalar(norms, -1.0))), weight);
}

ad::Var pivot_regularizer(const ad::Var& generated, std::span<const data::RelationId> labels,
                          const CenterTable& centers) {
  if (labels.size() != generated.rows()) throw std::invalid_argument("pivot_regularizer: one label per row");
  std::map<data::RelationId, std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) rows[labels[i]].push_back(i);
  if (rows.empty()) throw std::invalid_argument("pivot_regularizer: empty batch");
  std::vector<ad::Var> terms;
  for (const auto& [r, idx] : rows) {
    auto it = centers.find(r);
    if (it == centers.end()) throw DataError("no center for relation " + std::to_string(r));
    if (it->second.size() != generated.cols()) throw DataError("center width differs from the generator output");
    ad::Var mean = ad::mean_rows(ad::gather_rows(generated, idx));
    ad::Var diff = mean - ad::Var::constant(Tensor::row_vector(it->second));
    terms.push_back(ad::sum_all(ad::square(diff)));
  }
  ad::Var total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = total + terms[i];
  return ad::scale(total, 1.0 / static_cast<double>(terms.size()));
}

Tensor sample_noise(std::size_t rows, std::size_t noise_dim, Rng& rng) {
  Tensor z(rows, noise_dim);
  for (double& v : z.values()) v = rng.normal();
  return z;
}

}  // namespace zskg::gan
