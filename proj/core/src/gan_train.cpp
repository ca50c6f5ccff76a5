#include "zskg/gan_train.hpp"

#include <algorithm>
#include <cmath>

#include "zskg/error.hpp"

namespace zskg::gan {

nlohmann::json to_json(const GanLogEntry& entry) {
  nlohmann::json j{{"step", entry.step},   {"d_loss", entry.d_loss}, {"g_loss", entry.g_loss},
                   {"gp", entry.gp},       {"l_cls", entry.l_cls},   {"l_p", entry.l_p}};
  if (entry.valid_mrr) j["valid_mrr"] = *entry.valid_mrr;
  return j;
}

namespace {

constexpr int kSpectralWarmUp = 512;

std::size_t or_default(std::size_t value, std::size_t fallback) { return value == 0 ? fallback : value; }

void check_finite(double value, const char* what, std::size_t step) {
  if (!std::isfinite(value)) {
    throw NumericalError(std::string("GAN training diverged: ") + what + " is non-finite at step " +
                         std::to_string(step));
  }
}

}  // namespace

GanTrainer::GanTrainer(const data::ZeroShotSplit& split, const enc::FrozenEncoder& encoder, eval::TextTable texts,
                       CenterTable centers, const GanConfig& config, Rng& rng)
    : split_(split),
      encoder_(encoder),
      texts_(std::move(texts)),
      centers_(std::move(centers)),
      config_(config),
      sampler_(split) {
  config_.validate();
  for (auto r : split.relations_with_role(data::RelationRole::seen)) {
    if (!sampler_.triples_of(r).empty() && centers_.count(r)) relations_.push_back(r);
  }
  if (relations_.empty()) throw DataError("GAN training needs seen relations with triples and centers");
  for (const auto& r : split.relations) names_.push_back(r.name);
  std::size_t text_dim = 0;
  for (const auto& t : texts_) text_dim = std::max(text_dim, t.size());
  for (auto r : relations_) {
    if (r >= texts_.size() || texts_[r].size() != text_dim) {
      throw DataError("relation '" + split.relations[r].name + "' has no text embedding");
    }
  }
  const std::size_t fact = encoder.fact_dim();
  generator_ = Generator(text_dim, config_.noise_dim, or_default(config_.generator_hidden, 2 * fact), fact,
                         config_.leaky_slope, config_.spectral_norm, rng);
  discriminator_ = Discriminator(fact, or_default(config_.discriminator_hidden, fact), config_.leaky_slope,
                                 config_.spectral_norm, rng);
  for (auto* layer : generator_.layers()) layer->warm_up_spectral(kSpectralWarmUp);
  for (auto* layer : discriminator_.layers()) layer->warm_up_spectral(kSpectralWarmUp);
  best_generator_ = generator_;
  const AdamConfig adam{config_.learning_rate, config_.beta1, config_.beta2};
  adam_g_ = Adam(adam, generator_.parameters());
  adam_d_ = Adam(adam, discriminator_.parameters());
  rng_ = Rng(rng.next_u64());
  valid_seed_ = rng.next_u64();
}

GanTrainer::Batch GanTrainer::sample_batch() {
  Batch b;
  const std::size_t k = std::min(config_.relations_per_batch, relations_.size());
  const auto picks = rng_.sample_without_replacement(relations_.size(), k);
  const std::size_t n = config_.batch_size;
  const std::size_t fact = encoder_.fact_dim();
  const std::size_t text_dim = generator_.text_dim();
  b.real = Tensor(n, fact);
  b.negatives = Tensor(n, fact);
  b.text = Tensor(n, text_dim);
  std::size_t row = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const auto r = relations_[picks[j]];
    const std::size_t count = n / k + (j < n % k ? 1 : 0);
    const auto& triples = sampler_.triples_of(r);
    for (std::size_t c = 0; c < count; ++c, ++row) {
      const auto& t = triples[rng_.index(triples.size())];
      const auto neg = sampler_.pollute_tail(t, rng_);
      encoder_.fact_into(t.head, t.tail, b.real.row(row));
      encoder_.fact_into(neg.head, neg.tail, b.negatives.row(row));
      std::copy(texts_[r].begin(), texts_[r].end(), b.text.row(row).begin());
      b.labels.push_back(r);
    }
  }
  b.noise = sample_noise(n, generator_.noise_dim(), rng_);
  return b;
}

double GanTrainer::discriminator_update(double& gp_out) {
  Batch b = sample_batch();
  Tensor fake;
  {
    ad::NoGradGuard no_grad;
    fake = generator_.forward(ad::Var::constant(b.text), ad::Var::constant(b.noise)).value();
  }
  const Tensor centers = center_rows(b.labels, centers_);
  const auto real_out = discriminator_.forward(ad::Var::constant(b.real));
  const auto fake_out = discriminator_.forward(ad::Var::constant(fake));
  const auto neg_out = discriminator_.forward(ad::Var::constant(b.negatives));
  ad::Var wasserstein = ad::mean_all(fake_out.score) - ad::mean_all(real_out.score);
  ad::Var cls_fake = classification_loss(fake_out.projection, centers, neg_out.projection, config_.margin);
  ad::Var cls_real = classification_loss(real_out.projection, centers, neg_out.projection, config_.margin);
  ad::Var gp = gradient_penalty(
      b.real, fake, [this](const ad::Var& x) { return discriminator_.score(x); }, rng_, config_.gp_weight);
  ad::Var loss = wasserstein + ad::scale(cls_fake, 0.5) + ad::scale(cls_real, 0.5) + gp;
  const double value = loss.item();
  check_finite(value, "discriminator loss", step_ + 1);
  auto params = discriminator_.parameters();
  adam_d_.zero_grad();
  ad::backward(loss, params);
  adam_d_.step();
  discriminator_.refresh_spectral();
  ++d_updates_;
  gp_out = gp.item();
  return value;
}

double GanTrainer::generator_update(double& l_cls_out, double& l_p_out) {
  Batch b = sample_batch();
  const Tensor centers = center_rows(b.labels, centers_);
  ad::Var fake = generator_.forward(ad::Var::constant(b.text), ad::Var::constant(b.noise));
  ad::Var critic = ad::mean_all(discriminator_.score(fake));
  ad::Var cls = classification_loss(fake, centers, ad::Var::constant(b.negatives), config_.margin);
  ad::Var pivot = pivot_regularizer(fake, b.labels, centers_);
  ad::Var loss = -critic + cls + ad::scale(pivot, config_.pivot_weight);
  const double value = loss.item();
  check_finite(value, "generator loss", step_ + 1);
  auto params = generator_.parameters();
  adam_g_.zero_grad();
  ad::backward(loss, params);
  adam_g_.step();
  generator_.refresh_spectral();
  ++g_updates_;
  l_cls_out = cls.item();
  l_p_out = pivot.item();
  return value;
}

std::optional<double> GanTrainer::validate() {
  if (split_.valid_candidates.empty()) return std::nullopt;
  const auto evaluation = eval::evaluate_generator(split_.valid_candidates, generator_, texts_, encoder_,
                                                   config_.n_test, valid_seed_, names_);
  const double mrr = evaluation.report.mrr;
  if (!best_valid_mrr_ || mrr > *best_valid_mrr_) {
    best_valid_mrr_ = mrr;
    best_generator_ = generator_;
    best_step_ = step_;
  }
  return mrr;
}

void GanTrainer::train(std::size_t max_steps, const Observer& observer) {
  if (!initial_validation_done_) {
    validate();
    initial_validation_done_ = true;
  }
  const bool has_validation = !split_.valid_candidates.empty();
  for (std::size_t run = 0; run < max_steps && step_ < config_.steps; ++run) {
    GanLogEntry entry;
    for (std::size_t i = 0; i < config_.critic_iters; ++i) {
      double gp = 0.0;
      entry.d_loss += discriminator_update(gp);
      entry.gp += gp;
      if (observer) observer(UpdateKind::discriminator, *this);
    }
    entry.d_loss /= static_cast<double>(config_.critic_iters);
    entry.gp /= static_cast<double>(config_.critic_iters);
    entry.g_loss = generator_update(entry.l_cls, entry.l_p);
    ++step_;
    entry.step = step_;
    if (observer) observer(UpdateKind::generator, *this);
    if (has_validation && config_.eval_every > 0 &&
        (step_ % config_.eval_every == 0 || step_ == config_.steps)) {
      entry.valid_mrr = validate();
    }
    if (!has_validation) {
      best_generator_ = generator_;
      best_step_ = step_;
    }
    log_.push_back(entry);
  }
}

Checkpoint GanTrainer::save_state() const {
  Checkpoint ckpt;
  ckpt.kind = "gan-state";
  generator_.store(ckpt, "generator");
  discriminator_.store(ckpt, "discriminator");
  best_generator_.store(ckpt, "best_generator");
  ckpt.optimizer = {{"generator", adam_to_json(adam_g_.state())},
                    {"discriminator", adam_to_json(adam_d_.state())}};
  ckpt.rng = {{"train", rng_.serialize()}, {"valid_seed", valid_seed_}};
  nlohmann::json gan = nlohmann::json::object();
  for (const auto& [k, v] : config_.to_key_values()) gan[k] = v;
  ckpt.config["gan"] = gan;
  ckpt.config["progress"] = {{"step", step_},
                             {"d_updates", d_updates_},
                             {"g_updates", g_updates_},
                             {"best_step", best_step_},
                             {"initial_validation_done", initial_validation_done_}};
  if (best_valid_mrr_) ckpt.config["progress"]["best_valid_mrr"] = *best_valid_mrr_;
  return ckpt;
}

void GanTrainer::load_state(const Checkpoint& ckpt) {
  if (ckpt.kind != "gan-state") throw DataError("checkpoint of kind '" + ckpt.kind + "' is not a GAN state");
  try {
    Generator g = Generator::restore(ckpt, "generator");
    Discriminator d = Discriminator::restore(ckpt, "discriminator");
    Generator best = Generator::restore(ckpt, "best_generator");
    if (g.out_dim() != generator_.out_dim() || g.text_dim() != generator_.text_dim() ||
        g.noise_dim() != generator_.noise_dim() || d.in_dim() != discriminator_.in_dim()) {
      throw DataError("GAN state does not match the configured networks");
    }
    generator_ = std::move(g);
    discriminator_ = std::move(d);
    best_generator_ = std::move(best);
    const AdamConfig adam{config_.learning_rate, config_.beta1, config_.beta2};
    adam_g_ = Adam(adam, generator_.parameters());
    adam_d_ = Adam(adam, discriminator_.parameters());
    adam_g_.state() = adam_from_json(ckpt.optimizer.at("generator"));
    adam_d_.state() = adam_from_json(ckpt.optimizer.at("discriminator"));
    rng_.deserialize(ckpt.rng.at("train").get<std::string>());
    valid_seed_ = ckpt.rng.at("valid_seed").get<std::uint64_t>();
    const auto& p = ckpt.config.at("progress");
    step_ = p.at("step").get<std::size_t>();
    d_updates_ = p.at("d_updates").get<std::size_t>();
    g_updates_ = p.at("g_updates").get<std::size_t>();
    best_step_ = p.at("best_step").get<std::size_t>();
    initial_validation_done_ = p.at("initial_validation_done").get<bool>();
    best_valid_mrr_.reset();
    if (p.contains("best_valid_mrr")) best_valid_mrr_ = p.at("best_valid_mrr").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed GAN state: ") + e.what());
  }
  log_.clear();
}

}  // namespace zskg::gan
