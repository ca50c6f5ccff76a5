#include "oracles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unistd.h>

namespace zskg::testing {

Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

Tensor random_away_from_zero(std::size_t rows, std::size_t cols, Rng& rng, double gap, double hi) {
  Tensor t(rows, cols);
  for (double& v : t.values()) {
    const double mag = rng.uniform(gap, hi);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

std::vector<double> random_vector(std::size_t n, Rng& rng, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

namespace {

double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({1.0, std::abs(a), std::abs(n)});
}

std::vector<ad::Var> as_variables(const std::vector<Tensor>& inputs) {
  std::vector<ad::Var> vars;
  for (const auto& t : inputs) vars.push_back(ad::Var::variable(t));
  return vars;
}

double eval_at(const std::function<ad::Var(std::span<const ad::Var>)>& f, const std::vector<Tensor>& inputs) {
  auto vars = as_variables(inputs);
  return f(vars).item();
}

// Σ c ⊙ ∂f/∂x₀ without recording the backward pass.
double directional_first(const std::function<ad::Var(std::span<const ad::Var>)>& f,
                         const std::vector<Tensor>& inputs, const Tensor& c) {
  auto vars = as_variables(inputs);
  const ad::Var out = f(vars);
  std::vector<ad::Var> wrt{vars[0]};
  const Tensor g = ad::grad(out, wrt)[0].value();
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += c[i] * g[i];
  return s;
}

}  // namespace

GradCheck check_input_gradients(const std::function<ad::Var(std::span<const ad::Var>)>& f,
                                std::vector<Tensor> inputs, Rng& rng, std::size_t probes, double h) {
  auto vars = as_variables(inputs);
  const ad::Var out = f(vars);
  const auto grads = ad::grad(out, vars);
  GradCheck result;
  for (std::size_t p = 0; p < probes; ++p) {
    const std::size_t k = rng.index(inputs.size());
    if (inputs[k].size() == 0) continue;
    const std::size_t j = rng.index(inputs[k].size());
    const double saved = inputs[k][j];
    inputs[k][j] = saved + h;
    const double up = eval_at(f, inputs);
    inputs[k][j] = saved - h;
    const double down = eval_at(f, inputs);
    inputs[k][j] = saved;
    const double numeric = (up - down) / (2 * h);
    result.max_error = std::max(result.max_error, rel_error(grads[k].value()[j], numeric));
    ++result.probes;
  }
  return result;
}

GradCheck check_second_order(const std::function<ad::Var(std::span<const ad::Var>)>& f,
                             std::vector<Tensor> inputs, Rng& rng, std::size_t probes, double h) {
  const Tensor c = random_tensor(inputs[0].rows(), inputs[0].cols(), rng);
  auto vars = as_variables(inputs);
  const ad::Var out = f(vars);
  std::vector<ad::Var> wrt{vars[0]};
  const ad::Var g = ad::grad(out, wrt, /*create_graph=*/true)[0];
  const ad::Var s = ad::sum_all(ad::mul(g, ad::Var::constant(c)));
  const auto second = ad::grad(s, vars);
  GradCheck result;
  for (std::size_t p = 0; p < probes; ++p) {
    const std::size_t k = rng.index(inputs.size());
    if (inputs[k].size() == 0) continue;
    const std::size_t j = rng.index(inputs[k].size());
    const double saved = inputs[k][j];
    inputs[k][j] = saved + h;
    const double up = directional_first(f, inputs, c);
    inputs[k][j] = saved - h;
    const double down = directional_first(f, inputs, c);
    inputs[k][j] = saved;
    const double numeric = (up - down) / (2 * h);
    result.max_error = std::max(result.max_error, rel_error(second[k].value()[j], numeric));
    ++result.probes;
  }
  return result;
}

GradCheck check_parameter_gradients(const std::function<ad::Var()>& loss,
                                    std::span<ad::Parameter* const> params, Rng& rng, std::size_t probes,
                                    double h) {
  std::vector<ad::Var> vars;
  for (auto* p : params) vars.push_back(p->var());
  const auto grads = ad::grad(loss(), vars);
  GradCheck result;
  for (std::size_t p = 0; p < probes; ++p) {
    const std::size_t k = rng.index(params.size());
    Tensor& value = params[k]->value();
    const std::size_t j = rng.index(value.size());
    const double saved = value[j];
    value[j] = saved + h;
    const double up = loss().item();
    value[j] = saved - h;
    const double down = loss().item();
    value[j] = saved;
    const double numeric = (up - down) / (2 * h);
    result.max_error = std::max(result.max_error, rel_error(grads[k].value()[j], numeric));
    ++result.probes;
  }
  return result;
}

double brute_cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

double brute_hinge(double margin, double positive, double negative) {
  const double v = margin - positive + negative;
  return v > 0 ? v : 0.0;
}

std::size_t sort_rank(std::span<const double> scores, std::size_t truth) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (a == truth) return false;
    if (b == truth) return true;
    return a < b;
  });
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), truth) - order.begin()) + 1;
}

BruteMetrics brute_metrics(std::span<const std::size_t> ranks) {
  BruteMetrics m;
  for (std::size_t r : ranks) {
    m.mrr += 1.0 / static_cast<double>(r);
    if (r <= 1) m.hits1 += 1;
    if (r <= 5) m.hits5 += 1;
    if (r <= 10) m.hits10 += 1;
  }
  const double n = static_cast<double>(ranks.size());
  m.mrr /= n;
  m.hits1 /= n;
  m.hits5 /= n;
  m.hits10 /= n;
  return m;
}

double ScalarAdam::step(double theta, double g) {
  ++t;
  m = b1 * m + (1 - b1) * g;
  v = b2 * v + (1 - b2) * g * g;
  const double mh = m / (1 - std::pow(b1, t));
  const double vh = v / (1 - std::pow(b2, t));
  return theta - lr * mh / (std::sqrt(vh) + eps);
}

std::vector<double> singular_values(const Tensor& w) {
  // Gram matrix on the smaller side; the nonzero spectrum is the same.
  const bool wide = w.rows() < w.cols();
  const std::size_t n = wide ? w.rows() : w.cols();
  const std::size_t m = wide ? w.cols() : w.rows();
  auto at = [&](std::size_t k, std::size_t i) { return wide ? w(i, k) : w(k, i); };
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < m; ++k) a[i][j] += at(k, i) * at(k, j);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::sqrt(std::max(0.0, a[i][i])));
  std::sort(out.rbegin(), out.rend());
  return out;
}

double top_singular_value(const Tensor& w) { return singular_values(w).front(); }

std::map<std::string, double> brute_tfidf(const std::vector<std::string>& doc,
                                          const std::vector<std::vector<std::string>>& corpus) {
  std::vector<std::pair<std::string, double>> raw;
  for (const auto& w : doc) {
    bool found = false;
    for (auto& [word, count] : raw) {
      if (word == w) {
        count += 1;
        found = true;
      }
    }
    if (!found) raw.emplace_back(w, 1.0);
  }
  double norm = 0;
  for (auto& [word, weight] : raw) {
    double df = 0;
    for (const auto& d : corpus) {
      if (std::find(d.begin(), d.end(), word) != d.end()) df += 1;
    }
    if (df == 0) df = 1;
    weight *= std::log(static_cast<double>(corpus.size()) / df);
    norm += weight * weight;
  }
  std::map<std::string, double> out;
  for (const auto& [word, weight] : raw) out[word] = norm > 0 ? weight / std::sqrt(norm) : 0.0;
  return out;
}

data::ZeroShotSplit toy_split() {
  using data::RelationRole;
  data::ZeroShotSplit s;
  for (int i = 0; i < 8; ++i) s.entities.push_back("e" + std::to_string(i));
  s.relations = {{0, "r0", RelationRole::seen, "the first league players"},
                 {1, "r1", RelationRole::seen, "team plays in city"},
                 {2, "r2", RelationRole::seen, "athlete born in city"},
                 {3, "v0", RelationRole::validation, "league of the team"},
                 {4, "u0", RelationRole::unseen, "players born in the league city"}};
  s.train = {{0, 0, 1}, {0, 0, 2}, {1, 0, 3}, {2, 0, 4}, {3, 1, 5}, {4, 1, 5},
             {5, 1, 6}, {6, 2, 7}, {7, 2, 0}, {1, 2, 6}, {2, 1, 7}, {3, 0, 4}};
  s.valid = {{0, 3, 5}, {1, 3, 6}};
  s.test = {{2, 4, 3}, {4, 4, 0}, {5, 4, 1}};
  s.valid_candidates = {{0, 3, 5, {5, 6, 7}}, {1, 3, 6, {5, 6, 7, 2}}};
  s.test_candidates = {{2, 4, 3, {3, 0, 1, 5}}, {4, 4, 0, {0, 3}}, {5, 4, 1, {1, 2, 3, 4, 6}}};
  s.reindex();
  s.validate();
  return s;
}

std::filesystem::path scratch_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("zskg-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace zskg::testing
