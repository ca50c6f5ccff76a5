#include "zskg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "zskg/error.hpp"

namespace zskg::ad {
namespace {

thread_local bool g_grad_enabled = true;

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

Var make_op(Tensor value, std::vector<Var> parents, BackwardFn backward, const char* name) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = name;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

Tensor zeros_like(const Tensor& t) { return Tensor(t.rows(), t.cols()); }

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, F f, const char* what) {
  require(a.same_shape(b), what);
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

// C (m×n) += A (m×k) · B (k×n), with optional transposes of the stored operands.
Tensor gemm(const Tensor& a, bool ta, const Tensor& b, bool tb) {
  const std::size_t m = ta ? a.cols() : a.rows();
  const std::size_t k = ta ? a.rows() : a.cols();
  const std::size_t kb = tb ? b.cols() : b.rows();
  const std::size_t n = tb ? b.rows() : b.cols();
  require(k == kb, "matmul: inner dimension mismatch");
  Tensor c(m, n);
  if (!ta && !tb) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = a(i, p);
        if (aip == 0.0) continue;
        auto brow = b.row(p);
        auto crow = c.row(i);
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  } else if (!ta && tb) {
    for (std::size_t i = 0; i < m; ++i) {
      auto arow = a.row(i);
      for (std::size_t j = 0; j < n; ++j) {
        auto brow = b.row(j);
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
        c(i, j) = s;
      }
    }
  } else if (ta && !tb) {
    for (std::size_t p = 0; p < k; ++p) {
      auto arow = a.row(p);
      auto brow = b.row(p);
      for (std::size_t i = 0; i < m; ++i) {
        const double api = arow[i];
        if (api == 0.0) continue;
        auto crow = c.row(i);
        for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += a(p, i) * b(j, p);
        c(i, j) = s;
      }
    }
  }
  return c;
}

}  // namespace

Var Var::constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = "constant";
  return Var(std::move(node));
}

Var Var::variable(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Tensor& Var::mutable_value() {
  if (!is_leaf()) throw std::logic_error("mutable_value on a non-leaf Var");
  return node_->value;
}

double Var::item() const {
  require(rows() == 1 && cols() == 1, "item: tensor is not 1x1");
  return node_->value[0];
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace {

class GradModeScope {
 public:
  explicit GradModeScope(bool enabled) : previous_(g_grad_enabled) { g_grad_enabled = enabled; }
  ~GradModeScope() { g_grad_enabled = previous_; }

 private:
  bool previous_;
};

std::vector<Node*> topological_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].node();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children
}

}  // namespace

std::vector<Var> grad(const Var& output, std::span<const Var> inputs, bool create_graph) {
  require(output.defined(), "grad: undefined output");
  require(output.rows() == 1 && output.cols() == 1, "grad: output must be a scalar");
  if (!output.value().all_finite()) {
    throw NumericalError("non-finite value in differentiated output");
  }
  std::unordered_map<Node*, Var> grads;
  if (output.requires_grad()) {
    GradModeScope scope(create_graph);
    const auto order = topological_order(output.node());
    grads.emplace(output.node(), Var::constant(Tensor(1, 1, 1.0)));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      auto found = grads.find(node);
      if (found == grads.end() || !node->backward) continue;
      const Var upstream = found->second;
      const Var self(node->shared_from_this());
      std::vector<Var> parent_grads = node->backward(upstream, self);
      for (std::size_t i = 0; i < node->parents.size(); ++i) {
        const Var& parent = node->parents[i];
        if (!parent.requires_grad() || i >= parent_grads.size() || !parent_grads[i].defined()) {
          continue;
        }
        auto slot = grads.find(parent.node());
        if (slot == grads.end()) {
          grads.emplace(parent.node(), parent_grads[i]);
        } else {
          slot->second = add(slot->second, parent_grads[i]);
        }
      }
      if (!create_graph && node != output.node()) {
        // Interior gradients are no longer needed once propagated.
        grads.erase(node);
      }
    }
  }
  std::vector<Var> result;
  result.reserve(inputs.size());
  for (const auto& input : inputs) {
    auto found = grads.find(input.node());
    if (found == grads.end()) {
      result.push_back(Var::constant(zeros_like(input.value())));
    } else {
      if (!found->second.value().all_finite()) {
        throw NumericalError("non-finite gradient");
      }
      result.push_back(found->second);
    }
  }
  return result;
}

// ---- primitives ------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  return make_op(gemm(a.value(), false, b.value(), false), {a, b},
                 [](const Var& g, const Var& out) {
                   const auto& p = out.node()->parents;
                   return std::vector<Var>{matmul_nt(g, p[1]), matmul_tn(p[0], g)};
                 },
                 "matmul");
}

Var matmul_nt(const Var& a, const Var& b) {
  return make_op(gemm(a.value(), false, b.value(), true), {a, b},
                 [](const Var& g, const Var& out) {
                   const auto& p = out.node()->parents;
                   return std::vector<Var>{matmul(g, p[1]), matmul_tn(g, p[0])};
                 },
                 "matmul_nt");
}

Var matmul_tn(const Var& a, const Var& b) {
  return make_op(gemm(a.value(), true, b.value(), false), {a, b},
                 [](const Var& g, const Var& out) {
                   const auto& p = out.node()->parents;
                   return std::vector<Var>{matmul_nt(p[1], g), matmul(p[0], g)};
                 },
                 "matmul_tn");
}

Var add(const Var& a, const Var& b) {
  return make_op(zip(a.value(), b.value(), [](double x, double y) { return x + y; }, "add: shape"),
                 {a, b}, [](const Var& g, const Var&) { return std::vector<Var>{g, g}; }, "add");
}

Var sub(const Var& a, const Var& b) {
  return make_op(zip(a.value(), b.value(), [](double x, double y) { return x - y; }, "sub: shape"),
                 {a, b}, [](const Var& g, const Var&) { return std::vector<Var>{g, neg(g)}; },
                 "sub");
}

Var mul(const Var& a, const Var& b) {
  return make_op(zip(a.value(), b.value(), [](double x, double y) { return x * y; }, "mul: shape"),
                 {a, b},
                 [](const Var& g, const Var& out) {
                   const auto& p = out.node()->parents;
                   return std::vector<Var>{mul(g, p[1]), mul(g, p[0])};
                 },
                 "mul");
}

Var div(const Var& a, const Var& b) {
  return make_op(zip(a.value(), b.value(), [](double x, double y) { return x / y; }, "div: shape"),
                 {a, b},
                 [](const Var& g, const Var& out) {
                   const auto& p = out.node()->parents;
                   // d(a/b)/db = -(a/b)/b
                   return std::vector<Var>{div(g, p[1]), neg(mul(g, div(out, p[1])))};
                 },
                 "div");
}

Var neg(const Var& a) {
  return make_op(map(a.value(), [](double x) { return -x; }), {a},
                 [](const Var& g, const Var&) { return std::vector<Var>{neg(g)}; }, "neg");
}

Var scale(const Var& a, double factor) {
  return make_op(map(a.value(), [factor](double x) { return x * factor; }), {a},
                 [factor](const Var& g, const Var&) { return std::vector<Var>{scale(g, factor)}; },
                 "scale");
}

Var add_scalar(const Var& a, double offset) {
  return make_op(map(a.value(), [offset](double x) { return x + offset; }), {a},
                 [](const Var& g, const Var&) { return std::vector<Var>{g}; }, "add_scalar");
}

Var scale_by(const Var& a, const Var& s) {
  require(s.rows() == 1 && s.cols() == 1, "scale_by: scale must be 1x1");
  const double factor = s.value()[0];
  return make_op(map(a.value(), [factor](double x) { return x * factor; }), {a, s},
                 [](const Var& g, const Var& out) {
                   const auto& p = out.node()->parents;
                   return std::vector<Var>{scale_by(g, p[1]), sum_all(mul(g, p[0]))};
                 },
                 "scale_by");
}

Var tanh(const Var& a) {
  return make_op(map(a.value(), [](double x) { return std::tanh(x); }), {a},
                 [](const Var& g, const Var& out) {
                   // 1 - tanh²
                   return std::vector<Var>{mul(g, add_scalar(neg(mul(out, out)), 1.0))};
                 },
                 "tanh");
}

Var leaky_relu(const Var& a, double slope) {
  Tensor mask = map(a.value(), [slope](double x) { return x > 0.0 ? 1.0 : slope; });
  Tensor value = zip(a.value(), mask, [](double x, double m) { return x * m; }, "leaky_relu");
  return make_op(std::move(value), {a},
                 [mask = std::move(mask)](const Var& g, const Var&) {
                   return std::vector<Var>{mul(g, Var::constant(mask))};
                 },
                 "leaky_relu");
}

Var relu(const Var& a) { return leaky_relu(a, 0.0); }

Var sqrt(const Var& a) {
  return make_op(map(a.value(), [](double x) { return std::sqrt(x); }), {a},
                 [](const Var& g, const Var& out) {
                   return std::vector<Var>{div(scale(g, 0.5), out)};
                 },
                 "sqrt");
}

Var sigmoid(const Var& a) {
  return make_op(map(a.value(),
                     [](double x) {
                       return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
                     }),
                 {a},
                 [](const Var& g, const Var& out) {
                   return std::vector<Var>{mul(g, mul(out, add_scalar(neg(out), 1.0)))};
                 },
                 "sigmoid");
}

Var softplus(const Var& a) {
  return make_op(map(a.value(),
                     [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }),
                 {a},
                 [](const Var& g, const Var& out) {
                   return std::vector<Var>{mul(g, sigmoid(out.node()->parents[0]))};
                 },
                 "softplus");
}

Var sum_rows(const Var& a) {
  const Tensor& v = a.value();
  Tensor out(1, v.cols());
  for (std::size_t r = 0; r < v.rows(); ++r) {
    for (std::size_t c = 0; c < v.cols(); ++c) out[c] += v(r, c);
  }
  const std::size_t m = v.rows();
  return make_op(std::move(out), {a},
                 [m](const Var& g, const Var&) { return std::vector<Var>{broadcast_rows(g, m)}; },
                 "sum_rows");
}

Var sum_cols(const Var& a) {
  const Tensor& v = a.value();
  Tensor out(v.rows(), 1);
  for (std::size_t r = 0; r < v.rows(); ++r) {
    double s = 0.0;
    for (double x : v.row(r)) s += x;
    out[r] = s;
  }
  const std::size_t n = v.cols();
  return make_op(std::move(out), {a},
                 [n](const Var& g, const Var&) { return std::vector<Var>{broadcast_cols(g, n)}; },
                 "sum_cols");
}

Var broadcast_rows(const Var& a, std::size_t m) {
  require(a.rows() == 1, "broadcast_rows: expects a 1xn tensor");
  const Tensor& v = a.value();
  Tensor out(m, v.cols());
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < v.cols(); ++c) out(r, c) = v[c];
  }
  return make_op(std::move(out), {a},
                 [](const Var& g, const Var&) { return std::vector<Var>{sum_rows(g)}; },
                 "broadcast_rows");
}

Var broadcast_cols(const Var& a, std::size_t n) {
  require(a.cols() == 1, "broadcast_cols: expects an mx1 tensor");
  const Tensor& v = a.value();
  Tensor out(v.rows(), n);
  for (std::size_t r = 0; r < v.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) out(r, c) = v[r];
  }
  return make_op(std::move(out), {a},
                 [](const Var& g, const Var&) { return std::vector<Var>{sum_cols(g)}; },
                 "broadcast_cols");
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no parts");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.rows() == m, "concat_cols: row count mismatch");
    total += p.cols();
  }
  Tensor out(m, total);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    for (std::size_t r = 0; r < m; ++r) {
      auto src = p.value().row(r);
      for (std::size_t c = 0; c < src.size(); ++c) out(r, offset + c) = src[c];
    }
    offset += p.cols();
  }
  return make_op(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                 [offsets](const Var& g, const Var& out_var) {
                   const auto& p = out_var.node()->parents;
                   std::vector<Var> grads;
                   for (std::size_t i = 0; i < p.size(); ++i) {
                     grads.push_back(slice_cols(g, offsets[i], p[i].cols()));
                   }
                   return grads;
                 },
                 "concat_cols");
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t count) {
  require(begin + count <= a.cols(), "slice_cols: out of range");
  const Tensor& v = a.value();
  Tensor out(v.rows(), count);
  for (std::size_t r = 0; r < v.rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) out(r, c) = v(r, begin + c);
  }
  const std::size_t total = v.cols();
  return make_op(std::move(out), {a},
                 [begin, total](const Var& g, const Var&) {
                   return std::vector<Var>{pad_cols(g, begin, total)};
                 },
                 "slice_cols");
}

Var pad_cols(const Var& a, std::size_t offset, std::size_t total) {
  require(offset + a.cols() <= total, "pad_cols: out of range");
  const Tensor& v = a.value();
  Tensor out(v.rows(), total);
  for (std::size_t r = 0; r < v.rows(); ++r) {
    for (std::size_t c = 0; c < v.cols(); ++c) out(r, offset + c) = v(r, c);
  }
  const std::size_t count = v.cols();
  return make_op(std::move(out), {a},
                 [offset, count](const Var& g, const Var&) {
                   return std::vector<Var>{slice_cols(g, offset, count)};
                 },
                 "pad_cols");
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no parts");
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.cols() == n, "concat_rows: column count mismatch");
    total += p.rows();
  }
  std::vector<double> values;
  values.reserve(total * n);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    values.insert(values.end(), p.value().storage().begin(), p.value().storage().end());
    offset += p.rows();
  }
  return make_op(Tensor(total, n, std::move(values)), std::vector<Var>(parts.begin(), parts.end()),
                 [offsets](const Var& g, const Var& out_var) {
                   const auto& p = out_var.node()->parents;
                   std::vector<Var> grads;
                   for (std::size_t i = 0; i < p.size(); ++i) {
                     grads.push_back(slice_rows(g, offsets[i], p[i].rows()));
                   }
                   return grads;
                 },
                 "concat_rows");
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t count) {
  require(begin + count <= a.rows(), "slice_rows: out of range");
  const Tensor& v = a.value();
  const std::size_t n = v.cols();
  std::vector<double> values(v.storage().begin() + static_cast<std::ptrdiff_t>(begin * n),
                             v.storage().begin() + static_cast<std::ptrdiff_t>((begin + count) * n));
  const std::size_t total = v.rows();
  return make_op(Tensor(count, n, std::move(values)), {a},
                 [begin, total](const Var& g, const Var&) {
                   return std::vector<Var>{pad_rows(g, begin, total)};
                 },
                 "slice_rows");
}

Var pad_rows(const Var& a, std::size_t offset, std::size_t total) {
  require(offset + a.rows() <= total, "pad_rows: out of range");
  const Tensor& v = a.value();
  Tensor out(total, v.cols());
  for (std::size_t r = 0; r < v.rows(); ++r) {
    for (std::size_t c = 0; c < v.cols(); ++c) out(offset + r, c) = v(r, c);
  }
  const std::size_t count = v.rows();
  return make_op(std::move(out), {a},
                 [offset, count](const Var& g, const Var&) {
                   return std::vector<Var>{slice_rows(g, offset, count)};
                 },
                 "pad_rows");
}

Var gather_rows(const Var& table, std::span<const std::size_t> index) {
  const Tensor& v = table.value();
  Tensor out(index.size(), v.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] < v.rows(), "gather_rows: index out of range");
    auto src = v.row(index[i]);
    auto dst = out.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  const std::size_t rows = v.rows();
  return make_op(std::move(out), {table},
                 [idx, rows](const Var& g, const Var&) {
                   return std::vector<Var>{scatter_add_rows(g, idx, rows)};
                 },
                 "gather_rows");
}

Var scatter_add_rows(const Var& a, std::span<const std::size_t> index, std::size_t rows) {
  require(index.size() == a.rows(), "scatter_add_rows: index length mismatch");
  const Tensor& v = a.value();
  Tensor out(rows, v.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] < rows, "scatter_add_rows: index out of range");
    auto src = v.row(i);
    auto dst = out.row(index[i]);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_op(std::move(out), {a},
                 [idx](const Var& g, const Var&) { return std::vector<Var>{gather_rows(g, idx)}; },
                 "scatter_add_rows");
}

// ---- composites ---------------------------------------------------------------

Var sum_all(const Var& a) { return sum_cols(sum_rows(a)); }

Var mean_all(const Var& a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(a.value().size()));
}

Var mean_rows(const Var& a) {
  require(a.rows() > 0, "mean_rows: empty set");
  return scale(sum_rows(a), 1.0 / static_cast<double>(a.rows()));
}

Var square(const Var& a) { return mul(a, a); }

Var add_row(const Var& x, const Var& bias) {
  require(bias.rows() == 1 && bias.cols() == x.cols(), "add_row: bias shape");
  return add(x, broadcast_rows(bias, x.rows()));
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  return add_row(matmul_nt(x, weight), bias);
}

Var row_norm(const Var& a) { return sqrt(sum_cols(square(a))); }

Var cosine_rows(const Var& a, const Var& b) {
  require(a.value().same_shape(b.value()), "cosine_rows: shape mismatch");
  for (std::size_t r = 0; r < a.rows(); ++r) {
    if (kernels::l2_norm(a.value().row(r)) == 0.0 || kernels::l2_norm(b.value().row(r)) == 0.0) {
      throw NumericalError("cosine of a zero vector");
    }
  }
  return div(sum_cols(mul(a, b)), mul(row_norm(a), row_norm(b)));
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const std::size_t n = x.cols();
  const std::size_t m = x.rows();
  require(n >= 2, "layer_norm: need at least 2 features");
  require(gain.rows() == 1 && gain.cols() == n, "layer_norm: gain shape");
  require(bias.rows() == 1 && bias.cols() == n, "layer_norm: bias shape");
  const double inv_n = 1.0 / static_cast<double>(n);
  Var mean = scale(sum_cols(x), inv_n);
  Var centered = sub(x, broadcast_cols(mean, n));
  Var var = scale(sum_cols(square(centered)), inv_n);
  Var stddev = sqrt(add_scalar(var, eps));
  Var normalized = div(centered, broadcast_cols(stddev, n));
  return add(mul(normalized, broadcast_rows(gain, m)), broadcast_rows(bias, m));
}

// ---- parameters ------------------------------------------------------------------

Parameter::Parameter(std::string name, Tensor init)
    : name_(std::move(name)), grad_(init.rows(), init.cols()) {
  var_ = Var::variable(std::move(init));
}

Parameter::Parameter(const Parameter& other)
    : name_(other.name_), grad_(other.grad_) {
  if (other.var_.defined()) var_ = Var::variable(other.value());
}

Parameter& Parameter::operator=(const Parameter& other) {
  if (this != &other) {
    name_ = other.name_;
    grad_ = other.grad_;
    var_ = other.var_.defined() ? Var::variable(other.value()) : Var();
  }
  return *this;
}

void backward(const Var& loss, std::span<Parameter* const> params) {
  std::vector<Var> inputs;
  inputs.reserve(params.size());
  for (auto* p : params) inputs.push_back(p->var());
  auto grads = grad(loss, inputs, false);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& acc = params[i]->grad();
    const Tensor& g = grads[i].value();
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += g[j];
  }
}

}  // namespace zskg::ad
