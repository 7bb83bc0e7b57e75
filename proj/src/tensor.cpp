#include "sqvae/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "sqvae/error.hpp"

namespace sqvae {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace detail {

std::vector<double>& Node::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

}  // namespace detail

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

thread_local std::uint64_t g_next_seq = 1;

NodePtr new_node(Shape shape, std::vector<double> data) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->seq = g_next_seq++;
  return n;
}

void check_finite(std::string_view op, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError("non-finite output in primitive '" + std::string(op) + "'");
    }
  }
}

// Wraps a freshly computed output. The backward closure is attached only when
// some input participates in differentiation.
Tensor make_result(std::string_view op, Shape shape, std::vector<double> data,
                   std::initializer_list<Tensor> inputs, std::function<void(Node&)> bw) {
  check_finite(op, data);
  NodePtr n = new_node(std::move(shape), std::move(data));
  n->op = op;
  bool any = false;
  for (const Tensor& t : inputs) any = any || t.requires_grad();
  if (any) {
    n->requires_grad = true;
    for (const Tensor& t : inputs) n->parents.push_back(t.node_ptr());
    n->backward = std::move(bw);
  }
  return Tensor(std::move(n));
}

// Accumulation target for parent i, or nullptr when it needs no gradient.
std::vector<double>* parent_grad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

void require_defined(const Tensor& t, std::string_view op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

// --- broadcasting -----------------------------------------------------------

Shape broadcast_shape(const Shape& a, const Shape& b, std::string_view op) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t ea = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t eb = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (ea != eb && ea != 1 && eb != 1) {
      throw ContractError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " +
                          shape_str(b));
    }
    out[i] = ea == 1 ? eb : ea;
  }
  return out;
}

// Flat source offset for every output element of a broadcast.
std::vector<std::size_t> broadcast_index(const Shape& src, const Shape& out) {
  const std::size_t n = shape_numel(out);
  std::vector<std::size_t> idx(n);
  if (src == out) {
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
  }
  if (shape_numel(src) == 1) return std::vector<std::size_t>(n, 0);
  const std::size_t r = out.size();
  const std::size_t off = r - src.size();
  std::vector<std::size_t> stride(r, 0);
  std::size_t s = 1;
  for (std::size_t i = src.size(); i-- > 0;) {
    stride[i + off] = src[i] == 1 ? 0 : s;
    s *= src[i];
  }
  std::vector<std::size_t> counter(r, 0);
  std::size_t cur = 0;
  for (std::size_t i = 0; i < n; ++i) {
    idx[i] = cur;
    for (std::size_t ax = r; ax-- > 0;) {
      ++counter[ax];
      cur += stride[ax];
      if (counter[ax] < out[ax]) break;
      cur -= stride[ax] * counter[ax];
      counter[ax] = 0;
    }
  }
  return idx;
}

template <class Fwd, class DA, class DB>
Tensor binary(std::string_view op, const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
  require_defined(a, op);
  require_defined(b, op);
  Shape out = broadcast_shape(a.shape(), b.shape(), op);
  const std::size_t n = shape_numel(out);
  auto ia = std::make_shared<std::vector<std::size_t>>(broadcast_index(a.shape(), out));
  auto ib = std::make_shared<std::vector<std::size_t>>(broadcast_index(b.shape(), out));
  std::vector<double> y(n);
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < n; ++i) y[i] = fwd(av[(*ia)[i]], bv[(*ib)[i]]);
  return make_result(op, out, std::move(y), {a, b}, [ia, ib, da, db](Node& self) {
    const auto& A = self.parents[0]->data;
    const auto& B = self.parents[1]->data;
    const auto& g = self.grad;
    if (auto* ga = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*ga)[(*ia)[i]] += g[i] * da(A[(*ia)[i]], B[(*ib)[i]]);
      }
    }
    if (auto* gb = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*gb)[(*ib)[i]] += g[i] * db(A[(*ia)[i]], B[(*ib)[i]]);
      }
    }
  });
}

// Elementwise op whose derivative is expressed through input x and output y.
template <class Fwd, class Deriv>
Tensor unary(std::string_view op, const Tensor& x, Fwd fwd, Deriv deriv) {
  require_defined(x, op);
  const auto xv = x.data();
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = fwd(xv[i]);
  return make_result(op, x.shape(), std::move(y), {x}, [deriv](Node& self) {
    auto* gx = parent_grad(self, 0);
    if (!gx) return;
    const auto& X = self.parents[0]->data;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      (*gx)[i] += self.grad[i] * deriv(X[i], self.data[i]);
    }
  });
}

// --- dense kernels ------------------------------------------------------------

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* __restrict a,
             const double* __restrict b, double* __restrict c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* __restrict ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ai[p];
      if (s == 0.0) continue;
      const double* __restrict bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += s * bp[j];
    }
  }
}

// C[k,n] += A[m,k]^T * G[m,n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* __restrict a,
             const double* __restrict g, double* __restrict c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* __restrict gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ai[p];
      if (s == 0.0) continue;
      double* __restrict cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += s * gi[j];
    }
  }
}

std::vector<double> transposed(const std::vector<double>& x, std::size_t rows, std::size_t cols) {
  std::vector<double> t(x.size());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = x[i * cols + j];
  }
  return t;
}

// Splits a shape around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i < axis) r.outer *= s[i];
    else if (i == axis) r.extent = s[i];
    else r.inner *= s[i];
  }
  return r;
}

std::size_t last_extent(const Tensor& x, std::string_view op) {
  if (x.rank() == 0 || x.shape().back() == 0) {
    throw ContractError(std::string(op) + ": needs a non-empty last axis, got " +
                        shape_str(x.shape()));
  }
  return x.shape().back();
}

}  // namespace

// --- Tensor -------------------------------------------------------------------

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw ContractError("tensor data length " + std::to_string(data.size()) +
                        " does not match shape " + shape_str(shape));
  }
  check_finite("leaf", data);
  auto n = new_node(std::move(shape), std::move(data));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

std::size_t Tensor::size(std::size_t axis) const {
  if (axis >= rank()) throw ContractError("axis out of range for shape " + shape_str(shape()));
  return shape()[axis];
}

std::span<double> Tensor::mutable_data() {
  if (!node_->is_leaf()) throw ContractError("mutable_data on a non-leaf tensor");
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return node_->data[row * shape().back() + col];
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const {
  auto n = new_node(node_->shape, node_->data);
  n->op = "detach";
  return Tensor(std::move(n));
}

// --- tape / backward -------------------------------------------------------------

Tape Tape::record(const Tensor& root) {
  Tape tape;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.node()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || !seen.insert(n).second) continue;
    tape.nodes.push_back(n);
    for (const auto& p : n->parents) stack.push_back(p.get());
  }
  // Creation order is a valid topological order: an input always exists
  // before the primitive that consumes it.
  std::sort(tape.nodes.begin(), tape.nodes.end(),
            [](const Node* a, const Node* b) { return a->seq < b->seq; });
  return tape;
}

void backward(const Tensor& root) {
  require_defined(root, "backward");
  if (root.numel() != 1) {
    throw ContractError("backward needs a scalar root, got shape " + shape_str(root.shape()));
  }
  if (!root.requires_grad()) return;
  Tape tape = Tape::record(root);
  for (Node* n : tape.nodes) {
    if (!n->is_leaf()) n->grad.assign(n->data.size(), 0.0);
  }
  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = tape.nodes.rbegin(); it != tape.nodes.rend(); ++it) {
    Node* n = *it;
    if (!n->is_leaf()) n->backward(*n);
  }
}

// --- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Tensor neg(const Tensor& x) {
  return unary("neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& x, double s) {
  return unary("scale", x, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& x, double s) {
  return unary("add_scalar", x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Tensor square(const Tensor& x) {
  return unary("square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) throw NumericError("non-finite output in primitive 'log' (input <= 0)");
  }
  return unary("log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor clamp_min(const Tensor& x, double lo) {
  return unary(
      "clamp_min", x, [lo](double v) { return v < lo ? lo : v; },
      [lo](double v, double) { return v < lo ? 0.0 : 1.0; });
}

Tensor map_unary(const Tensor& x, std::string_view name, const std::function<double(double)>& f,
                 const std::function<double(double)>& df) {
  return unary(name, x, f, [df](double v, double) { return df(v); });
}

// --- linear algebra / layout -----------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.size(1) != b.size(0)) {
    throw ContractError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                        shape_str(b.shape()));
  }
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(1);
  std::vector<double> y(m * n, 0.0);
  gemm_nn(m, k, n, a.data().data(), b.data().data(), y.data());
  return make_result("matmul", {m, n}, std::move(y), {a, b}, [m, k, n](Node& self) {
    const auto& A = self.parents[0]->data;
    const auto& B = self.parents[1]->data;
    if (auto* ga = parent_grad(self, 0)) {
      // dA = G * B^T
      const std::vector<double> bt = transposed(B, k, n);
      gemm_nn(m, n, k, self.grad.data(), bt.data(), ga->data());
    }
    if (auto* gb = parent_grad(self, 1)) {
      // dB = A^T * G
      gemm_tn(m, k, n, A.data(), self.grad.data(), gb->data());
    }
  });
}

Tensor transpose(const Tensor& x) {
  require_defined(x, "transpose");
  if (x.rank() != 2) throw ContractError("transpose: rank-2 input required, got " + shape_str(x.shape()));
  const std::size_t r = x.size(0), c = x.size(1);
  std::vector<double> src(x.data().begin(), x.data().end());
  return make_result("transpose", {c, r}, transposed(src, r, c), {x}, [r, c](Node& self) {
    if (auto* gx = parent_grad(self, 0)) {
      const std::vector<double> g = transposed(self.grad, c, r);
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  if (shape_numel(shape) != x.numel()) {
    throw ContractError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> y(x.data().begin(), x.data().end());
  return make_result("reshape", std::move(shape), std::move(y), {x}, [](Node& self) {
    if (auto* gx = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i];
    }
  });
}

Tensor broadcast_to(const Tensor& x, Shape shape) {
  require_defined(x, "broadcast");
  if (broadcast_shape(x.shape(), shape, "broadcast") != shape) {
    throw ContractError("broadcast: " + shape_str(x.shape()) + " does not expand to " +
                        shape_str(shape));
  }
  auto idx = std::make_shared<std::vector<std::size_t>>(broadcast_index(x.shape(), shape));
  std::vector<double> y(idx->size());
  const auto xv = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[(*idx)[i]];
  return make_result("broadcast", std::move(shape), std::move(y), {x}, [idx](Node& self) {
    if (auto* gx = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[(*idx)[i]] += self.grad[i];
    }
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concatenate: no inputs");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) throw ContractError("concatenate: axis out of range");
  Shape out = s0;
  out[axis] = 0;
  for (const Tensor& p : parts) {
    require_defined(p, "concatenate");
    if (p.rank() != s0.size()) throw ContractError("concatenate: rank mismatch");
    for (std::size_t i = 0; i < s0.size(); ++i) {
      if (i != axis && p.shape()[i] != s0[i]) {
        throw ContractError("concatenate: extent mismatch " + shape_str(p.shape()) + " vs " +
                            shape_str(s0));
      }
    }
    out[axis] += p.shape()[axis];
  }
  const AxisSplit so = split_axis(out, axis);
  std::vector<double> y(shape_numel(out));
  auto widths = std::make_shared<std::vector<std::size_t>>();
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.shape()[axis] * so.inner;
    const auto pv = p.data();
    for (std::size_t o = 0; o < so.outer; ++o) {
      std::copy_n(pv.begin() + o * w, w, y.begin() + o * so.extent * so.inner + offset);
    }
    widths->push_back(w);
    offset += w;
  }
  // make_result takes an initializer_list; build the node by hand for N inputs.
  check_finite("concatenate", y);
  NodePtr node = new_node(std::move(out), std::move(y));
  node->op = "concatenate";
  bool any = false;
  for (const Tensor& p : parts) any = any || p.requires_grad();
  if (any) {
    node->requires_grad = true;
    for (const Tensor& p : parts) node->parents.push_back(p.node_ptr());
    const std::size_t row = so.extent * so.inner, outer = so.outer;
    node->backward = [widths, row, outer](Node& self) {
      std::size_t off = 0;
      for (std::size_t k = 0; k < self.parents.size(); ++k) {
        const std::size_t w = (*widths)[k];
        if (auto* g = parent_grad(self, k)) {
          for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t j = 0; j < w; ++j) (*g)[o * w + j] += self.grad[o * row + off + j];
          }
        }
        off += w;
      }
    };
  }
  return Tensor(std::move(node));
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_defined(x, "row_gather");
  if (x.rank() != 2) throw ContractError("row_gather: rank-2 input required");
  const std::size_t r = x.size(0), c = x.size(1);
  auto idx = std::make_shared<std::vector<std::size_t>>(rows.begin(), rows.end());
  std::vector<double> y(idx->size() * c);
  const auto xv = x.data();
  for (std::size_t i = 0; i < idx->size(); ++i) {
    if ((*idx)[i] >= r) {
      throw ContractError("row_gather: index " + std::to_string((*idx)[i]) + " out of range " +
                          std::to_string(r));
    }
    std::copy_n(xv.begin() + (*idx)[i] * c, c, y.begin() + i * c);
  }
  return make_result("row_gather", {idx->size(), c}, std::move(y), {x}, [idx, c](Node& self) {
    if (auto* gx = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < idx->size(); ++i) {
        for (std::size_t j = 0; j < c; ++j) (*gx)[(*idx)[i] * c + j] += self.grad[i * c + j];
      }
    }
  });
}

// --- reductions -----------------------------------------------------------------

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result("sum", {1}, {s}, {x}, [](Node& self) {
    if (auto* gx = parent_grad(self, 0)) {
      for (double& g : *gx) g += self.grad[0];
    }
  });
}

Tensor sum_axis(const Tensor& x, std::size_t axis, bool keepdim) {
  require_defined(x, "sum_axis");
  if (axis >= x.rank()) throw ContractError("sum_axis: axis out of range for " + shape_str(x.shape()));
  const AxisSplit sp = split_axis(x.shape(), axis);
  Shape out = x.shape();
  if (keepdim) out[axis] = 1;
  else out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out.empty()) out = {1};
  std::vector<double> y(sp.outer * sp.inner, 0.0);
  const auto xv = x.data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t e = 0; e < sp.extent; ++e) {
      const double* src = xv.data() + (o * sp.extent + e) * sp.inner;
      double* dst = y.data() + o * sp.inner;
      for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
    }
  }
  return make_result("sum_axis", std::move(out), std::move(y), {x}, [sp](Node& self) {
    if (auto* gx = parent_grad(self, 0)) {
      for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t e = 0; e < sp.extent; ++e) {
          for (std::size_t i = 0; i < sp.inner; ++i) {
            (*gx)[(o * sp.extent + e) * sp.inner + i] += self.grad[o * sp.inner + i];
          }
        }
      }
    }
  });
}

Tensor mean(const Tensor& x) {
  require_defined(x, "mean");
  if (x.numel() == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor squared_norm(const Tensor& x) {
  require_defined(x, "squared_norm");
  double s = 0.0;
  for (double v : x.data()) s += v * v;
  return make_result("squared_norm", {1}, {s}, {x}, [](Node& self) {
    if (auto* gx = parent_grad(self, 0)) {
      const auto& X = self.parents[0]->data;
      for (std::size_t i = 0; i < X.size(); ++i) (*gx)[i] += 2.0 * X[i] * self.grad[0];
    }
  });
}

// --- row-wise -------------------------------------------------------------------

Tensor softmax_rows(const Tensor& x) {
  require_defined(x, "row_softmax");
  const std::size_t c = last_extent(x, "row_softmax");
  const std::size_t rows = x.numel() / c;
  const auto xv = x.data();
  std::vector<double> y(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * c;
    double* out = y.data() + r * c;
    const double mx = *std::max_element(in, in + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out[j] = std::exp(in[j] - mx);
      z += out[j];
    }
    for (std::size_t j = 0; j < c; ++j) out[j] /= z;
  }
  return make_result("row_softmax", x.shape(), std::move(y), {x}, [rows, c](Node& self) {
    if (auto* gx = parent_grad(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* p = self.data.data() + r * c;
        const double* g = self.grad.data() + r * c;
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += p[j] * g[j];
        for (std::size_t j = 0; j < c; ++j) (*gx)[r * c + j] += p[j] * (g[j] - dot);
      }
    }
  });
}

Tensor log_softmax_rows(const Tensor& x) {
  require_defined(x, "row_log_softmax");
  const std::size_t c = last_extent(x, "row_log_softmax");
  const std::size_t rows = x.numel() / c;
  const auto xv = x.data();
  std::vector<double> y(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * c;
    double* out = y.data() + r * c;
    const double mx = *std::max_element(in, in + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(in[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) out[j] = in[j] - lse;
  }
  return make_result("row_log_softmax", x.shape(), std::move(y), {x}, [rows, c](Node& self) {
    if (auto* gx = parent_grad(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* lp = self.data.data() + r * c;
        const double* g = self.grad.data() + r * c;
        double gs = 0.0;
        for (std::size_t j = 0; j < c; ++j) gs += g[j];
        for (std::size_t j = 0; j < c; ++j) (*gx)[r * c + j] += g[j] - std::exp(lp[j]) * gs;
      }
    }
  });
}

Tensor l2_normalize_rows(const Tensor& x) {
  require_defined(x, "row_l2_normalize");
  const std::size_t c = last_extent(x, "row_l2_normalize");
  const std::size_t rows = x.numel() / c;
  const auto xv = x.data();
  std::vector<double> y(x.numel());
  auto norms = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += xv[r * c + j] * xv[r * c + j];
    const double nrm = std::sqrt(s);
    if (!(nrm > 0.0)) throw NumericError("non-finite output in primitive 'row_l2_normalize' (zero row)");
    (*norms)[r] = nrm;
    for (std::size_t j = 0; j < c; ++j) y[r * c + j] = xv[r * c + j] / nrm;
  }
  return make_result("row_l2_normalize", x.shape(), std::move(y), {x}, [rows, c, norms](Node& self) {
    if (auto* gx = parent_grad(self, 0)) {
      // d(x/|x|) = (g - y (y.g)) / |x|
      for (std::size_t r = 0; r < rows; ++r) {
        const double* yv = self.data.data() + r * c;
        const double* g = self.grad.data() + r * c;
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += yv[j] * g[j];
        for (std::size_t j = 0; j < c; ++j) (*gx)[r * c + j] += (g[j] - yv[j] * dot) / (*norms)[r];
      }
    }
  });
}

Tensor straight_through(const Tensor& value, const Tensor& grad_target) {
  require_defined(value, "straight_through");
  require_defined(grad_target, "straight_through");
  if (value.shape() != grad_target.shape()) {
    throw ContractError("straight_through: shape mismatch " + shape_str(value.shape()) + " vs " +
                        shape_str(grad_target.shape()));
  }
  std::vector<double> y(value.data().begin(), value.data().end());
  // Only the target is a parent: the forward value is treated as a constant.
  return make_result("straight_through", value.shape(), std::move(y), {grad_target}, [](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

// --- name-based dispatch ---------------------------------------------------------

Tensor apply_primitive(std::string_view name, std::span<const Tensor> in, const PrimitiveAttrs& attrs) {
  auto need = [&](std::size_t n) {
    if (in.size() != n) {
      throw ContractError("primitive '" + std::string(name) + "' expects " + std::to_string(n) +
                          " inputs, got " + std::to_string(in.size()));
    }
  };
  if (name == "add") { need(2); return add(in[0], in[1]); }
  if (name == "subtract" || name == "sub") { need(2); return sub(in[0], in[1]); }
  if (name == "multiply" || name == "mul") { need(2); return mul(in[0], in[1]); }
  if (name == "divide" || name == "div") { need(2); return div(in[0], in[1]); }
  if (name == "scalar_scale" || name == "scale") { need(1); return scale(in[0], attrs.scalar); }
  if (name == "add_scalar") { need(1); return add_scalar(in[0], attrs.scalar); }
  if (name == "neg") { need(1); return neg(in[0]); }
  if (name == "square") { need(1); return square(in[0]); }
  if (name == "matmul") { need(2); return matmul(in[0], in[1]); }
  if (name == "transpose") { need(1); return transpose(in[0]); }
  if (name == "row_softmax") { need(1); return softmax_rows(in[0]); }
  if (name == "row_log_softmax") { need(1); return log_softmax_rows(in[0]); }
  if (name == "log") { need(1); return log(in[0]); }
  if (name == "exp") { need(1); return exp(in[0]); }
  if (name == "sum") { need(1); return sum(in[0]); }
  if (name == "sum_axis") { need(1); return sum_axis(in[0], attrs.axis, attrs.keepdim); }
  if (name == "mean") { need(1); return mean(in[0]); }
  if (name == "squared_norm") { need(1); return squared_norm(in[0]); }
  if (name == "row_l2_normalize") { need(1); return l2_normalize_rows(in[0]); }
  if (name == "relu") { need(1); return relu(in[0]); }
  if (name == "sigmoid") { need(1); return sigmoid(in[0]); }
  if (name == "clamp_min") { need(1); return clamp_min(in[0], attrs.scalar); }
  if (name == "row_gather") { need(1); return gather_rows(in[0], attrs.indices); }
  if (name == "concatenate") { return concat(in, attrs.axis); }
  if (name == "broadcast") { need(1); return broadcast_to(in[0], attrs.shape); }
  if (name == "reshape") { need(1); return reshape(in[0], attrs.shape); }
  if (name == "straight_through") { need(2); return straight_through(in[0], in[1]); }
  throw ContractError("unknown primitive '" + std::string(name) + "'");
}

// --- gradient checking -------------------------------------------------------------

double finite_difference_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  std::vector<double> base(x.data().begin(), x.data().end());
  Tensor leaf = Tensor::from_data(x.shape(), base, true);
  Tensor y = f(leaf);
  if (y.numel() != 1) throw ContractError("finite_difference_check: f must be scalar");
  backward(y);
  std::vector<double> analytic(base.size(), 0.0);
  if (leaf.has_grad()) std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());

  auto eval = [&](std::vector<double> probe) {
    const double v = f(Tensor::from_data(x.shape(), std::move(probe))).item();
    if (!std::isfinite(v)) throw NumericError("finite_difference_check: non-finite probe value");
    return v;
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<double> plus = base, minus = base;
    plus[i] += h;
    minus[i] -= h;
    const double central = (eval(std::move(plus)) - eval(std::move(minus))) / (2.0 * h);
    const double err = std::abs(analytic[i] - central) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace sqvae
