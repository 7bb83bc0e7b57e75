#pragma once

// Dense float64 tensors with define-by-run reverse-mode differentiation.
//
// Every primitive computes its output eagerly and, when any input requires a
// gradient, links the output node to its inputs together with a backward
// closure. backward(root) collects the reachable nodes into a Tape ordered by
// creation sequence and replays the closures in reverse, so each node is
// visited exactly once after all of its consumers.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sqvae {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  std::string_view op = "leaf";
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // lazily allocated, same length as data
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // reads this->grad, accumulates into parents

  std::vector<double>& grad_buffer();
  bool is_leaf() const { return !backward; }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  /// In-place access for optimizers and initializers. Only valid on leaves.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const { return node_->data[i]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Accumulated gradient; empty span when no gradient has reached this tensor.
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad();

  /// Same values, cut from the graph (the stop-gradient operator).
  Tensor detach() const;

  std::string_view op() const { return node_->op; }
  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Ordered record of the primitive applications reachable from a root.
struct Tape {
  std::vector<detail::Node*> nodes;  // inputs precede consumers

  static Tape record(const Tensor& root);
};

/// Reverse pass from a scalar root. Every reachable leaf that requires a
/// gradient receives d(root)/d(leaf), added to whatever it already holds.
void backward(const Tensor& root);

// --- primitive catalog ------------------------------------------------------
// Binary elementwise ops broadcast numpy-style (right-aligned extents, 1s
// stretch). "rows" ops act along the last axis.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double s);
Tensor square(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
/// relu'(0) is taken as 0.
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// max(x, lo); gradient is zero where the floor is active.
Tensor clamp_min(const Tensor& x, double lo);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor broadcast_to(const Tensor& x, Shape shape);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

Tensor sum(const Tensor& x);
Tensor sum_axis(const Tensor& x, std::size_t axis, bool keepdim = false);
Tensor mean(const Tensor& x);
Tensor squared_norm(const Tensor& x);

Tensor softmax_rows(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);
Tensor l2_normalize_rows(const Tensor& x);

/// Forward value of `value`, gradient routed unchanged to `grad_target`.
Tensor straight_through(const Tensor& value, const Tensor& grad_target);

/// Elementwise f with derivative df, recorded under `name`.
Tensor map_unary(const Tensor& x, std::string_view name, const std::function<double(double)>& f,
                 const std::function<double(double)>& df);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& x) { return neg(x); }
inline Tensor operator*(const Tensor& x, double s) { return scale(x, s); }
inline Tensor operator*(double s, const Tensor& x) { return scale(x, s); }

/// Attributes for the name-based entry point.
struct PrimitiveAttrs {
  double scalar = 0.0;
  std::size_t axis = 0;
  bool keepdim = false;
  Shape shape;
  std::vector<std::size_t> indices;
};

/// Dispatch a catalog primitive by name ("add", "matmul", "row_softmax", ...).
Tensor apply_primitive(std::string_view name, std::span<const Tensor> inputs,
                       const PrimitiveAttrs& attrs = {});

/// max_i |analytic_i - central_i| / max(1, |analytic_i|) for a scalar f.
double finite_difference_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                               double h = 1e-6);

}  // namespace sqvae
