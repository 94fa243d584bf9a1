#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "csats/errors.hpp"

namespace csats {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {
std::uint64_t next_node_id();
}

/// Storage shared by all handles to one tensor. Also the node identity on a tape.
template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until the first accumulation
  bool requires_grad = false;
  bool is_leaf = true;  // false once produced by a recorded op
  std::uint64_t id = detail::next_node_id();
};

/// Dense row-major tensor handle.
///
/// Copies share storage (like a reference-counted array). `clone()` and `detach()` produce
/// independent storage. Values produced by ops are not modified afterwards, so handles can be
/// read from several threads.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using Node = TensorNode<T>;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0)) : node_(std::make_shared<Node>()) {
    node_->data.assign(numel(shape), fill);
    node_->shape = std::move(shape);
  }

  Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<Node>()) {
    if (numel(shape) != values.size()) {
      throw DimensionError("tensor data length " + std::to_string(values.size()) +
                           " does not match shape " + shape_string(shape));
    }
    node_->shape = std::move(shape);
    node_->data = std::move(values);
  }

  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }
  static Tensor full(Shape shape, T value) { return Tensor(std::move(shape), value); }

  bool defined() const noexcept { return static_cast<bool>(node_); }

  const Shape& shape() const { return node().shape; }
  std::size_t rank() const { return node().shape.size(); }
  std::size_t dim(std::size_t axis) const {
    if (axis >= rank()) {
      throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                           shape_string(shape()));
    }
    return node().shape[axis];
  }
  std::size_t size() const { return node().data.size(); }

  std::span<const T> data() const& { return node().data; }
  std::span<T> data() & { return node().data; }
  std::span<const T> data() const&& = delete;
  /// Mutable access through a const handle, for optimizers and in-place initialisation.
  std::span<T> mutable_data() const { return node_->data; }
  std::vector<T> to_vector() const { return node().data; }

  T item() const {
    if (size() != 1) {
      throw ContractError("item() on tensor of shape " + shape_string(shape()));
    }
    return node().data[0];
  }

  T at(std::initializer_list<std::size_t> index) const { return node().data[offset(index)]; }

  bool requires_grad() const { return node().requires_grad; }
  Tensor& set_requires_grad(bool on = true) {
    node().requires_grad = on;
    return *this;
  }
  bool is_leaf() const { return node().is_leaf; }

  bool has_grad() const { return !node().grad.empty(); }
  std::span<const T> grad() const { return node().grad; }
  std::span<T> grad_mut() const {
    ensure_grad();
    return node_->grad;
  }
  void ensure_grad() const {
    if (node_->grad.empty()) node_->grad.assign(node_->data.size(), T(0));
  }
  /// Zeroes (and allocates) the gradient buffer.
  void zero_grad() const { node_->grad.assign(node_->data.size(), T(0)); }
  /// Drops the gradient buffer entirely.
  void clear_grad() const { node_->grad.clear(); }

  /// Independent copy of the values, outside any tape.
  Tensor detach() const { return Tensor(shape(), node().data); }
  Tensor clone() const {
    Tensor out = detach();
    out.node_->requires_grad = node().requires_grad;
    return out;
  }

  bool all_finite() const;

  const std::shared_ptr<Node>& node_ptr() const { return node_; }
  static Tensor from_node(std::shared_ptr<Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  Node& node() const {
    if (!node_) throw ContractError("use of an undefined tensor");
    return *node_;
  }

  std::size_t offset(std::initializer_list<std::size_t> index) const {
    const Shape& s = shape();
    if (index.size() != s.size()) {
      throw DimensionError("index rank " + std::to_string(index.size()) + " for shape " +
                           shape_string(s));
    }
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
      if (i >= s[axis]) throw DimensionError("index out of range for shape " + shape_string(s));
      off = off * s[axis] + i;
      ++axis;
    }
    return off;
  }

  std::shared_ptr<Node> node_;
};

/// Converts element type, e.g. a float dataset batch to a double tensor for gradient checks.
template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
  std::vector<To> out(src.size());
  auto in = src.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<To>(in[i]);
  return Tensor<To>(src.shape(), std::move(out));
}

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace csats
