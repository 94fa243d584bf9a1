#include <cmath>
#include <sstream>
#include <unordered_set>

#include "csats/tape.hpp"
#include "csats/tensor.hpp"

namespace csats {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {
std::uint64_t next_node_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

template <typename T>
bool Tensor<T>::all_finite() const {
  for (T v : data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
void Tape<T>::record(std::string op, std::vector<NodePtr> inputs, NodePtr output, BackwardFn fn) {
  for (const auto& in : inputs) {
    // a non-leaf input must have been produced by an earlier entry
    if (!in->is_leaf && in->id >= output->id) {
      throw ContractError("tape order violated recording '" + op + "'");
    }
  }
  output->requires_grad = true;
  output->is_leaf = false;
  entries_.push_back(Entry{std::move(op), std::move(inputs), std::move(output), std::move(fn)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;  // constant: nothing reachable

  NoGradScope<T> no_record;
  loss.ensure_grad();
  loss.grad_mut()[0] += T(1);
  std::unordered_set<const TensorNode<T>*> reachable{loss.node_ptr().get()};
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    const Entry& e = *it;
    if (!reachable.contains(e.output.get()) || e.output->grad.empty()) continue;
    for (const NodePtr& in : e.inputs) reachable.insert(in.get());
    e.backward(e.output->grad);
  }
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace csats
