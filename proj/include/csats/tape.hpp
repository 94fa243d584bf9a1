#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "csats/tensor.hpp"

namespace csats {

/// Reverse-mode tape.
///
/// Operations append an entry while a tape is active on the current thread (see TapeScope) and
/// at least one input requires a gradient. Entries are appended in creation order, so the list
/// is a topological order of the recorded graph and `backward` walks it in reverse.
template <typename T>
class Tape {
 public:
  using NodePtr = std::shared_ptr<TensorNode<T>>;
  /// Reads the output gradient and accumulates into the inputs that require one.
  using BackwardFn = std::function<void(std::span<const T> out_grad)>;

  struct Entry {
    std::string op;
    std::vector<NodePtr> inputs;
    NodePtr output;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::string op, std::vector<NodePtr> inputs, NodePtr output, BackwardFn fn);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Gradients accumulate into existing buffers.
  void backward(const Tensor<T>& loss);

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  void clear() { entries_.clear(); }

  /// Tape receiving records on this thread, or nullptr.
  static Tape* active() { return active_; }

 private:
  template <typename>
  friend class TapeScope;
  template <typename>
  friend class NoGradScope;

  std::vector<Entry> entries_;
  static inline thread_local Tape* active_ = nullptr;
};

/// Makes a tape active on the current thread for the scope's lifetime.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : previous_(Tape<T>::active_) { Tape<T>::active_ = &tape; }
  ~TapeScope() { Tape<T>::active_ = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

/// Suspends recording on this thread (evaluation, finite differences).
template <typename T>
class NoGradScope {
 public:
  NoGradScope() : previous_(Tape<T>::active_) { Tape<T>::active_ = nullptr; }
  ~NoGradScope() { Tape<T>::active_ = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape<T>* previous_;
};

/// Convenience wrapper for `backward` on a fresh tape owned by the caller.
template <typename T>
void backward(Tape<T>& tape, const Tensor<T>& loss) {
  tape.backward(loss);
}

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace csats
