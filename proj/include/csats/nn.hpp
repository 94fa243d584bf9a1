#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "csats/tensor.hpp"

namespace csats {

template <typename T>
using NamedParams = std::vector<std::pair<std::string, Tensor<T>>>;

}  // namespace csats

namespace csats::nn {

// ---------------------------------------------------------------------------------------------
// Functional layers

/// Per-channel batch statistics of a [N, C, T] input (biased variance).
template <typename T>
struct BatchStats {
  std::vector<T> mean;
  std::vector<T> var;
};

/// Batch normalisation over (N, T) per channel using the batch's own statistics.
/// Raises DomainError when N*T < 2.
template <typename T>
Tensor<T> batch_norm_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                           T eps, BatchStats<T>* stats = nullptr);

/// Batch normalisation with fixed running statistics; differentiable in x, gamma, beta.
template <typename T>
Tensor<T> batch_norm_eval(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          const Tensor<T>& running_mean, const Tensor<T>& running_var, T eps);

/// Mean over instances of -log softmax(logits)[label], computed with log-sum-exp.
template <typename T>
Tensor<T> cross_entropy_loss(const Tensor<T>& logits, std::span<const int> labels);

// ---------------------------------------------------------------------------------------------
// Conv block: conv1d_same -> batch norm -> ReLU

template <typename T>
struct ConvBlock {
  Tensor<T> kernel;  // [C_out, C_in, k]
  Tensor<T> bias;    // [C_out]
  Tensor<T> bn_gamma, bn_beta;
  Tensor<T> bn_running_mean, bn_running_var;
  T bn_momentum = T(0.9);
  T bn_eps = T(1e-5);

  /// Zero kernel, gamma = 1, running var = 1. Use init_params for trained models.
  static ConvBlock make(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size);

  std::size_t in_channels() const { return kernel.dim(1); }
  std::size_t out_channels() const { return kernel.dim(0); }
  std::size_t kernel_size() const { return kernel.dim(2); }

  NamedParams<T> parameters(const std::string& prefix) const;
  NamedParams<T> buffers(const std::string& prefix) const;
};

/// Training mode normalises with batch statistics and folds them into the running averages
/// (running = momentum * running + (1 - momentum) * batch, unbiased variance). Eval mode reads
/// the running statistics only.
template <typename T>
Tensor<T> conv_block_forward(ConvBlock<T>& block, const Tensor<T>& x, bool training);

// ---------------------------------------------------------------------------------------------
// Initialisation

enum class InitScheme { HeUniform, GlorotUniform, Zeros, Ones };

struct ParamSpec {
  std::string name;
  Shape shape;
  InitScheme scheme = InitScheme::Zeros;
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
};

/// Materialises every spec in order from one seeded generator. Same specs and seed give
/// bitwise-identical tensors. All returned tensors require grad.
template <typename T>
NamedParams<T> init_params(std::span<const ParamSpec> description, std::uint64_t seed);

// ---------------------------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, AdamConfig config = {});

  /// One bias-corrected update from the current gradients. Gradients are left untouched.
  /// Raises ContractError if a parameter has no gradient buffer.
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }
  std::span<const T> first_moment(std::size_t i) const { return m_[i]; }
  std::span<const T> second_moment(std::size_t i) const { return v_[i]; }

 private:
  std::vector<Tensor<T>> params_;
  AdamConfig config_;
  std::vector<std::vector<T>> m_, v_;
  std::uint64_t step_ = 0;
};

}  // namespace csats::nn
