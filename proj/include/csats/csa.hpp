#pragma once

#include <span>
#include <string>
#include <vector>

#include "csats/nn.hpp"
#include "csats/tensor.hpp"

namespace csats {

/// How the persisted class attention absorbs each training batch's attention.
enum class AttentionUpdate {
  Latest,  // overwrite with the newest batch slice
  Ema,     // decay * stored + (1 - decay) * batch, after a first plain copy
};

std::string to_string(AttentionUpdate policy);
AttentionUpdate parse_attention_update(const std::string& text);

struct CsaConfig {
  std::size_t features = 128;           // F, width of the incoming feature tensor
  std::size_t attention_features = 64;  // F_a, width of the key/query spaces
  std::size_t classes = 2;              // C >= 2
  std::size_t time_steps = 1;           // T, fixed per dataset
  bool class_differentiation = true;    // false gives the NoCD ablation
  AttentionUpdate update = AttentionUpdate::Latest;
  double ema_decay = 0.9;
};

template <typename T>
struct CsaProjection {
  Tensor<T> key;    // [B, T, F_a]
  Tensor<T> query;  // [B, T, F_a]
  Tensor<T> value;  // [B, T, F]
};

template <typename T>
struct ClassAggregate {
  Tensor<T> per_class;  // [C, T, F_a]
  std::vector<bool> present;
};

template <typename T>
struct CsaBatchOutput {
  Tensor<T> o_csa;      // [B, C, T, F]
  Tensor<T> s;          // [C, T, T]
  Tensor<T> s_cd;       // [C, T, T]; equals s when class differentiation is off
  Tensor<T> attention;  // [C, T, T], row-stochastic
  std::vector<bool> present;
};

template <typename T>
class CsaModule;

/// Stages of the class-specific attention computation. All are differentiable.
namespace csa {

/// K = L W_K, Q = L W_Q, V = L W_V applied per (instance, time) row; no bias terms.
template <typename T>
CsaProjection<T> project(const CsaModule<T>& module, const Tensor<T>& l);

/// Mean of `features` [B, T, F_a] over the instances of each class. Absent classes get a zero
/// slice with no gradient path and present[c] = false.
template <typename T>
ClassAggregate<T> class_aggregate(const Tensor<T>& features, std::span<const int> labels,
                                  std::size_t classes);

/// S[c] = K^C[c] (Q^C[c])^T.
template <typename T>
Tensor<T> similarity(const Tensor<T>& key_per_class, const Tensor<T>& query_per_class);

/// S^C[c] = S_c + |S_c - S_not_c| with S_not_c = (sum_c' S_c' - S_c) / (C - 1).
template <typename T>
Tensor<T> class_differentiate(const Tensor<T>& s);

/// Softmax over the last axis (key time positions) of every class slice.
template <typename T>
Tensor<T> attention_normalize(const Tensor<T>& s_cd);

/// O[b, c] = L[b] + sigma * (A[c] V[b]) for l, v: [B, T, F], attention: [C, T, T].
template <typename T>
Tensor<T> apply_attention(const Tensor<T>& l, const Tensor<T>& v, const Tensor<T>& attention,
                          const Tensor<T>& sigma);

}  // namespace csa

/// Class-specific attention block.
///
/// Training consumes labels to build per-class key/query summaries and refreshes the stored
/// global attention [C, T, T] after each batch. Evaluation reads only that stored tensor and
/// the instance's own value projection, so it never needs labels.
template <typename T>
class CsaModule {
 public:
  explicit CsaModule(CsaConfig config);

  const CsaConfig& config() const { return config_; }

  const Tensor<T>& w_key() const { return w_key_; }
  const Tensor<T>& w_query() const { return w_query_; }
  const Tensor<T>& w_value() const { return w_value_; }
  const Tensor<T>& sigma() const { return sigma_; }

  /// Rebinds parameter tensors (used by init_params / checkpoint loading). Shapes are checked.
  void bind_parameters(Tensor<T> w_key, Tensor<T> w_query, Tensor<T> w_value, Tensor<T> sigma);
  NamedParams<T> parameters(const std::string& prefix) const;
  std::vector<nn::ParamSpec> param_specs(const std::string& prefix) const;

  /// Full labelled pass. Afterwards the batch attention is folded into the global attention.
  CsaBatchOutput<T> forward_train(const Tensor<T>& l, std::span<const int> labels);

  /// Label-free pass with the stored attention. Raises ContractError while any class is unseen.
  Tensor<T> forward_eval(const Tensor<T>& l) const;

  void update_global_attention(const Tensor<T>& batch_attention, const std::vector<bool>& present);

  const Tensor<T>& global_attention() const { return global_attention_; }
  const std::vector<bool>& class_seen() const { return class_seen_; }
  bool all_classes_seen() const;

  /// Restores persisted state. The attention must be [C, T, T].
  void restore_global_state(Tensor<T> attention, std::vector<bool> seen);

 private:
  void check_input(const Tensor<T>& l) const;

  CsaConfig config_;
  Tensor<T> w_key_, w_query_, w_value_, sigma_;
  Tensor<T> global_attention_;
  std::vector<bool> class_seen_;
};

extern template class CsaModule<float>;
extern template class CsaModule<double>;

}  // namespace csats
