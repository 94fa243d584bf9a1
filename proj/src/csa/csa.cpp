#include "csats/csa.hpp"

#include "csats/ops.hpp"

namespace csats {

std::string to_string(AttentionUpdate policy) {
  return policy == AttentionUpdate::Latest ? "latest" : "ema";
}

AttentionUpdate parse_attention_update(const std::string& text) {
  if (text == "latest") return AttentionUpdate::Latest;
  if (text == "ema") return AttentionUpdate::Ema;
  throw ConfigError("unknown attention update policy '" + text + "' (expected latest|ema)");
}

namespace {

template <typename T>
void expect_shape(const Tensor<T>& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw DimensionError(std::string(what) + " has shape " + shape_string(t.shape()) +
                         ", expected " + shape_string(expected));
  }
}

void check_labels(std::span<const int> labels, std::size_t batch, std::size_t classes) {
  if (labels.size() != batch) {
    throw DimensionError(std::to_string(labels.size()) + " labels for a batch of " +
                         std::to_string(batch));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw LabelError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

}  // namespace

namespace csa {

template <typename T>
CsaProjection<T> project(const CsaModule<T>& module, const Tensor<T>& l) {
  const std::size_t f = module.config().features;
  if (l.rank() != 3 || l.dim(2) != f) {
    throw DimensionError("csa project: expected [B, T, " + std::to_string(f) + "], got " +
                         shape_string(l.shape()));
  }
  return {ops::matmul(l, module.w_key()), ops::matmul(l, module.w_query()),
          ops::matmul(l, module.w_value())};
}

template <typename T>
ClassAggregate<T> class_aggregate(const Tensor<T>& features, std::span<const int> labels,
                                  std::size_t classes) {
  if (features.rank() != 3) {
    throw DimensionError("class_aggregate: expected [B, T, F_a], got " +
                         shape_string(features.shape()));
  }
  const std::size_t b = features.dim(0), t = features.dim(1), fa = features.dim(2);
  check_labels(labels, b, classes);

  std::vector<std::size_t> counts(classes, 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  // averaging operator: row c holds 1/|c| at the instances labelled c
  Tensor<T> averaging(Shape{classes, b});
  auto w = averaging.data();
  for (std::size_t i = 0; i < b; ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    w[c * b + i] = T(1) / static_cast<T>(counts[c]);
  }
  Tensor<T> flat = ops::reshape(features, {b, t * fa});
  Tensor<T> per_class = ops::reshape(ops::matmul(averaging, flat), {classes, t, fa});

  ClassAggregate<T> out{std::move(per_class), std::vector<bool>(classes)};
  for (std::size_t c = 0; c < classes; ++c) out.present[c] = counts[c] > 0;
  return out;
}

template <typename T>
Tensor<T> similarity(const Tensor<T>& key_per_class, const Tensor<T>& query_per_class) {
  if (key_per_class.rank() != 3 || key_per_class.shape() != query_per_class.shape()) {
    throw DimensionError("similarity: key " + shape_string(key_per_class.shape()) +
                         " and query " + shape_string(query_per_class.shape()) +
                         " must both be [C, T, F_a]");
  }
  return ops::matmul(key_per_class, ops::transpose_last2(query_per_class));
}

template <typename T>
Tensor<T> class_differentiate(const Tensor<T>& s) {
  if (s.rank() != 3) {
    throw DimensionError("class_differentiate: expected [C, T, T], got " + shape_string(s.shape()));
  }
  const std::size_t c = s.dim(0);
  if (c < 2) throw ConfigError("class_differentiate needs at least 2 classes");
  // S_c - S_not_c == sum_{c'} (S_c - S_c') / (C - 1); the pairwise form is exactly zero when all
  // class slices agree.
  Tensor<T> own = ops::repeat_axis(s, 1, c);    // [c, c', ...] = S_c
  Tensor<T> other = ops::repeat_axis(s, 0, c);  // [c, c', ...] = S_c'
  Tensor<T> gap = ops::reduce_sum_axis(ops::sub(own, other), 1);
  return ops::add(s, ops::scale(ops::abs(gap), T(1) / static_cast<T>(c - 1)));
}

template <typename T>
Tensor<T> attention_normalize(const Tensor<T>& s_cd) {
  if (s_cd.rank() != 3) {
    throw DimensionError("attention_normalize: expected [C, T, T], got " +
                         shape_string(s_cd.shape()));
  }
  return ops::softmax_axis(s_cd, 2);
}

template <typename T>
Tensor<T> apply_attention(const Tensor<T>& l, const Tensor<T>& v, const Tensor<T>& attention,
                          const Tensor<T>& sigma) {
  if (l.rank() != 3 || v.shape() != l.shape()) {
    throw DimensionError("apply_attention: L " + shape_string(l.shape()) + " and V " +
                         shape_string(v.shape()) + " must both be [B, T, F]");
  }
  const std::size_t b = l.dim(0), t = l.dim(1), f = l.dim(2);
  if (attention.rank() != 3 || attention.dim(1) != t || attention.dim(2) != t) {
    throw DimensionError("apply_attention: attention " + shape_string(attention.shape()) +
                         " is not [C, " + std::to_string(t) + ", " + std::to_string(t) + "]");
  }
  const std::size_t c = attention.dim(0);
  Tensor<T> weighted = ops::matmul(ops::reshape(attention, {1, c, t, t}),
                                   ops::reshape(v, {b, 1, t, f}));  // [B, C, T, F]
  return ops::add(ops::repeat_axis(l, 1, c), ops::mul_scalar(weighted, sigma));
}

}  // namespace csa

template <typename T>
CsaModule<T>::CsaModule(CsaConfig config) : config_(config) {
  if (config_.classes < 2) {
    throw ConfigError("class-specific attention needs C >= 2 (got " +
                      std::to_string(config_.classes) + ")");
  }
  if (config_.features == 0 || config_.attention_features == 0 || config_.time_steps == 0) {
    throw ConfigError("class-specific attention needs F, F_a, T >= 1");
  }
  if (!(config_.ema_decay >= 0.0 && config_.ema_decay < 1.0)) {
    throw ConfigError("ema decay must lie in [0, 1)");
  }
  const std::size_t f = config_.features, fa = config_.attention_features;
  w_key_ = Tensor<T>::zeros({f, fa}).set_requires_grad(true);
  w_query_ = Tensor<T>::zeros({f, fa}).set_requires_grad(true);
  w_value_ = Tensor<T>::zeros({f, f}).set_requires_grad(true);
  sigma_ = Tensor<T>::zeros({1}).set_requires_grad(true);
  const std::size_t t = config_.time_steps;
  global_attention_ = Tensor<T>::full({config_.classes, t, t}, T(1) / static_cast<T>(t));
  class_seen_.assign(config_.classes, false);
}

template <typename T>
void CsaModule<T>::bind_parameters(Tensor<T> w_key, Tensor<T> w_query, Tensor<T> w_value,
                                   Tensor<T> sigma) {
  expect_shape(w_key, w_key_.shape(), "W_K");
  expect_shape(w_query, w_query_.shape(), "W_Q");
  expect_shape(w_value, w_value_.shape(), "W_V");
  expect_shape(sigma, sigma_.shape(), "sigma");
  w_key_ = std::move(w_key);
  w_query_ = std::move(w_query);
  w_value_ = std::move(w_value);
  sigma_ = std::move(sigma);
}

template <typename T>
NamedParams<T> CsaModule<T>::parameters(const std::string& prefix) const {
  return {{prefix + ".w_key", w_key_},
          {prefix + ".w_query", w_query_},
          {prefix + ".w_value", w_value_},
          {prefix + ".sigma", sigma_}};
}

template <typename T>
std::vector<nn::ParamSpec> CsaModule<T>::param_specs(const std::string& prefix) const {
  using nn::InitScheme;
  const std::size_t f = config_.features, fa = config_.attention_features;
  return {{prefix + ".w_key", {f, fa}, InitScheme::GlorotUniform, f, fa},
          {prefix + ".w_query", {f, fa}, InitScheme::GlorotUniform, f, fa},
          {prefix + ".w_value", {f, f}, InitScheme::GlorotUniform, f, f},
          {prefix + ".sigma", {1}, InitScheme::Zeros, 0, 0}};
}

template <typename T>
void CsaModule<T>::check_input(const Tensor<T>& l) const {
  if (l.rank() != 3 || l.dim(0) == 0 || l.dim(1) != config_.time_steps ||
      l.dim(2) != config_.features) {
    throw DimensionError("csa input " + shape_string(l.shape()) + " is not [B>=1, " +
                         std::to_string(config_.time_steps) + ", " +
                         std::to_string(config_.features) + "]");
  }
}

template <typename T>
CsaBatchOutput<T> CsaModule<T>::forward_train(const Tensor<T>& l, std::span<const int> labels) {
  check_input(l);
  const std::size_t b = l.dim(0), t = config_.time_steps, f = config_.features;
  const std::size_t fa = config_.attention_features, c = config_.classes;
  check_labels(labels, b, c);

  CsaProjection<T> proj = csa::project(*this, l);
  expect_shape(proj.key, {b, t, fa}, "K");
  expect_shape(proj.query, {b, t, fa}, "Q");
  expect_shape(proj.value, {b, t, f}, "V");

  ClassAggregate<T> keys = csa::class_aggregate(proj.key, labels, c);
  ClassAggregate<T> queries = csa::class_aggregate(proj.query, labels, c);
  expect_shape(keys.per_class, {c, t, fa}, "K^C");
  expect_shape(queries.per_class, {c, t, fa}, "Q^C");

  CsaBatchOutput<T> out;
  out.s = csa::similarity(keys.per_class, queries.per_class);
  out.s_cd = config_.class_differentiation ? csa::class_differentiate(out.s) : out.s;
  out.attention = csa::attention_normalize(out.s_cd);
  out.o_csa = csa::apply_attention(l, proj.value, out.attention, sigma_);
  out.present = keys.present;
  expect_shape(out.s, {c, t, t}, "S");
  expect_shape(out.s_cd, {c, t, t}, "S^C");
  expect_shape(out.attention, {c, t, t}, "A^C");
  expect_shape(out.o_csa, {b, c, t, f}, "O_CSA");

  update_global_attention(out.attention.detach(), out.present);
  return out;
}

template <typename T>
Tensor<T> CsaModule<T>::forward_eval(const Tensor<T>& l) const {
  check_input(l);
  if (!all_classes_seen()) {
    throw ContractError("stored class attention is unusable: some classes never appeared in training");
  }
  Tensor<T> value = ops::matmul(l, w_value_);
  return csa::apply_attention(l, value, global_attention_, sigma_);
}

template <typename T>
void CsaModule<T>::update_global_attention(const Tensor<T>& batch_attention,
                                           const std::vector<bool>& present) {
  expect_shape(batch_attention, global_attention_.shape(), "batch attention");
  if (present.size() != config_.classes) {
    throw DimensionError("presence flags must have one entry per class");
  }
  const std::size_t slice = config_.time_steps * config_.time_steps;
  Tensor<T> next = global_attention_.detach();
  auto dst = next.data();
  auto src = batch_attention.data();
  const T decay = static_cast<T>(config_.ema_decay);
  for (std::size_t c = 0; c < config_.classes; ++c) {
    if (!present[c]) continue;
    const bool blend = config_.update == AttentionUpdate::Ema && class_seen_[c];
    for (std::size_t i = c * slice; i < (c + 1) * slice; ++i) {
      dst[i] = blend ? decay * dst[i] + (T(1) - decay) * src[i] : src[i];
    }
    class_seen_[c] = true;
  }
  global_attention_ = std::move(next);
}

template <typename T>
bool CsaModule<T>::all_classes_seen() const {
  for (bool seen : class_seen_)
    if (!seen) return false;
  return true;
}

template <typename T>
void CsaModule<T>::restore_global_state(Tensor<T> attention, std::vector<bool> seen) {
  expect_shape(attention, global_attention_.shape(), "stored attention");
  if (seen.size() != config_.classes) throw DimensionError("class_seen has wrong length");
  global_attention_ = attention.detach();
  class_seen_ = std::move(seen);
}

#define CSATS_INSTANTIATE_CSA(T)                                                              \
  template CsaProjection<T> csa::project(const CsaModule<T>&, const Tensor<T>&);              \
  template ClassAggregate<T> csa::class_aggregate(const Tensor<T>&, std::span<const int>,     \
                                                  std::size_t);                               \
  template Tensor<T> csa::similarity(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> csa::class_differentiate(const Tensor<T>&);                              \
  template Tensor<T> csa::attention_normalize(const Tensor<T>&);                              \
  template Tensor<T> csa::apply_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                          const Tensor<T>&);                                  \
  template class CsaModule<T>;

CSATS_INSTANTIATE_CSA(float)
CSATS_INSTANTIATE_CSA(double)

}  // namespace csats
