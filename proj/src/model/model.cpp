#include "csats/model.hpp"

#include "csats/ops.hpp"
#include "csats/tape.hpp"

namespace csats {

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::Baseline:
      return "baseline";
    case Variant::Csa:
      return "csa";
    case Variant::CsaNoCd:
      return "csa-nocd";
  }
  return "?";
}

Variant parse_variant(const std::string& text) {
  if (text == "baseline") return Variant::Baseline;
  if (text == "csa") return Variant::Csa;
  if (text == "csa-nocd") return Variant::CsaNoCd;
  throw ConfigError("unknown variant '" + text + "' (expected baseline|csa|csa-nocd)");
}

namespace {

void validate(const ModelConfig& c) {
  if (c.fcn.filters.empty() || c.fcn.filters.size() != c.fcn.kernels.size()) {
    throw ConfigError("backbone needs matching, non-empty filter and kernel lists");
  }
  for (std::size_t i = 0; i < c.fcn.filters.size(); ++i) {
    if (c.fcn.filters[i] == 0 || c.fcn.kernels[i] == 0) {
      throw ConfigError("backbone filters and kernel sizes must be >= 1");
    }
  }
  if (c.variables == 0 || c.time_steps == 0) throw ConfigError("model needs V >= 1 and T >= 1");
  if (c.classes < 2) throw ConfigError("model needs at least 2 classes");
}

std::string block_name(std::size_t i) { return "block" + std::to_string(i); }

template <typename T>
void copy_into(const Tensor<T>& dst, const Tensor<float>& src, const std::string& name) {
  if (dst.shape() != src.shape()) {
    throw DimensionError("checkpoint tensor '" + name + "' has shape " + shape_string(src.shape()) +
                         ", model expects " + shape_string(dst.shape()));
  }
  auto d = dst.mutable_data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<T>(s[i]);
}

}  // namespace

template <typename T>
FcnCsaModel<T>::FcnCsaModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  validate(config_);
  using nn::InitScheme;
  const std::size_t f = feature_width(), c = config_.classes;

  std::vector<nn::ParamSpec> specs;
  std::size_t cin = config_.variables;
  for (std::size_t i = 0; i < config_.fcn.filters.size(); ++i) {
    const std::size_t cout = config_.fcn.filters[i], k = config_.fcn.kernels[i];
    const std::string p = block_name(i);
    specs.push_back({p + ".kernel", {cout, cin, k}, InitScheme::HeUniform, cin * k, cout * k});
    specs.push_back({p + ".bias", {cout}, InitScheme::Zeros, 0, 0});
    specs.push_back({p + ".bn_gamma", {cout}, InitScheme::Ones, 0, 0});
    specs.push_back({p + ".bn_beta", {cout}, InitScheme::Zeros, 0, 0});
    blocks_.push_back(nn::ConvBlock<T>::make(cin, cout, k));
    cin = cout;
  }
  if (uses_csa()) {
    CsaConfig cc;
    cc.features = f;
    cc.attention_features = config_.attention_features;
    cc.classes = c;
    cc.time_steps = config_.time_steps;
    cc.class_differentiation = config_.variant == Variant::Csa;
    cc.update = config_.attention_update;
    cc.ema_decay = config_.ema_decay;
    csa_.emplace(cc);
    auto csa_specs = csa_->param_specs("csa");
    specs.insert(specs.end(), csa_specs.begin(), csa_specs.end());
    specs.push_back({"head.omega", {c, f, 1}, InitScheme::GlorotUniform, f, c});
    specs.push_back({"head.beta", {c}, InitScheme::Zeros, 0, 0});
  } else {
    specs.push_back({"head.weight", {f, c}, InitScheme::GlorotUniform, f, c});
    specs.push_back({"head.bias", {c}, InitScheme::Zeros, 0, 0});
  }

  NamedParams<T> values = nn::init_params<T>(specs, seed);
  std::size_t at = 0;
  for (auto& block : blocks_) {
    block.kernel = values[at++].second;
    block.bias = values[at++].second;
    block.bn_gamma = values[at++].second;
    block.bn_beta = values[at++].second;
  }
  if (csa_) {
    Tensor<T> wk = values[at++].second, wq = values[at++].second;
    Tensor<T> wv = values[at++].second, sigma = values[at++].second;
    csa_->bind_parameters(wk, wq, wv, sigma);
  }
  head_w_ = values[at++].second;
  head_b_ = values[at++].second;
}

template <typename T>
CsaModule<T>& FcnCsaModel<T>::csa() {
  if (!csa_) throw UnsupportedError("the baseline model has no attention module");
  return *csa_;
}

template <typename T>
const CsaModule<T>& FcnCsaModel<T>::csa() const {
  if (!csa_) throw UnsupportedError("the baseline model has no attention module");
  return *csa_;
}

template <typename T>
Tensor<T> FcnCsaModel<T>::backbone_forward(const Tensor<T>& x, bool training) {
  if (x.rank() != 3 || x.dim(1) != config_.variables || x.dim(2) != config_.time_steps) {
    throw DimensionError("model input " + shape_string(x.shape()) + " is not [N, " +
                         std::to_string(config_.variables) + ", " +
                         std::to_string(config_.time_steps) + "]");
  }
  Tensor<T> h = x;
  for (auto& block : blocks_) h = nn::conv_block_forward(block, h, training);
  return ops::transpose_last2(h);
}

template <typename T>
Tensor<T> class_specific_head(const Tensor<T>& g, const Tensor<T>& omega, const Tensor<T>& beta) {
  if (g.rank() != 3 || omega.shape() != Shape{g.dim(1), g.dim(2), 1} ||
      beta.shape() != Shape{g.dim(1)}) {
    throw DimensionError("class-specific head: pooled " + shape_string(g.shape()) + ", omega " +
                         shape_string(omega.shape()) + ", beta " + shape_string(beta.shape()));
  }
  const std::size_t n = g.dim(0), c = g.dim(1), f = g.dim(2);
  Tensor<T> dots = ops::matmul(ops::reshape(g, {n, c, 1, f}), omega);  // [N, C, 1, 1]
  return ops::add(ops::reshape(dots, {n, c}), ops::repeat_axis(beta, 0, n));
}

template <typename T>
Tensor<T> FcnCsaModel<T>::head_forward(const Tensor<T>& pooled) const {
  if (uses_csa()) return class_specific_head(pooled, head_w_, head_b_);
  const std::size_t n = pooled.dim(0);
  return ops::add(ops::matmul(pooled, head_w_), ops::repeat_axis(head_b_, 0, n));
}

template <typename T>
ForwardTrace<T> FcnCsaModel<T>::forward_trace(const Tensor<T>& x, std::span<const int> labels,
                                              bool training) {
  ForwardTrace<T> tr;
  tr.l = backbone_forward(x, training);
  if (!uses_csa()) {
    tr.pooled = ops::reduce_mean_axis(tr.l, 1);
  } else {
    if (training) {
      if (labels.empty()) throw ContractError("training a CSA model requires labels");
      tr.o_csa = csa_->forward_train(tr.l, labels).o_csa;
    } else {
      tr.o_csa = csa_->forward_eval(tr.l);
    }
    tr.pooled = ops::reduce_mean_axis(tr.o_csa, 2);
  }
  tr.logits = head_forward(tr.pooled);
  return tr;
}

template <typename T>
Tensor<T> FcnCsaModel<T>::forward(const Tensor<T>& x, std::span<const int> labels, bool training) {
  return forward_trace(x, labels, training).logits;
}

template <typename T>
Tensor<T> FcnCsaModel<T>::eval_logits(const Tensor<T>& x) {
  if (x.rank() != 3) throw DimensionError("eval input must be [N, V, T]");
  const std::size_t n = x.dim(0), per = x.dim(1) * x.dim(2), c = config_.classes;
  NoGradScope<T> no_record;
  Tensor<T> out(Shape{n, c});
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    Tensor<T> one(Shape{1, x.dim(1), x.dim(2)},
                  std::vector<T>(src.begin() + i * per, src.begin() + (i + 1) * per));
    const Tensor<T> logits = forward(one, {}, false);
    std::copy(logits.data().begin(), logits.data().end(), dst.begin() + i * c);
  }
  return out;
}

template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw DimensionError("argmax expects [N, C] logits");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  auto d = logits.data();
  std::vector<int> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j)
      if (d[i * c + j] > d[i * c + best]) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

template <typename T>
std::vector<int> FcnCsaModel<T>::predict(const Tensor<T>& x) {
  return argmax_rows(eval_logits(x));
}

template <typename T>
NamedParams<T> FcnCsaModel<T>::parameters() const {
  NamedParams<T> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    auto p = blocks_[i].parameters(block_name(i));
    out.insert(out.end(), p.begin(), p.end());
  }
  if (csa_) {
    auto p = csa_->parameters("csa");
    out.insert(out.end(), p.begin(), p.end());
    out.emplace_back("head.omega", head_w_);
    out.emplace_back("head.beta", head_b_);
  } else {
    out.emplace_back("head.weight", head_w_);
    out.emplace_back("head.bias", head_b_);
  }
  return out;
}

template <typename T>
NamedParams<T> FcnCsaModel<T>::buffers() const {
  NamedParams<T> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    auto b = blocks_[i].buffers(block_name(i));
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> FcnCsaModel<T>::parameter_tensors() const {
  std::vector<Tensor<T>> out;
  for (auto& [name, t] : parameters()) out.push_back(t);
  return out;
}

template <typename T>
CheckpointData FcnCsaModel<T>::to_checkpoint(const nlohmann::json& extra) const {
  CheckpointData data;
  data.metadata["model"] = {
      {"variant", to_string(config_.variant)},
      {"variables", config_.variables},
      {"time_steps", config_.time_steps},
      {"classes", config_.classes},
      {"filters", config_.fcn.filters},
      {"kernels", config_.fcn.kernels},
      {"attention_features", config_.attention_features},
      {"attention_update", to_string(config_.attention_update)},
      {"ema_decay", config_.ema_decay},
  };
  data.metadata["dataset"] = extra;
  for (const auto& [name, t] : parameters()) data.tensors.emplace_back(name, tensor_cast<float>(t));
  for (const auto& [name, t] : buffers()) data.tensors.emplace_back(name, tensor_cast<float>(t));
  if (csa_) {
    data.metadata["class_seen"] = csa_->class_seen();
    data.tensors.emplace_back("csa.global_attention", tensor_cast<float>(csa_->global_attention()));
  }
  return data;
}

template <typename T>
FcnCsaModel<T> FcnCsaModel<T>::from_checkpoint(const CheckpointData& data) {
  ModelConfig cfg;
  try {
    const auto& m = data.metadata.at("model");
    cfg.variant = parse_variant(m.at("variant").get<std::string>());
    cfg.variables = m.at("variables").get<std::size_t>();
    cfg.time_steps = m.at("time_steps").get<std::size_t>();
    cfg.classes = m.at("classes").get<std::size_t>();
    cfg.fcn.filters = m.at("filters").get<std::vector<std::size_t>>();
    cfg.fcn.kernels = m.at("kernels").get<std::vector<std::size_t>>();
    cfg.attention_features = m.at("attention_features").get<std::size_t>();
    cfg.attention_update = parse_attention_update(m.at("attention_update").get<std::string>());
    cfg.ema_decay = m.at("ema_decay").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint metadata is incomplete: ") + e.what());
  }
  FcnCsaModel model(cfg, 0);
  for (const auto& [name, t] : model.parameters()) copy_into(t, data.tensor(name), name);
  for (const auto& [name, t] : model.buffers()) copy_into(t, data.tensor(name), name);
  if (model.csa_) {
    const Tensor<float>& att = data.tensor("csa.global_attention");
    Tensor<T> restored = tensor_cast<T>(att);
    std::vector<bool> seen = data.metadata.at("class_seen").get<std::vector<bool>>();
    model.csa_->restore_global_state(restored, std::move(seen));
  }
  return model;
}

template class FcnCsaModel<float>;
template class FcnCsaModel<double>;
template Tensor<float> class_specific_head(const Tensor<float>&, const Tensor<float>&,
                                           const Tensor<float>&);
template Tensor<double> class_specific_head(const Tensor<double>&, const Tensor<double>&,
                                            const Tensor<double>&);
template std::vector<int> argmax_rows(const Tensor<float>&);
template std::vector<int> argmax_rows(const Tensor<double>&);

}  // namespace csats
