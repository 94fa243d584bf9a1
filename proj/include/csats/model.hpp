#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csats/checkpoint.hpp"
#include "csats/csa.hpp"
#include "csats/data.hpp"
#include "csats/nn.hpp"

namespace csats {

enum class Variant { Baseline, Csa, CsaNoCd };

std::string to_string(Variant variant);  // "baseline" | "csa" | "csa-nocd"
Variant parse_variant(const std::string& text);

struct FcnConfig {
  std::vector<std::size_t> filters{128, 256, 128};
  std::vector<std::size_t> kernels{8, 5, 3};
};

struct ModelConfig {
  Variant variant = Variant::Csa;
  std::size_t variables = 1;   // V
  std::size_t time_steps = 1;  // T
  std::size_t classes = 2;     // C
  FcnConfig fcn;
  std::size_t attention_features = 64;  // F_a
  AttentionUpdate attention_update = AttentionUpdate::Latest;
  double ema_decay = 0.9;
};

/// Intermediate tensors of one forward pass.
template <typename T>
struct ForwardTrace {
  Tensor<T> l;       // [N, T, F], backbone output
  Tensor<T> o_csa;   // [N, C, T, F]; undefined for the baseline
  Tensor<T> pooled;  // [N, F] (baseline) or [N, C, F]
  Tensor<T> logits;  // [N, C]
};

/// FCN backbone followed by either a shared dense head (baseline) or class-specific attention and
/// a class-specific head (logit c reads only the pooled slice of class c).
template <typename T>
class FcnCsaModel {
 public:
  /// Parameters are drawn from `seed`; the same config and seed give identical weights.
  FcnCsaModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  Variant variant() const { return config_.variant; }
  bool uses_csa() const { return config_.variant != Variant::Baseline; }
  std::size_t feature_width() const { return config_.fcn.filters.back(); }

  /// [N, V, T] -> L: [N, T, F].
  Tensor<T> backbone_forward(const Tensor<T>& x, bool training);

  /// [N, C] logits. CSA variants need labels in training mode and ignore them otherwise.
  Tensor<T> forward(const Tensor<T>& x, std::span<const int> labels, bool training);
  ForwardTrace<T> forward_trace(const Tensor<T>& x, std::span<const int> labels, bool training);

  /// Evaluation-mode logits computed one instance at a time, so each row depends only on its own
  /// instance.
  Tensor<T> eval_logits(const Tensor<T>& x);
  /// Argmax of eval_logits with ties toward the smaller class index.
  std::vector<int> predict(const Tensor<T>& x);

  NamedParams<T> parameters() const;
  NamedParams<T> buffers() const;
  std::vector<Tensor<T>> parameter_tensors() const;

  std::vector<nn::ConvBlock<T>>& blocks() { return blocks_; }
  const std::vector<nn::ConvBlock<T>>& blocks() const { return blocks_; }
  CsaModule<T>& csa();
  const CsaModule<T>& csa() const;
  bool has_csa() const { return csa_.has_value(); }

  /// Baseline: weight [F, C], bias [C]. CSA variants: omega [C, F, 1], beta [C].
  const Tensor<T>& head_weight() const { return head_w_; }
  const Tensor<T>& head_bias() const { return head_b_; }

  /// Weights, batch-norm buffers, stored class attention and class_seen as float32. `extra` is
  /// kept under metadata["dataset"].
  CheckpointData to_checkpoint(const nlohmann::json& extra = nlohmann::json::object()) const;
  static FcnCsaModel from_checkpoint(const CheckpointData& data);

 private:
  Tensor<T> head_forward(const Tensor<T>& pooled) const;

  ModelConfig config_;
  std::vector<nn::ConvBlock<T>> blocks_;
  std::optional<CsaModule<T>> csa_;
  Tensor<T> head_w_, head_b_;
};

/// Shapes of the class-specific head given pooled features g: [N, C, F], omega: [C, F, 1] and
/// beta: [C]; logits[n, c] = g[n, c, :] . omega[c] + beta[c].
template <typename T>
Tensor<T> class_specific_head(const Tensor<T>& g, const Tensor<T>& omega, const Tensor<T>& beta);

/// Argmax per row of [N, C] with ties toward the smaller index.
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits);

struct TrainConfig {
  std::size_t epochs = 400;
  std::size_t batch_size = 16;
  nn::AdamConfig adam;
  std::uint64_t shuffle_seed = 0;
  bool drop_last = false;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean batch loss per epoch
  std::uint64_t steps = 0;
};

/// Fixed-epoch minibatch training with cross entropy and Adam. `on_epoch(epoch, loss)` is called
/// after every epoch when provided.
TrainReport train_model(FcnCsaModel<float>& model, const TsDataset& train, const TrainConfig& config,
                        const std::function<void(std::size_t, double)>& on_epoch = {});

extern template class FcnCsaModel<float>;
extern template class FcnCsaModel<double>;

}  // namespace csats
