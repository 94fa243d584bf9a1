#include "csats/model.hpp"
#include "csats/tape.hpp"

namespace csats {

TrainReport train_model(FcnCsaModel<float>& model, const TsDataset& train, const TrainConfig& config,
                        const std::function<void(std::size_t, double)>& on_epoch) {
  if (config.epochs == 0) throw ConfigError("epochs must be >= 1");
  if (config.batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (train.classes() != model.config().classes) {
    throw ConfigError("dataset has " + std::to_string(train.classes()) + " classes, model expects " +
                      std::to_string(model.config().classes));
  }
  if (model.uses_csa()) require_class_coverage(train);

  nn::Adam<float> optimizer(model.parameter_tensors(), config.adam);
  const BatchPlan plan{config.batch_size, config.shuffle_seed, config.drop_last, true};
  TrainReport report;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0;
    const std::vector<Batch> batches = batch_iter(train, plan, epoch);
    for (const Batch& batch : batches) {
      optimizer.zero_grad();
      Tape<float> tape;
      {
        TapeScope<float> scope(tape);
        Tensor<float> logits = model.forward(batch.x, batch.labels, true);
        Tensor<float> loss = nn::cross_entropy_loss(logits, std::span<const int>(batch.labels));
        tape.backward(loss);
        loss_sum += loss.item();
      }
      optimizer.step();
      ++report.steps;
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(batches.size()));
    if (on_epoch) on_epoch(epoch, report.epoch_loss.back());
  }
  return report;
}

}  // namespace csats
