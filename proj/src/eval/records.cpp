#include "csats/eval.hpp"

namespace csats {

RunRecord make_run_record(std::string dataset, std::string variant, std::uint64_t seed,
                          std::vector<int> predictions, std::span<const int> labels,
                          std::size_t epochs, double wall_ms) {
  RunRecord r;
  r.accuracy = accuracy(predictions, labels);
  r.total = labels.size();
  for (std::size_t i = 0; i < labels.size(); ++i) r.correct += predictions[i] == labels[i];
  r.dataset = std::move(dataset);
  r.variant = std::move(variant);
  r.seed = seed;
  r.predictions = std::move(predictions);
  r.epochs = epochs;
  r.wall_ms = wall_ms;
  return r;
}

nlohmann::json run_json(const RunRecord& r) {
  return {{"dataset", r.dataset}, {"variant", r.variant}, {"seed", r.seed},
          {"accuracy", r.accuracy}, {"epochs", r.epochs}, {"wall_ms", r.wall_ms}};
}

nlohmann::json predictions_json(const RunRecord& r) {
  return {{"dataset", r.dataset}, {"variant", r.variant}, {"seed", r.seed}, {"predictions", r.predictions}};
}

double mean_accuracy(std::span<const RunRecord> runs) {
  if (runs.empty()) throw DomainError("mean accuracy of no runs is undefined");
  double sum = 0;
  for (const auto& r : runs) sum += r.accuracy;
  return sum / static_cast<double>(runs.size());
}

Contingency2x2 pooled_contingency(std::span<const RunRecord> a, std::span<const RunRecord> b) {
  Contingency2x2 t;
  for (const auto& r : a) {
    t.counts[0][0] += r.correct;
    t.counts[0][1] += r.total - r.correct;
  }
  for (const auto& r : b) {
    t.counts[1][0] += r.correct;
    t.counts[1][1] += r.total - r.correct;
  }
  return t;
}

}  // namespace csats
