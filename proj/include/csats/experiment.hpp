#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "csats/data.hpp"
#include "csats/eval.hpp"
#include "csats/model.hpp"

namespace csats {

struct ExperimentConfig {
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  Variant variant = Variant::Csa;
  std::size_t epochs = 400;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  std::size_t attention_features = 64;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  bool znorm = true;
  AttentionUpdate attention_update = AttentionUpdate::Latest;
  FcnConfig fcn;
  std::filesystem::path out_dir = "results";
  bool record_timing = true;  // false writes wall_ms = 0 so result files are byte-stable
  bool save_models = true;
  std::size_t threads = 0;  // seed-level workers; 0 = default_thread_count()
};

/// Raises ConfigError for epochs < 1, empty seeds, F_a < 1, batch size < 1, lr <= 0 or a
/// malformed backbone.
void validate(const ExperimentConfig& config);

/// Keys: train, test, variant, epochs, batch_size, lr, fa, seeds (comma list), znorm (bool),
/// attn_update, filters (comma list), kernels (comma list), out, timing (bool), save_models (bool),
/// threads. Unknown keys and bad values raise ConfigError.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

/// "key = value" lines; blank lines and lines starting with '#' are ignored.
void apply_config_text(ExperimentConfig& config, const std::string& text);
void apply_config_file(ExperimentConfig& config, const std::filesystem::path& path);

struct PreparedData {
  TsDataset train;
  TsDataset test;  // labels encoded with the training vocabulary
};

/// Loads both splits, re-encodes the test labels, checks class coverage and applies
/// z-normalisation when enabled.
PreparedData prepare_data(const ExperimentConfig& config);

ModelConfig model_config_for(const ExperimentConfig& config, const TsDataset& train, Variant variant);

/// Trains one seed and scores it on the test split. When `keep` is non-null the trained model is
/// moved into it.
RunRecord run_seed(const PreparedData& data, const ExperimentConfig& config, Variant variant,
                   std::uint64_t seed, FcnCsaModel<float>* keep = nullptr);

/// Every configured seed (in parallel up to the thread cap), sorted by seed. Checkpoints go to
/// out_dir/models/<variant>_seed<k>.ckpt when save_models is set.
std::vector<RunRecord> run_variant(const PreparedData& data, const ExperimentConfig& config,
                                   Variant variant);

struct Comparison {
  std::string dataset;
  Variant variant_a = Variant::Csa;  // the "with" model
  Variant variant_b = Variant::Baseline;
  double acc_a = 0;
  double acc_b = 0;
  double ai = 0;  // NaN when acc_b == 0
  Contingency2x2 table;
  ChiSquareResult chi;
  bool degenerate = false;  // a zero marginal; reported as statistic 0, p 1
  Verdict verdict = Verdict::NotBetter;
};

Comparison compare_runs(const std::string& dataset, Variant a, const std::vector<RunRecord>& runs_a,
                        Variant b, const std::vector<RunRecord>& runs_b);

/// runs.jsonl, predictions.jsonl and summary.jsonl (one aggregate row per variant).
void write_run_files(const std::filesystem::path& dir, const std::vector<RunRecord>& runs);

/// report.json and report.txt. Column titles follow the pair: "w/o CSA | w CSA" for
/// baseline-vs-csa, "w/o CD | w CD" for the ablation.
void write_report(const std::filesystem::path& dir, const std::vector<Comparison>& rows);
std::string format_report(const std::vector<Comparison>& rows);
nlohmann::json report_json(const std::vector<Comparison>& rows);

/// Single-variant protocol: every seed trained and scored, files written to out_dir.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config);

/// Two-variant protocol (a = with, b = without): runs, summary and report written to out_dir.
Comparison run_comparison(const ExperimentConfig& config, Variant a, Variant b);

}  // namespace csats
