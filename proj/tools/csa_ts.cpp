// csa_ts: train, evaluate and compare FCN models with and without class-specific attention.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "csats/checkpoint.hpp"
#include "csats/experiment.hpp"

namespace {

using namespace csats;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Experiment flags shared by train/compare/ablate. Values stay unset unless given so that a
/// config file can supply them.
struct ExperimentFlags {
  std::optional<std::string> train, test, variant, attn_update, out, seeds, filters, kernels;
  std::optional<std::size_t> epochs, batch_size, fa, threads;
  std::optional<double> lr;
  std::optional<std::string> config;
  bool no_znorm = false;
  bool no_timing = false;
  bool no_save_models = false;

  void attach(CLI::App* app, bool with_variant) {
    app->add_option("--train", train, "training split (.ts or .csv)");
    app->add_option("--test", test, "test split (.ts or .csv)");
    if (with_variant) app->add_option("--variant", variant, "baseline | csa | csa-nocd");
    app->add_option("--epochs", epochs, "training epochs per seed (default 400)");
    app->add_option("--batch-size", batch_size, "minibatch size (default 16)");
    app->add_option("--lr", lr, "Adam learning rate (default 1e-3)");
    app->add_option("--fa", fa, "key/query width F_a (default 64)");
    app->add_option("--seeds", seeds, "comma-separated seeds (default 0,1,2,3,4)");
    app->add_flag("--no-znorm", no_znorm, "skip per-instance z-normalisation");
    app->add_option("--attn-update", attn_update, "stored attention policy: latest | ema");
    app->add_option("--filters", filters, "backbone filter counts (default 128,256,128)");
    app->add_option("--kernels", kernels, "backbone kernel sizes (default 8,5,3)");
    app->add_option("--out", out, "output directory (default results)");
    app->add_option("--threads", threads, "seed-level workers (default CSA_TS_THREADS or all cores)");
    app->add_option("--config", config, "key = value config file; flags override it");
    app->add_flag("--no-timing", no_timing, "write wall_ms = 0 so repeated runs give identical files");
    app->add_flag("--no-save-models", no_save_models, "do not write per-seed checkpoints");
  }

  ExperimentConfig build() const {
    ExperimentConfig c;
    if (config) apply_config_file(c, *config);
    auto set = [&](const char* key, const auto& value) {
      if (value) set_config_value(c, key, to_text(*value));
    };
    set("train", train);
    set("test", test);
    set("variant", variant);
    set("epochs", epochs);
    set("batch_size", batch_size);
    set("lr", lr);
    set("fa", fa);
    set("seeds", seeds);
    set("attn_update", attn_update);
    set("filters", filters);
    set("kernels", kernels);
    set("out", out);
    set("threads", threads);
    if (no_znorm) c.znorm = false;
    if (no_timing) c.record_timing = false;
    if (no_save_models) c.save_models = false;
    validate(c);
    return c;
  }

  static std::string to_text(const std::string& s) { return s; }
  static std::string to_text(std::size_t v) { return std::to_string(v); }
  static std::string to_text(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }
};

void print_runs(const std::vector<RunRecord>& runs) {
  for (const auto& r : runs) {
    std::printf("%s %s seed=%llu accuracy=%.4f (%zu/%zu)\n", r.dataset.c_str(), r.variant.c_str(),
                static_cast<unsigned long long>(r.seed), r.accuracy, r.correct, r.total);
  }
}

void print_comparison(const Comparison& c) {
  std::printf("%s: %s %.4f vs %s %.4f, AI %.3f%%, chi2 %.4f, p %.4g, %s\n", c.dataset.c_str(),
              to_string(c.variant_a).c_str(), c.acc_a, to_string(c.variant_b).c_str(), c.acc_b, c.ai,
              c.chi.statistic, c.chi.p_value, to_string(c.verdict).c_str());
}

/// Loads a checkpoint and a dataset prepared the way the model was trained.
std::pair<FcnCsaModel<float>, TsDataset> load_model_and_data(const std::string& model_path,
                                                             const std::string& data_path) {
  const CheckpointData ckpt = load_checkpoint(model_path);
  FcnCsaModel<float> model = FcnCsaModel<float>::from_checkpoint(ckpt);
  TsDataset ds = load_dataset(data_path);
  const auto& meta = ckpt.metadata.at("dataset");
  if (meta.contains("class_names")) {
    ds = with_vocabulary(ds, meta.at("class_names").get<std::vector<std::string>>());
  }
  if (meta.value("znorm", true)) ds = znormalize(ds);
  return {std::move(model), std::move(ds)};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-series classification with class-specific attention"};
  app.require_subcommand(1);

  ExperimentFlags train_flags, compare_flags, ablate_flags;
  auto* train_cmd = app.add_subcommand("train", "train and score one variant over all seeds");
  train_flags.attach(train_cmd, true);
  auto* compare_cmd = app.add_subcommand("compare", "baseline FCN vs FCN with class-specific attention");
  compare_flags.attach(compare_cmd, false);
  auto* ablate_cmd = app.add_subcommand("ablate", "attention with vs without class differentiation");
  ablate_flags.attach(ablate_cmd, false);

  std::string eval_model, eval_test, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "score a saved checkpoint on a labelled split");
  eval_cmd->add_option("--model", eval_model, "checkpoint file")->required();
  eval_cmd->add_option("--test", eval_test, "test split (.ts or .csv)")->required();
  eval_cmd->add_option("--out", eval_out, "directory for eval.json and predictions.jsonl");

  std::string export_model, export_data, export_out = "features";
  auto* export_cmd = app.add_subcommand("export-features", "write P^L and P^O feature matrices as CSV");
  export_cmd->add_option("--model", export_model, "checkpoint of a CSA variant")->required();
  export_cmd->add_option("--data", export_data, "split to featurise (.ts or .csv)")->required();
  export_cmd->add_option("--out", export_out, "output directory (default features)");

  std::size_t gen_n = 100, gen_t = 10;
  double gen_noise = 0.1, gen_split = 0.7;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "synthetic", gen_format = "ts";
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "write the flat/up/down synthetic dataset");
  gen_cmd->add_option("--n-per-class", gen_n, "instances per class (default 100)");
  gen_cmd->add_option("--length", gen_t, "series length, >= 4 (default 10)");
  gen_cmd->add_option("--noise", gen_noise, "Gaussian noise std (default 0.1)");
  gen_cmd->add_option("--seed", gen_seed, "generator and split seed (default 0)");
  gen_cmd->add_option("--split", gen_split, "training fraction per class (default 0.7)");
  gen_cmd->add_option("--format", gen_format, "ts | csv")->check(CLI::IsMember({"ts", "csv"}));
  gen_cmd->add_option("--out", gen_out, "output directory (default synthetic)");

  std::string dtw_train, dtw_test, dtw_out;
  bool dtw_no_znorm = false;
  auto* dtw_cmd = app.add_subcommand("dtw-baseline", "1-NN classification under dependent DTW");
  dtw_cmd->add_option("--train", dtw_train, "training split")->required();
  dtw_cmd->add_option("--test", dtw_test, "test split")->required();
  dtw_cmd->add_flag("--no-znorm", dtw_no_znorm, "skip per-instance z-normalisation");
  dtw_cmd->add_option("--out", dtw_out, "directory for dtw.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train_cmd) {
      const ExperimentConfig cfg = train_flags.build();
      print_runs(run_experiment(cfg));
    } else if (*compare_cmd) {
      const ExperimentConfig cfg = compare_flags.build();
      print_comparison(run_comparison(cfg, Variant::Csa, Variant::Baseline));
    } else if (*ablate_cmd) {
      const ExperimentConfig cfg = ablate_flags.build();
      print_comparison(run_comparison(cfg, Variant::Csa, Variant::CsaNoCd));
    } else if (*eval_cmd) {
      auto [model, ds] = load_model_and_data(eval_model, eval_test);
      std::vector<int> predictions = model.predict(ds.x);
      RunRecord r = make_run_record(ds.name, to_string(model.variant()), 0, std::move(predictions),
                                    ds.labels, 0, 0.0);
      std::printf("%s %s accuracy=%.4f (%zu/%zu)\n", ds.name.c_str(), r.variant.c_str(), r.accuracy,
                  r.correct, r.total);
      if (!eval_out.empty()) {
        std::filesystem::create_directories(eval_out);
        write_file(std::filesystem::path(eval_out) / "eval.json",
                   nlohmann::json{{"dataset", r.dataset}, {"variant", r.variant}, {"accuracy", r.accuracy},
                                  {"correct", r.correct}, {"total", r.total}}
                           .dump() + "\n");
        write_file(std::filesystem::path(eval_out) / "predictions.jsonl", predictions_json(r).dump() + "\n");
      }
    } else if (*export_cmd) {
      auto [model, ds] = load_model_and_data(export_model, export_data);
      const FeatureMatrices fm = export_feature_matrices(model, ds.x);
      write_feature_csvs(export_out, fm, ds.labels, ds.class_names);
      std::printf("wrote %s/p_l.csv and %s/p_o.csv\n", export_out.c_str(), export_out.c_str());
    } else if (*gen_cmd) {
      const TsDataset ds = make_example1(gen_n, gen_t, gen_noise, gen_seed);
      auto [train, test] = stratified_split(ds, gen_split, gen_seed);
      std::filesystem::create_directories(gen_out);
      const std::string ext = "." + gen_format;
      save_dataset(std::filesystem::path(gen_out) / ("Example1_TRAIN" + ext), train);
      save_dataset(std::filesystem::path(gen_out) / ("Example1_TEST" + ext), test);
      std::printf("wrote %zu training and %zu test instances to %s\n", train.size(), test.size(),
                  gen_out.c_str());
    } else if (*dtw_cmd) {
      TsDataset train = load_dataset(dtw_train);
      TsDataset test = with_vocabulary(load_dataset(dtw_test), train.class_names);
      if (!dtw_no_znorm) {
        train = znormalize(train);
        test = znormalize(test);
      }
      const std::vector<int> predictions = nn1_dtw_classify(train, test.x);
      const double acc = accuracy(predictions, test.labels);
      std::printf("%s dtw-1nn accuracy=%.4f\n", train.name.c_str(), acc);
      if (!dtw_out.empty()) {
        std::filesystem::create_directories(dtw_out);
        write_file(std::filesystem::path(dtw_out) / "dtw.json",
                   nlohmann::json{{"dataset", train.name}, {"accuracy", acc}, {"predictions", predictions}}
                           .dump() + "\n");
      }
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
