#include "csats/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <thread>

namespace csats {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string jsonl(const std::vector<nlohmann::json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

std::pair<std::string, std::string> column_titles(Variant a, Variant b) {
  if (a == Variant::Csa && b == Variant::Baseline) return {"w/o CSA", "w CSA"};
  if (a == Variant::Csa && b == Variant::CsaNoCd) return {"w/o CD", "w CD"};
  return {to_string(b), to_string(a)};
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& config) {
  if (config.train_path.empty() || config.test_path.empty()) {
    throw ConfigError("both a training and a test file are required");
  }
  PreparedData data;
  data.train = load_dataset(config.train_path);
  TsDataset test = load_dataset(config.test_path);
  if (test.variables() != data.train.variables() || test.length() != data.train.length()) {
    throw DimensionError("test split " + shape_string(test.x.shape()) +
                         " does not match the training split " + shape_string(data.train.x.shape()));
  }
  data.test = with_vocabulary(test, data.train.class_names);
  data.test.name = data.train.name;
  require_class_coverage(data.train);
  if (config.znorm) {
    data.train = znormalize(data.train);
    data.test = znormalize(data.test);
  }
  return data;
}

ModelConfig model_config_for(const ExperimentConfig& config, const TsDataset& train, Variant variant) {
  ModelConfig mc;
  mc.variant = variant;
  mc.variables = train.variables();
  mc.time_steps = train.length();
  mc.classes = train.classes();
  mc.fcn = config.fcn;
  mc.attention_features = config.attention_features;
  mc.attention_update = config.attention_update;
  return mc;
}

RunRecord run_seed(const PreparedData& data, const ExperimentConfig& config, Variant variant,
                   std::uint64_t seed, FcnCsaModel<float>* keep) {
  const auto start = std::chrono::steady_clock::now();
  FcnCsaModel<float> model(model_config_for(config, data.train, variant), seed);
  TrainConfig tc;
  tc.epochs = config.epochs;
  tc.batch_size = config.batch_size;
  tc.adam.lr = config.lr;
  tc.shuffle_seed = seed;
  train_model(model, data.train, tc);
  std::vector<int> predictions = model.predict(data.test.x);
  const double wall_ms =
      config.record_timing
          ? std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count()
          : 0.0;
  RunRecord record = make_run_record(data.train.name, to_string(variant), seed, std::move(predictions),
                                     data.test.labels, config.epochs, wall_ms);
  if (keep) *keep = std::move(model);
  return record;
}

std::vector<RunRecord> run_variant(const PreparedData& data, const ExperimentConfig& config,
                                   Variant variant) {
  std::vector<std::uint64_t> seeds = config.seeds;
  std::sort(seeds.begin(), seeds.end());
  const std::filesystem::path model_dir = config.out_dir / "models";
  if (config.save_models) std::filesystem::create_directories(model_dir);

  std::vector<RunRecord> records(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  auto job = [&](std::size_t i) {
    try {
      FcnCsaModel<float> model(model_config_for(config, data.train, variant), seeds[i]);
      records[i] = run_seed(data, config, variant, seeds[i], &model);
      if (config.save_models) {
        nlohmann::json extra = {{"name", data.train.name},
                                {"class_names", data.train.class_names},
                                {"znorm", config.znorm},
                                {"seed", seeds[i]},
                                {"epochs", config.epochs}};
        save_checkpoint(model_dir / (to_string(variant) + "_seed" + std::to_string(seeds[i]) + ".ckpt"),
                        model.to_checkpoint(extra));
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const std::size_t workers =
      std::min(config.threads == 0 ? default_thread_count() : config.threads, seeds.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) job(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < seeds.size(); i += workers) job(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return records;
}

Comparison compare_runs(const std::string& dataset, Variant a, const std::vector<RunRecord>& runs_a,
                        Variant b, const std::vector<RunRecord>& runs_b) {
  Comparison c;
  c.dataset = dataset;
  c.variant_a = a;
  c.variant_b = b;
  c.acc_a = mean_accuracy(runs_a);
  c.acc_b = mean_accuracy(runs_b);
  c.ai = c.acc_b > 0 ? accuracy_improvement(c.acc_a, c.acc_b) : std::nan("");
  c.table = pooled_contingency(runs_a, runs_b);
  try {
    c.chi = chi_square_test(c.table);
  } catch (const DomainError&) {
    c.degenerate = true;
    c.chi = {0.0, 1.0};
  }
  c.verdict = significance_verdict(c.chi.p_value, c.acc_a, c.acc_b);
  return c;
}

void write_run_files(const std::filesystem::path& dir, const std::vector<RunRecord>& runs) {
  std::filesystem::create_directories(dir);
  std::vector<nlohmann::json> run_rows, prediction_rows, summary_rows;
  std::vector<std::string> order;
  std::map<std::string, std::vector<RunRecord>> by_variant;
  for (const auto& r : runs) {
    run_rows.push_back(run_json(r));
    prediction_rows.push_back(predictions_json(r));
    if (!by_variant.count(r.variant)) order.push_back(r.variant);
    by_variant[r.variant].push_back(r);
  }
  for (const auto& v : order) {
    const auto& group = by_variant[v];
    std::vector<std::uint64_t> seeds;
    for (const auto& r : group) seeds.push_back(r.seed);
    summary_rows.push_back({{"dataset", group.front().dataset},
                            {"variant", v},
                            {"runs", group.size()},
                            {"seeds", seeds},
                            {"mean_accuracy", mean_accuracy(group)},
                            {"epochs", group.front().epochs}});
  }
  write_text(dir / "runs.jsonl", jsonl(run_rows));
  write_text(dir / "predictions.jsonl", jsonl(prediction_rows));
  write_text(dir / "summary.jsonl", jsonl(summary_rows));
}

nlohmann::json report_json(const std::vector<Comparison>& rows) {
  nlohmann::json out = nlohmann::json::object();
  out["rows"] = nlohmann::json::array();
  std::vector<Verdict> verdicts;
  for (const auto& c : rows) {
    const auto& t = c.table.counts;
    out["rows"].push_back({{"dataset", c.dataset},
                           {"variant_a", to_string(c.variant_a)},
                           {"variant_b", to_string(c.variant_b)},
                           {"accuracy_a", c.acc_a},
                           {"accuracy_b", c.acc_b},
                           {"ai_percent", number_or_null(c.ai)},
                           {"contingency", {{t[0][0], t[0][1]}, {t[1][0], t[1][1]}}},
                           {"chi_square", c.chi.statistic},
                           {"p_value", c.chi.p_value},
                           {"degenerate_table", c.degenerate},
                           {"verdict", to_string(c.verdict)}});
    verdicts.push_back(c.verdict);
  }
  const VerdictTally tally = tally_verdicts(verdicts);
  out["tally"] = {{"significant", tally.significant},
                  {"not_significant", tally.not_significant},
                  {"total", tally.total},
                  {"datasets", tally.datasets}};
  return out;
}

std::string format_report(const std::vector<Comparison>& rows) {
  if (rows.empty()) return "";
  const auto [without, with] = column_titles(rows.front().variant_a, rows.front().variant_b);
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-24s %10s %10s %10s %10s %10s  %s\n", "dataset", without.c_str(),
                with.c_str(), "AI(%)", "chi2", "p", "verdict");
  out += buf;
  std::vector<Verdict> verdicts;
  for (const auto& c : rows) {
    const std::string ai = std::isfinite(c.ai) ? [&] {
      char v[32];
      std::snprintf(v, sizeof(v), "%.3f", c.ai);
      return std::string(v);
    }() : std::string("n/a");
    std::snprintf(buf, sizeof(buf), "%-24s %10.4f %10.4f %10s %10.4f %10.4g  %s\n", c.dataset.c_str(),
                  c.acc_b, c.acc_a, ai.c_str(), c.chi.statistic, c.chi.p_value,
                  to_string(c.verdict).c_str());
    out += buf;
    verdicts.push_back(c.verdict);
  }
  const VerdictTally t = tally_verdicts(verdicts);
  std::snprintf(buf, sizeof(buf), "significantly better %zu/%zu, not significantly %zu/%zu, total %zu/%zu\n",
                t.significant, t.datasets, t.not_significant, t.datasets, t.total, t.datasets);
  out += buf;
  return out;
}

void write_report(const std::filesystem::path& dir, const std::vector<Comparison>& rows) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", report_json(rows).dump(2) + "\n");
  write_text(dir / "report.txt", format_report(rows));
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config) {
  validate(config);
  const PreparedData data = prepare_data(config);
  std::vector<RunRecord> runs = run_variant(data, config, config.variant);
  write_run_files(config.out_dir, runs);
  return runs;
}

Comparison run_comparison(const ExperimentConfig& config, Variant a, Variant b) {
  validate(config);
  const PreparedData data = prepare_data(config);
  std::vector<RunRecord> runs_b = run_variant(data, config, b);
  std::vector<RunRecord> runs_a = run_variant(data, config, a);
  std::vector<RunRecord> all = runs_b;
  all.insert(all.end(), runs_a.begin(), runs_a.end());
  write_run_files(config.out_dir, all);
  Comparison c = compare_runs(data.train.name, a, runs_a, b, runs_b);
  write_report(config.out_dir, {c});
  return c;
}

}  // namespace csats
