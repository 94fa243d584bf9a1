#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "csats/eval.hpp"

namespace fixture {

struct AiRow {
  std::string dataset;
  double acc_without = 0;
  double acc_with = 0;
  double ai = 0;
};

/// Rows of tests/data/ai_fixture.csv: reference accuracy pairs and their improvement values.
inline std::vector<AiRow> load_ai_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<AiRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    AiRow r;
    std::string cell;
    std::getline(ss, r.dataset, ',');
    std::getline(ss, cell, ',');
    r.acc_without = std::stod(cell);
    std::getline(ss, cell, ',');
    r.acc_with = std::stod(cell);
    std::getline(ss, cell, ',');
    r.ai = std::stod(cell);
    rows.push_back(r);
  }
  return rows;
}

/// Five seeds of `total` test instances with `correct` hits each (labels all 0).
inline std::vector<csats::RunRecord> runs(const std::string& dataset, const std::string& variant,
                                          std::size_t correct, std::size_t total = 40) {
  std::vector<int> labels(total, 0), predictions(total, 1);
  for (std::size_t i = 0; i < correct; ++i) predictions[i] = 0;
  std::vector<csats::RunRecord> out;
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    out.push_back(csats::make_run_record(dataset, variant, seed, predictions, labels, 10, 0));
  return out;
}

struct PairedRuns {
  std::string dataset;
  std::vector<csats::RunRecord> with, without;
};

/// 28 synthetic datasets: 3 large wins, 18 one-instance wins, 5 ties and 2 losses.
inline std::vector<PairedRuns> tally_fixture() {
  std::vector<PairedRuns> out;
  auto add = [&](std::size_t with_correct, std::size_t without_correct) {
    const std::string name = "D" + std::to_string(out.size());
    out.push_back({name, runs(name, "csa", with_correct), runs(name, "baseline", without_correct)});
  };
  for (int i = 0; i < 3; ++i) add(38, 28);
  for (int i = 0; i < 18; ++i) add(31, 30);
  for (int i = 0; i < 5; ++i) add(30, 30);
  for (int i = 0; i < 2; ++i) add(29, 30);
  return out;
}

}  // namespace fixture
