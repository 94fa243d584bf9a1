#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "csats/data.hpp"
#include "csats/model.hpp"
#include "json.hpp"

namespace csats {

// ---------------------------------------------------------------------------------------------
// Metrics

/// Fraction of exact matches. Raises DimensionError on a length mismatch, DomainError when empty.
double accuracy(std::span<const int> predictions, std::span<const int> labels);

/// Percent improvement of acc_a over acc_b: 100 (acc_a - acc_b) / acc_b. acc_b must be > 0.
double accuracy_improvement(double acc_a, double acc_b);

/// Rows are the two models, columns are (correct, incorrect).
struct Contingency2x2 {
  std::array<std::array<std::uint64_t, 2>, 2> counts{};
};

struct ChiSquareResult {
  double statistic = 0;
  double p_value = 1;
};

/// Upper tail of the chi-square distribution with one degree of freedom: erfc(sqrt(x / 2)).
double chi_square_sf_df1(double x);

/// Pearson statistic without continuity correction, df = 1. A zero row or column total raises
/// DomainError.
ChiSquareResult chi_square_test(const Contingency2x2& table);

enum class Verdict { SignificantlyBetter, Better, NotBetter };
std::string to_string(Verdict verdict);

/// SignificantlyBetter iff acc_a > acc_b and p < threshold; Better iff acc_a > acc_b otherwise.
Verdict significance_verdict(double p_value, double acc_a, double acc_b, double threshold = 0.05);

/// Counts of datasets where model A wins significantly, wins without significance, and wins at all.
struct VerdictTally {
  std::size_t significant = 0;
  std::size_t not_significant = 0;
  std::size_t total = 0;
  std::size_t datasets = 0;
};
VerdictTally tally_verdicts(std::span<const Verdict> verdicts);

// ---------------------------------------------------------------------------------------------
// DTW_d nearest neighbour

/// Dependent DTW between a: [V, t1] and b: [V, t2] (row-major, variable-major): squared point
/// costs summed over variables, unconstrained warping window, no final square root.
double dtw_distance(std::span<const float> a, std::size_t t1, std::span<const float> b,
                    std::size_t t2, std::size_t variables);

/// Label of the nearest training instance under dtw_distance for every row of test_x [N, V, T].
/// Ties go to the smaller training index. `threads` = 0 uses default_thread_count().
std::vector<int> nn1_dtw_classify(const TsDataset& train, const Tensor<float>& test_x,
                                  std::size_t threads = 0);

/// Worker cap from CSA_TS_THREADS, falling back to the hardware concurrency (at least 1).
std::size_t default_thread_count();

// ---------------------------------------------------------------------------------------------
// Feature matrices

struct FeatureMatrices {
  Tensor<float> p_l;  // [N, F]: time-mean of the backbone output L
  Tensor<float> p_o;  // [N, C, F]: time-mean of the attention output O_CSA
};

/// Evaluation-mode export (stored attention, no labels). Baseline models raise UnsupportedError.
FeatureMatrices export_feature_matrices(FcnCsaModel<float>& model, const Tensor<float>& x);

/// Writes p_l.csv ("index,label,f0,...") and p_o.csv ("index,label,class,f0,...") into `dir`.
/// `labels` may be empty, in which case the label column is left blank.
void write_feature_csvs(const std::filesystem::path& dir, const FeatureMatrices& features,
                        std::span<const int> labels, const std::vector<std::string>& class_names);

// ---------------------------------------------------------------------------------------------
// Run records

struct RunRecord {
  std::string dataset;
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<int> predictions;
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0;
  std::size_t epochs = 0;
  double wall_ms = 0;
};

RunRecord make_run_record(std::string dataset, std::string variant, std::uint64_t seed,
                          std::vector<int> predictions, std::span<const int> labels,
                          std::size_t epochs, double wall_ms);

/// {dataset, variant, seed, accuracy, epochs, wall_ms}
nlohmann::json run_json(const RunRecord& record);
/// {dataset, variant, seed, predictions}
nlohmann::json predictions_json(const RunRecord& record);

double mean_accuracy(std::span<const RunRecord> runs);

/// Correct/incorrect counts of each model pooled over all its runs.
Contingency2x2 pooled_contingency(std::span<const RunRecord> a, std::span<const RunRecord> b);

}  // namespace csats
