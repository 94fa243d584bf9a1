#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "csats/tensor.hpp"

namespace csats {

/// Labelled collection of equal-length multivariate series, x: [N, V, T].
struct TsDataset {
  Tensor<float> x;
  std::vector<int> labels;
  std::vector<std::string> class_names;  // sorted; label index = rank
  std::string name;

  std::size_t size() const { return labels.size(); }
  std::size_t variables() const { return x.dim(1); }
  std::size_t length() const { return x.dim(2); }
  std::size_t classes() const { return class_names.size(); }
};

// ---------------------------------------------------------------------------------------------
// Files

/// Parses the UEA/UCR `.ts` text format. Missing values ('?' or NaN) become the mean of the
/// instance's observed values for that variable. Unequal lengths raise UnsupportedError, labels
/// outside a declared vocabulary raise LabelError, malformed lines raise ParseError.
TsDataset parse_ts(const std::string& text, const std::string& name = "");
std::string format_ts(const TsDataset& ds);

/// CSV with header "label,v0_t0,v0_t1,...": one row per instance, values variable-major.
TsDataset parse_csv(const std::string& text, const std::string& name = "");
std::string format_csv(const TsDataset& ds);

/// Reads `.ts` or `.csv` by extension. The dataset name defaults to the file stem with any
/// _TRAIN/_TEST suffix removed.
TsDataset load_dataset(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path, const TsDataset& ds);

// ---------------------------------------------------------------------------------------------
// Transforms

/// Re-encodes labels against another vocabulary (e.g. a test split against its training split).
TsDataset with_vocabulary(const TsDataset& ds, const std::vector<std::string>& class_names);

/// Raises LabelError unless every class index occurs at least once.
void require_class_coverage(const TsDataset& ds);

/// Per instance and variable: (x - mean) / std with the population std; std < 1e-8 gives zeros.
TsDataset znormalize(const TsDataset& ds);

TsDataset subset(const TsDataset& ds, std::span<const std::size_t> indices);

/// Per-class shuffled split; each class contributes round(fraction * count) instances to the
/// first part. Both parts keep the original instance order.
std::pair<TsDataset, TsDataset> stratified_split(const TsDataset& ds, double train_fraction,
                                                 std::uint64_t seed);

// ---------------------------------------------------------------------------------------------
// Batching

struct BatchPlan {
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  bool drop_last = false;
  bool shuffle = true;
};

struct Batch {
  Tensor<float> x;  // [B, V, T]
  std::vector<int> labels;
  std::vector<std::size_t> indices;  // positions in the source dataset
};

/// Permutation of [0, n) determined by (seed, epoch) only.
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

/// Raises DomainError when drop_last leaves no batch.
std::vector<Batch> batch_iter(const TsDataset& ds, const BatchPlan& plan, std::uint64_t epoch);

// ---------------------------------------------------------------------------------------------
// Synthetic data

/// Three univariate classes of length t: "flat" (level 1), "up" (level 1, then a linear rise to 2
/// over the second half) and "down" (a linear fall from 2 to 1 over the first half, then level 1),
/// plus Gaussian noise. Requires t >= 4.
TsDataset make_example1(std::size_t n_per_class, std::size_t t, double noise_std,
                        std::uint64_t seed);

}  // namespace csats
