#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "csats/data.hpp"

namespace csats {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename Rng>
void shuffle_indices(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

TsDataset with_vocabulary(const TsDataset& ds, const std::vector<std::string>& class_names) {
  TsDataset out = ds;
  out.class_names = class_names;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    const std::string& name = ds.class_names.at(static_cast<std::size_t>(ds.labels[i]));
    const auto it = std::find(class_names.begin(), class_names.end(), name);
    if (it == class_names.end()) {
      throw LabelError("instance " + std::to_string(i) + " has label '" + name +
                       "' unknown to the training vocabulary");
    }
    out.labels[i] = static_cast<int>(it - class_names.begin());
  }
  return out;
}

void require_class_coverage(const TsDataset& ds) {
  std::vector<bool> seen(ds.classes(), false);
  for (int y : ds.labels) seen.at(static_cast<std::size_t>(y)) = true;
  for (std::size_t c = 0; c < seen.size(); ++c) {
    if (!seen[c]) {
      throw LabelError("class '" + ds.class_names[c] + "' has no training instance");
    }
  }
}

TsDataset znormalize(const TsDataset& ds) {
  TsDataset out = ds;
  out.x = ds.x.detach();
  const std::size_t t = ds.length();
  auto x = out.x.data();
  for (std::size_t start = 0; start < x.size(); start += t) {
    double mean = 0;
    for (std::size_t j = 0; j < t; ++j) mean += x[start + j];
    mean /= static_cast<double>(t);
    double var = 0;
    for (std::size_t j = 0; j < t; ++j) {
      const double d = x[start + j] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(t));
    for (std::size_t j = 0; j < t; ++j) {
      x[start + j] = sd < 1e-8 ? 0.0f : static_cast<float>((x[start + j] - mean) / sd);
    }
  }
  return out;
}

TsDataset subset(const TsDataset& ds, std::span<const std::size_t> indices) {
  const std::size_t per = ds.variables() * ds.length();
  std::vector<float> values;
  values.reserve(indices.size() * per);
  TsDataset out;
  out.name = ds.name;
  out.class_names = ds.class_names;
  auto src = ds.x.data();
  for (std::size_t i : indices) {
    if (i >= ds.size()) throw DimensionError("subset index " + std::to_string(i) + " out of range");
    values.insert(values.end(), src.begin() + i * per, src.begin() + (i + 1) * per);
    out.labels.push_back(ds.labels[i]);
  }
  out.x = Tensor<float>(Shape{indices.size(), ds.variables(), ds.length()}, std::move(values));
  return out;
}

std::pair<TsDataset, TsDataset> stratified_split(const TsDataset& ds, double train_fraction,
                                                 std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1)) throw ConfigError("split fraction must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> first, second;
  for (std::size_t c = 0; c < ds.classes(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (static_cast<std::size_t>(ds.labels[i]) == c) members.push_back(i);
    shuffle_indices(members, rng);
    const auto take = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    first.insert(first.end(), members.begin(), members.begin() + take);
    second.insert(second.end(), members.begin() + take, members.end());
  }
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {subset(ds, first), subset(ds, second)};
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(splitmix64(seed) ^ splitmix64(epoch + 0x5851f42d4c957f2dULL));
  shuffle_indices(order, rng);
  return order;
}

std::vector<Batch> batch_iter(const TsDataset& ds, const BatchPlan& plan, std::uint64_t epoch) {
  if (plan.batch_size == 0) throw ConfigError("batch size must be >= 1");
  const std::size_t n = ds.size();
  if (plan.drop_last && plan.batch_size > n) {
    throw DomainError("batch size " + std::to_string(plan.batch_size) + " exceeds " +
                      std::to_string(n) + " instances with drop_last: the epoch would be empty");
  }
  std::vector<std::size_t> order(n);
  if (plan.shuffle) {
    order = epoch_permutation(n, plan.seed, epoch);
  } else {
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  std::vector<Batch> out;
  for (std::size_t start = 0; start < n; start += plan.batch_size) {
    const std::size_t end = std::min(n, start + plan.batch_size);
    if (plan.drop_last && end - start < plan.batch_size) break;
    std::span<const std::size_t> idx(order.data() + start, end - start);
    TsDataset part = subset(ds, idx);
    out.push_back({part.x, std::move(part.labels), std::vector<std::size_t>(idx.begin(), idx.end())});
  }
  return out;
}

}  // namespace csats
