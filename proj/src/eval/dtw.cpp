#include <algorithm>
#include <cstdlib>
#include <limits>
#include <thread>

#include "csats/eval.hpp"

namespace csats {

double dtw_distance(std::span<const float> a, std::size_t t1, std::span<const float> b,
                    std::size_t t2, std::size_t variables) {
  if (a.size() != variables * t1 || b.size() != variables * t2) {
    throw DimensionError("dtw: series sizes " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()) + " do not match " + std::to_string(variables) +
                         " variables");
  }
  if (t1 == 0 || t2 == 0) throw DomainError("dtw of an empty series is undefined");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(t2 + 1, inf), cur(t2 + 1, inf);
  prev[0] = 0;
  for (std::size_t i = 1; i <= t1; ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= t2; ++j) {
      double cost = 0;
      for (std::size_t v = 0; v < variables; ++v) {
        const double d = static_cast<double>(a[v * t1 + i - 1]) - b[v * t2 + j - 1];
        cost += d * d;
      }
      cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[t2];
}

std::size_t default_thread_count() {
  if (const char* env = std::getenv("CSA_TS_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<int> nn1_dtw_classify(const TsDataset& train, const Tensor<float>& test_x,
                                  std::size_t threads) {
  if (train.size() == 0) throw DomainError("1-NN needs a non-empty training set");
  if (test_x.rank() != 3 || test_x.dim(1) != train.variables()) {
    throw DimensionError("test set " + shape_string(test_x.shape()) + " does not have " +
                         std::to_string(train.variables()) + " variables");
  }
  const std::size_t v = train.variables(), t_train = train.length(), t_test = test_x.dim(2);
  const std::size_t n_test = test_x.dim(0);
  auto train_x = train.x.data();
  auto xs = test_x.data();
  std::vector<int> out(n_test, 0);

  auto classify = [&](std::size_t i) {
    std::span<const float> q = xs.subspan(i * v * t_test, v * t_test);
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < train.size(); ++j) {
      const double d = dtw_distance(q, t_test, train_x.subspan(j * v * t_train, v * t_train), t_train, v);
      if (d < best) best = d, arg = j;
    }
    out[i] = train.labels[arg];
  };

  const std::size_t workers = std::min(threads == 0 ? default_thread_count() : threads, std::max<std::size_t>(n_test, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n_test; ++i) classify(i);
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n_test; i += workers) classify(i);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace csats
