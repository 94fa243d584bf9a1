#include <random>

#include "csats/data.hpp"

namespace csats {

TsDataset make_example1(std::size_t n_per_class, std::size_t t, double noise_std, std::uint64_t seed) {
  if (t < 4) throw ConfigError("synthetic series need length >= 4");
  if (n_per_class == 0) throw ConfigError("synthetic data needs at least one instance per class");
  if (noise_std < 0) throw ConfigError("noise std must be >= 0");

  // templates in label order: down, flat, up
  const std::size_t half = t / 2;
  std::vector<std::vector<double>> templates(3, std::vector<double>(t, 1.0));
  for (std::size_t j = 0; j < half; ++j) {
    templates[0][j] = 2.0 - static_cast<double>(j) / static_cast<double>(half);
  }
  for (std::size_t j = half; j < t; ++j) {
    templates[2][j] = 1.0 + static_cast<double>(j - half) / static_cast<double>(t - 1 - half);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  TsDataset ds;
  ds.name = "Example1";
  ds.class_names = {"down", "flat", "up"};
  std::vector<float> values;
  values.reserve(3 * n_per_class * t);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      for (std::size_t j = 0; j < t; ++j) {
        const double eps = noise_std > 0 ? noise_std * noise(rng) : 0.0;
        values.push_back(static_cast<float>(templates[static_cast<std::size_t>(c)][j] + eps));
      }
      ds.labels.push_back(c);
    }
  }
  ds.x = Tensor<float>(Shape{3 * n_per_class, 1, t}, std::move(values));
  return ds;
}

}  // namespace csats
