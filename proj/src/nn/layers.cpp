#include <cmath>
#include <random>

#include "csats/nn.hpp"
#include "csats/ops.hpp"

namespace csats::nn {

template <typename T>
ConvBlock<T> ConvBlock<T>::make(std::size_t in_channels, std::size_t out_channels,
                                std::size_t kernel_size) {
  ConvBlock b;
  b.kernel = Tensor<T>::zeros({out_channels, in_channels, kernel_size});
  b.bias = Tensor<T>::zeros({out_channels});
  b.bn_gamma = Tensor<T>::full({out_channels}, T(1));
  b.bn_beta = Tensor<T>::zeros({out_channels});
  b.bn_running_mean = Tensor<T>::zeros({out_channels});
  b.bn_running_var = Tensor<T>::full({out_channels}, T(1));
  for (auto* p : {&b.kernel, &b.bias, &b.bn_gamma, &b.bn_beta}) p->set_requires_grad(true);
  return b;
}

template <typename T>
NamedParams<T> ConvBlock<T>::parameters(const std::string& prefix) const {
  return {{prefix + ".kernel", kernel},
          {prefix + ".bias", bias},
          {prefix + ".bn_gamma", bn_gamma},
          {prefix + ".bn_beta", bn_beta}};
}

template <typename T>
NamedParams<T> ConvBlock<T>::buffers(const std::string& prefix) const {
  return {{prefix + ".bn_running_mean", bn_running_mean},
          {prefix + ".bn_running_var", bn_running_var}};
}

template <typename T>
Tensor<T> conv_block_forward(ConvBlock<T>& block, const Tensor<T>& x, bool training) {
  Tensor<T> z = ops::conv1d_same(x, block.kernel, block.bias);
  Tensor<T> normed;
  if (training) {
    BatchStats<T> stats;
    normed = batch_norm_train(z, block.bn_gamma, block.bn_beta, block.bn_eps, &stats);
    const T m = static_cast<T>(z.dim(0) * z.dim(2));
    const T mom = block.bn_momentum;
    auto rm = block.bn_running_mean.mutable_data();
    auto rv = block.bn_running_var.mutable_data();
    for (std::size_t c = 0; c < rm.size(); ++c) {
      rm[c] = mom * rm[c] + (T(1) - mom) * stats.mean[c];
      rv[c] = mom * rv[c] + (T(1) - mom) * stats.var[c] * m / (m - T(1));
    }
  } else {
    normed = batch_norm_eval(z, block.bn_gamma, block.bn_beta, block.bn_running_mean,
                             block.bn_running_var, block.bn_eps);
  }
  return ops::relu(normed);
}

template <typename T>
NamedParams<T> init_params(std::span<const ParamSpec> description, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NamedParams<T> out;
  out.reserve(description.size());
  for (const ParamSpec& spec : description) {
    Tensor<T> t(spec.shape);
    auto d = t.data();
    double limit = 0;
    switch (spec.scheme) {
      case InitScheme::Zeros:
        break;
      case InitScheme::Ones:
        std::fill(d.begin(), d.end(), T(1));
        break;
      case InitScheme::HeUniform:
        if (spec.fan_in == 0) throw ConfigError("he-uniform init of '" + spec.name + "' needs fan_in");
        limit = std::sqrt(6.0 / static_cast<double>(spec.fan_in));
        break;
      case InitScheme::GlorotUniform:
        if (spec.fan_in + spec.fan_out == 0) {
          throw ConfigError("glorot-uniform init of '" + spec.name + "' needs fans");
        }
        limit = std::sqrt(6.0 / static_cast<double>(spec.fan_in + spec.fan_out));
        break;
    }
    if (limit > 0) {
      // explicit affine map of raw 64-bit draws keeps values identical across standard libraries
      for (auto& v : d) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        v = static_cast<T>((2.0 * u - 1.0) * limit);
      }
    }
    t.set_requires_grad(true);
    out.emplace_back(spec.name, std::move(t));
  }
  return out;
}

template struct ConvBlock<float>;
template struct ConvBlock<double>;
template Tensor<float> conv_block_forward(ConvBlock<float>&, const Tensor<float>&, bool);
template Tensor<double> conv_block_forward(ConvBlock<double>&, const Tensor<double>&, bool);
template NamedParams<float> init_params<float>(std::span<const ParamSpec>, std::uint64_t);
template NamedParams<double> init_params<double>(std::span<const ParamSpec>, std::uint64_t);

}  // namespace csats::nn
