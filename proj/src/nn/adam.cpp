#include <cmath>

#include "csats/nn.hpp"

namespace csats::nn {

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config_.lr > 0) || config_.beta1 < 0 || config_.beta1 >= 1 || config_.beta2 < 0 ||
      config_.beta2 >= 1 || !(config_.eps > 0)) {
    throw ConfigError("adam: invalid hyperparameters");
  }
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), T(0));
    v_.emplace_back(p.size(), T(0));
  }
}

template <typename T>
void Adam<T>::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) {
      throw ContractError("adam: parameter " + std::to_string(i) + " has no gradient");
    }
  }
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = config_.lr, eps = config_.eps;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i].mutable_data();
    auto g = params_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j];
      const double mj = b1 * m[j] + (1.0 - b1) * gj;
      const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = lr * (mj / c1) / (std::sqrt(vj / c2) + eps);
      w[j] = static_cast<T>(static_cast<double>(w[j]) - update);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace csats::nn
