#include <algorithm>
#include <cmath>

#include "csats/nn.hpp"
#include "csats/tape.hpp"

namespace csats::nn {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<TensorNode<T>>;

template <typename T>
T* grad_of(const NodePtr<T>& node) {
  if (!node->requires_grad) return nullptr;
  if (node->grad.empty()) node->grad.assign(node->data.size(), T(0));
  return node->grad.data();
}

template <typename T>
bool should_record(std::initializer_list<const Tensor<T>*> inputs) {
  if (Tape<T>::active() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor<T>* t) { return t->requires_grad(); });
}

struct NctShape {
  std::size_t n, c, t;
};

template <typename T>
NctShape check_bn_shapes(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                         const char* op) {
  if (x.rank() != 3) {
    throw DimensionError(std::string(op) + ": expected [N, C, T], got " + shape_string(x.shape()));
  }
  const NctShape s{x.dim(0), x.dim(1), x.dim(2)};
  if (gamma.shape() != Shape{s.c} || beta.shape() != Shape{s.c}) {
    throw DimensionError(std::string(op) + ": gamma/beta must be [" + std::to_string(s.c) + "]");
  }
  return s;
}

}  // namespace

template <typename T>
Tensor<T> batch_norm_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                           T eps, BatchStats<T>* stats) {
  const NctShape s = check_bn_shapes(x, gamma, beta, "batch_norm_train");
  const std::size_t m = s.n * s.t;
  if (m < 2) {
    throw DomainError("batch_norm_train: batch statistics need N*T >= 2, got " +
                      std::to_string(m));
  }
  auto in = x.data();
  auto gm = gamma.data();
  auto bt = beta.data();
  std::vector<T> mean(s.c, T(0)), var(s.c, T(0)), inv_std(s.c);
  for (std::size_t ni = 0; ni < s.n; ++ni)
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* row = in.data() + (ni * s.c + c) * s.t;
      for (std::size_t t = 0; t < s.t; ++t) mean[c] += row[t];
    }
  for (auto& v : mean) v /= static_cast<T>(m);
  for (std::size_t ni = 0; ni < s.n; ++ni)
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* row = in.data() + (ni * s.c + c) * s.t;
      for (std::size_t t = 0; t < s.t; ++t) {
        const T d = row[t] - mean[c];
        var[c] += d * d;
      }
    }
  for (std::size_t c = 0; c < s.c; ++c) {
    var[c] /= static_cast<T>(m);
    inv_std[c] = T(1) / std::sqrt(var[c] + eps);
  }

  Tensor<T> out(x.shape());
  auto xhat = std::make_shared<std::vector<T>>(x.size());
  auto o = out.data();
  for (std::size_t ni = 0; ni < s.n; ++ni)
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t base = (ni * s.c + c) * s.t;
      for (std::size_t t = 0; t < s.t; ++t) {
        const T h = (in[base + t] - mean[c]) * inv_std[c];
        (*xhat)[base + t] = h;
        o[base + t] = gm[c] * h + bt[c];
      }
    }
  if (!out.all_finite()) throw NumericError("non-finite value produced by batch_norm_train");
  if (stats) {
    stats->mean = mean;
    stats->var = var;
  }

  if (should_record<T>({&x, &gamma, &beta})) {
    auto xn = x.node_ptr(), gn = gamma.node_ptr(), bn = beta.node_ptr();
    Tape<T>::active()->record(
        "batch_norm_train", {xn, gn, bn}, out.node_ptr(),
        [xn, gn, bn, xhat, inv_std, s, m](std::span<const T> g) {
          std::vector<T> sum_g(s.c, T(0)), sum_gh(s.c, T(0));
          for (std::size_t ni = 0; ni < s.n; ++ni)
            for (std::size_t c = 0; c < s.c; ++c) {
              const std::size_t base = (ni * s.c + c) * s.t;
              for (std::size_t t = 0; t < s.t; ++t) {
                sum_g[c] += g[base + t];
                sum_gh[c] += g[base + t] * (*xhat)[base + t];
              }
            }
          if (T* gg = grad_of(gn))
            for (std::size_t c = 0; c < s.c; ++c) gg[c] += sum_gh[c];
          if (T* gb = grad_of(bn))
            for (std::size_t c = 0; c < s.c; ++c) gb[c] += sum_g[c];
          if (T* gx = grad_of(xn)) {
            const T inv_m = T(1) / static_cast<T>(m);
            for (std::size_t ni = 0; ni < s.n; ++ni)
              for (std::size_t c = 0; c < s.c; ++c) {
                const std::size_t base = (ni * s.c + c) * s.t;
                const T k = gn->data[c] * inv_std[c];
                for (std::size_t t = 0; t < s.t; ++t) {
                  const T h = (*xhat)[base + t];
                  gx[base + t] += k * (g[base + t] - inv_m * sum_g[c] - h * inv_m * sum_gh[c]);
                }
              }
          }
        });
  }
  return out;
}

template <typename T>
Tensor<T> batch_norm_eval(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          const Tensor<T>& running_mean, const Tensor<T>& running_var, T eps) {
  const NctShape s = check_bn_shapes(x, gamma, beta, "batch_norm_eval");
  if (running_mean.size() != s.c || running_var.size() != s.c) {
    throw DimensionError("batch_norm_eval: running statistics must have " + std::to_string(s.c) +
                         " entries");
  }
  auto in = x.data();
  auto rm = running_mean.data();
  auto rv = running_var.data();
  auto gm = gamma.data();
  auto bt = beta.data();
  std::vector<T> inv_std(s.c);
  for (std::size_t c = 0; c < s.c; ++c) inv_std[c] = T(1) / std::sqrt(rv[c] + eps);
  Tensor<T> out(x.shape());
  auto o = out.data();
  for (std::size_t ni = 0; ni < s.n; ++ni)
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t base = (ni * s.c + c) * s.t;
      for (std::size_t t = 0; t < s.t; ++t)
        o[base + t] = gm[c] * ((in[base + t] - rm[c]) * inv_std[c]) + bt[c];
    }
  if (!out.all_finite()) throw NumericError("non-finite value produced by batch_norm_eval");

  if (should_record<T>({&x, &gamma, &beta})) {
    auto xn = x.node_ptr(), gn = gamma.node_ptr(), bn = beta.node_ptr();
    std::vector<T> mean(rm.begin(), rm.end());
    Tape<T>::active()->record(
        "batch_norm_eval", {xn, gn, bn}, out.node_ptr(),
        [xn, gn, bn, mean, inv_std, s](std::span<const T> g) {
          T* gx = grad_of(xn);
          T* gg = grad_of(gn);
          T* gb = grad_of(bn);
          for (std::size_t ni = 0; ni < s.n; ++ni)
            for (std::size_t c = 0; c < s.c; ++c) {
              const std::size_t base = (ni * s.c + c) * s.t;
              for (std::size_t t = 0; t < s.t; ++t) {
                const T h = (xn->data[base + t] - mean[c]) * inv_std[c];
                if (gx) gx[base + t] += g[base + t] * gn->data[c] * inv_std[c];
                if (gg) gg[c] += g[base + t] * h;
                if (gb) gb[c] += g[base + t];
              }
            }
        });
  }
  return out;
}

template <typename T>
Tensor<T> cross_entropy_loss(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2) {
    throw DimensionError("cross_entropy_loss: logits must be [N, C], got " +
                         shape_string(logits.shape()));
  }
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) {
    throw DimensionError("cross_entropy_loss: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
  }
  if (n == 0) throw DomainError("cross_entropy_loss: empty batch");
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw LabelError("cross_entropy_loss: label " + std::to_string(labels[i]) + " at index " +
                       std::to_string(i) + " outside [0, " + std::to_string(c) + ")");
    }
  }
  auto z = logits.data();
  auto probs = std::make_shared<std::vector<T>>(n * c);
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = z.data() + i * c;
    const T mx = *std::max_element(row, row + c);
    T se = 0;
    for (std::size_t j = 0; j < c; ++j) se += std::exp(row[j] - mx);
    const T lse = mx + std::log(se);
    total += lse - row[labels[i]];
    for (std::size_t j = 0; j < c; ++j) (*probs)[i * c + j] = std::exp(row[j] - lse);
  }
  Tensor<T> out = Tensor<T>::scalar(total / static_cast<T>(n));
  if (!out.all_finite()) throw NumericError("non-finite value produced by cross_entropy_loss");

  if (should_record<T>({&logits})) {
    auto ln = logits.node_ptr();
    std::vector<int> targets(labels.begin(), labels.end());
    Tape<T>::active()->record("cross_entropy_loss", {ln}, out.node_ptr(),
                              [ln, probs, targets, n, c](std::span<const T> g) {
                                T* gl = grad_of(ln);
                                const T k = g[0] / static_cast<T>(n);
                                for (std::size_t i = 0; i < n; ++i)
                                  for (std::size_t j = 0; j < c; ++j) {
                                    const T onehot =
                                        static_cast<int>(j) == targets[i] ? T(1) : T(0);
                                    gl[i * c + j] += k * ((*probs)[i * c + j] - onehot);
                                  }
                              });
  }
  return out;
}

#define CSATS_INSTANTIATE_FUNCTIONAL(T)                                                       \
  template Tensor<T> batch_norm_train(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T, \
                                      BatchStats<T>*);                                        \
  template Tensor<T> batch_norm_eval(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                     const Tensor<T>&, const Tensor<T>&, T);                  \
  template Tensor<T> cross_entropy_loss(const Tensor<T>&, std::span<const int>);

CSATS_INSTANTIATE_FUNCTIONAL(float)
CSATS_INSTANTIATE_FUNCTIONAL(double)

}  // namespace csats::nn
