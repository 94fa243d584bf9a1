#include "csats/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

namespace csats::ops {

namespace {

std::atomic<bool> g_finite_checks{true};

template <typename T>
using NodePtr = std::shared_ptr<TensorNode<T>>;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMat<T>>;

template <typename T>
bool should_record(std::initializer_list<const Tensor<T>*> inputs) {
  if (Tape<T>::active() == nullptr) return false;
  for (const Tensor<T>* in : inputs) {
    if (in->requires_grad()) return true;
  }
  return false;
}

template <typename T>
void record(const char* op, std::vector<NodePtr<T>> inputs, const Tensor<T>& out,
            typename Tape<T>::BackwardFn fn) {
  Tape<T>::active()->record(op, std::move(inputs), out.node_ptr(), std::move(fn));
}

/// Gradient buffer of an input, or nullptr when that input does not take a gradient.
template <typename T>
T* grad_of(const NodePtr<T>& node) {
  if (!node->requires_grad) return nullptr;
  if (node->grad.empty()) node->grad.assign(node->data.size(), T(0));
  return node->grad.data();
}

template <typename T>
void check_finite(const Tensor<T>& out, const char* op) {
  if (g_finite_checks.load(std::memory_order_relaxed) && !out.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a) + " and " +
                         shape_string(b) + " differ");
  }
}

void require_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " invalid for shape " + shape_string(s));
  }
}

struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

/// For every output batch slice, the slice index into a and into b.
struct BroadcastPlan {
  Shape out_lead;
  std::vector<std::size_t> a_index, b_index;
};

BroadcastPlan plan_broadcast(const Shape& a_lead, const Shape& b_lead, const Shape& a_full,
                             const Shape& b_full) {
  const std::size_t r = std::max(a_lead.size(), b_lead.size());
  Shape pa(r, 1), pb(r, 1);
  std::copy(a_lead.begin(), a_lead.end(), pa.begin() + (r - a_lead.size()));
  std::copy(b_lead.begin(), b_lead.end(), pb.begin() + (r - b_lead.size()));
  BroadcastPlan plan;
  plan.out_lead.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (pa[i] == pb[i] || pb[i] == 1) {
      plan.out_lead[i] = pa[i];
    } else if (pa[i] == 1) {
      plan.out_lead[i] = pb[i];
    } else {
      throw DimensionError("matmul: leading dims of " + shape_string(a_full) + " and " +
                           shape_string(b_full) + " do not broadcast");
    }
  }
  const std::size_t batches = numel(plan.out_lead);
  plan.a_index.resize(batches);
  plan.b_index.resize(batches);
  for (std::size_t bi = 0; bi < batches; ++bi) {
    std::size_t rem = bi, ia = 0, ib = 0, sa = 1, sb = 1;
    for (std::size_t k = r; k-- > 0;) {
      const std::size_t coord = rem % plan.out_lead[k];
      rem /= plan.out_lead[k];
      if (pa[k] != 1) ia += coord * sa;
      if (pb[k] != 1) ib += coord * sb;
      sa *= pa[k];
      sb *= pb[k];
    }
    plan.a_index[bi] = ia;
    plan.b_index[bi] = ib;
  }
  return plan;
}

}  // namespace

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks_enabled() { return g_finite_checks.load(); }

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() < 2 || bs.size() < 2 || as[as.size() - 1] != bs[bs.size() - 2]) {
    throw DimensionError("matmul: shapes " + shape_string(as) + " and " + shape_string(bs) +
                         " do not conform");
  }
  const std::size_t m = as[as.size() - 2], k = as.back(), p = bs.back();

  // A plain 2-D right operand folds all of a's leading axes into one product.
  if (bs.size() == 2) {
    Shape out_shape(as.begin(), as.end() - 1);
    const std::size_t rows = numel(out_shape);
    out_shape.push_back(p);
    Tensor<T> out(out_shape);
    MutMap<T>(out.data().data(), rows, p).noalias() =
        ConstMap<T>(a.data().data(), rows, k) * ConstMap<T>(b.data().data(), k, p);
    check_finite(out, "matmul");
    if (should_record<T>({&a, &b})) {
      auto an = a.node_ptr(), bn = b.node_ptr();
      record<T>("matmul", {an, bn}, out, [an, bn, rows, k, p](std::span<const T> g) {
        ConstMap<T> gm(g.data(), rows, p);
        if (T* ga = grad_of(an)) {
          MutMap<T>(ga, rows, k).noalias() += gm * ConstMap<T>(bn->data.data(), k, p).transpose();
        }
        if (T* gb = grad_of(bn)) {
          MutMap<T>(gb, k, p).noalias() += ConstMap<T>(an->data.data(), rows, k).transpose() * gm;
        }
      });
    }
    return out;
  }

  const Shape a_lead(as.begin(), as.end() - 2), b_lead(bs.begin(), bs.end() - 2);
  BroadcastPlan plan = plan_broadcast(a_lead, b_lead, as, bs);
  Shape out_shape = plan.out_lead;
  out_shape.push_back(m);
  out_shape.push_back(p);
  Tensor<T> out(out_shape);
  const std::size_t batches = plan.a_index.size();
  for (std::size_t bi = 0; bi < batches; ++bi) {
    MutMap<T>(out.data().data() + bi * m * p, m, p).noalias() =
        ConstMap<T>(a.data().data() + plan.a_index[bi] * m * k, m, k) *
        ConstMap<T>(b.data().data() + plan.b_index[bi] * k * p, k, p);
  }
  check_finite(out, "matmul");
  if (should_record<T>({&a, &b})) {
    auto an = a.node_ptr(), bn = b.node_ptr();
    record<T>("matmul", {an, bn}, out,
              [an, bn, plan = std::move(plan), m, k, p](std::span<const T> g) {
                T* ga = grad_of(an);
                T* gb = grad_of(bn);
                for (std::size_t bi = 0; bi < plan.a_index.size(); ++bi) {
                  ConstMap<T> gm(g.data() + bi * m * p, m, p);
                  const std::size_t ia = plan.a_index[bi] * m * k;
                  const std::size_t ib = plan.b_index[bi] * k * p;
                  if (ga) {
                    MutMap<T>(ga + ia, m, k).noalias() +=
                        gm * ConstMap<T>(bn->data.data() + ib, k, p).transpose();
                  }
                  if (gb) {
                    MutMap<T>(gb + ib, k, p).noalias() +=
                        ConstMap<T>(an->data.data() + ia, m, k).transpose() * gm;
                  }
                }
              });
  }
  return out;
}

template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& x) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw DimensionError("transpose_last2: rank < 2 for " + shape_string(s));
  const std::size_t r = s[s.size() - 2], c = s.back();
  const std::size_t batches = x.size() / std::max<std::size_t>(r * c, 1);
  Shape os = s;
  std::swap(os[os.size() - 1], os[os.size() - 2]);
  Tensor<T> out(os);
  auto in = x.data();
  auto o = out.data();
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t base = b * r * c;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) o[base + j * r + i] = in[base + i * c + j];
  }
  if (should_record<T>({&x})) {
    auto xn = x.node_ptr();
    record<T>("transpose_last2", {xn}, out, [xn, batches, r, c](std::span<const T> g) {
      T* gx = grad_of(xn);
      for (std::size_t b = 0; b < batches; ++b) {
        const std::size_t base = b * r * c;
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gx[base + i * c + j] += g[base + j * r + i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " +
                         shape_string(shape));
  }
  Tensor<T> out(std::move(shape), x.to_vector());
  if (should_record<T>({&x})) {
    auto xn = x.node_ptr();
    record<T>("reshape", {xn}, out, [xn](std::span<const T> g) {
      T* gx = grad_of(xn);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> repeat_axis(const Tensor<T>& x, std::size_t axis, std::size_t copies) {
  const Shape& s = x.shape();
  if (axis > s.size()) {
    throw DimensionError("repeat_axis: axis " + std::to_string(axis) + " invalid for shape " +
                         shape_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis; i < s.size(); ++i) inner *= s[i];
  Shape os = s;
  os.insert(os.begin() + static_cast<std::ptrdiff_t>(axis), copies);
  Tensor<T> out(os);
  auto in = x.data();
  auto o = out.data();
  for (std::size_t a = 0; a < outer; ++a)
    for (std::size_t c = 0; c < copies; ++c)
      std::copy_n(in.begin() + a * inner, inner, o.begin() + (a * copies + c) * inner);
  if (should_record<T>({&x})) {
    auto xn = x.node_ptr();
    record<T>("repeat_axis", {xn}, out, [xn, outer, copies, inner](std::span<const T> g) {
      T* gx = grad_of(xn);
      for (std::size_t a = 0; a < outer; ++a)
        for (std::size_t c = 0; c < copies; ++c)
          for (std::size_t i = 0; i < inner; ++i)
            gx[a * inner + i] += g[(a * copies + c) * inner + i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  auto x = a.data(), y = b.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  check_finite(out, "add");
  if (should_record<T>({&a, &b})) {
    auto an = a.node_ptr(), bn = b.node_ptr();
    record<T>("add", {an, bn}, out, [an, bn](std::span<const T> g) {
      if (T* ga = grad_of(an))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      if (T* gb = grad_of(bn))
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out(a.shape());
  auto x = a.data(), y = b.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  check_finite(out, "sub");
  if (should_record<T>({&a, &b})) {
    auto an = a.node_ptr(), bn = b.node_ptr();
    record<T>("sub", {an, bn}, out, [an, bn](std::span<const T> g) {
      if (T* ga = grad_of(an))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      if (T* gb = grad_of(bn))
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out(a.shape());
  auto x = a.data(), y = b.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  check_finite(out, "mul");
  if (should_record<T>({&a, &b})) {
    auto an = a.node_ptr(), bn = b.node_ptr();
    record<T>("mul", {an, bn}, out, [an, bn](std::span<const T> g) {
      if (T* ga = grad_of(an))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bn->data[i];
      if (T* gb = grad_of(bn))
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * an->data[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  Tensor<T> out(x.shape());
  auto in = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] * factor;
  check_finite(out, "scale");
  if (should_record<T>({&x})) {
    auto xn = x.node_ptr();
    record<T>("scale", {xn}, out, [xn, factor](std::span<const T> g) {
      T* gx = grad_of(xn);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, const Tensor<T>& s) {
  if (s.size() != 1) {
    throw DimensionError("mul_scalar: scale must have one element, got " +
                         shape_string(s.shape()));
  }
  const T factor = s.data()[0];
  Tensor<T> out(x.shape());
  auto in = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] * factor;
  check_finite(out, "mul_scalar");
  if (should_record<T>({&x, &s})) {
    auto xn = x.node_ptr(), sn = s.node_ptr();
    record<T>("mul_scalar", {xn, sn}, out, [xn, sn](std::span<const T> g) {
      const T f = sn->data[0];
      if (T* gx = grad_of(xn))
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * f;
      if (T* gs = grad_of(sn)) {
        T acc = 0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xn->data[i];
        gs[0] += acc;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  auto in = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::abs(in[i]);
  check_finite(out, "abs");
  if (should_record<T>({&x})) {
    auto xn = x.node_ptr();
    record<T>("abs", {xn}, out, [xn](std::span<const T> g) {
      T* gx = grad_of(xn);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T v = xn->data[i];
        if (v > 0) gx[i] += g[i];
        else if (v < 0) gx[i] -= g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  auto in = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] > 0 ? in[i] : T(0);
  check_finite(out, "relu");
  if (should_record<T>({&x})) {
    auto xn = x.node_ptr();
    record<T>("relu", {xn}, out, [xn](std::span<const T> g) {
      T* gx = grad_of(xn);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (xn->data[i] > 0) gx[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  Tensor<T> out = Tensor<T>::scalar(acc);
  check_finite(out, "sum");
  if (should_record<T>({&x})) {
    auto xn = x.node_ptr();
    record<T>("sum", {xn}, out, [xn](std::span<const T> g) {
      T* gx = grad_of(xn);
      for (std::size_t i = 0; i < xn->data.size(); ++i) gx[i] += g[0];
    });
  }
  return out;
}

namespace {

template <typename T>
Tensor<T> reduce_axis(const Tensor<T>& x, std::size_t axis, bool mean, const char* op) {
  const Shape& s = x.shape();
  require_axis(s, axis, op);
  const AxisSplit sp = split_at(s, axis);
  if (mean && sp.extent == 0) {
    throw DomainError(std::string(op) + ": empty reduction over axis " + std::to_string(axis));
  }
  Shape os = s;
  os.erase(os.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor<T> out(os);
  auto in = x.data();
  auto o = out.data();
  const T factor = mean ? T(1) / static_cast<T>(sp.extent) : T(1);
  for (std::size_t a = 0; a < sp.outer; ++a) {
    T* dst = o.data() + a * sp.inner;
    for (std::size_t e = 0; e < sp.extent; ++e) {
      const T* src = in.data() + (a * sp.extent + e) * sp.inner;
      for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
    }
    if (mean)
      for (std::size_t i = 0; i < sp.inner; ++i) dst[i] *= factor;
  }
  check_finite(out, op);
  if (should_record<T>({&x})) {
    auto xn = x.node_ptr();
    record<T>(op, {xn}, out, [xn, sp, factor](std::span<const T> g) {
      T* gx = grad_of(xn);
      for (std::size_t a = 0; a < sp.outer; ++a)
        for (std::size_t e = 0; e < sp.extent; ++e)
          for (std::size_t i = 0; i < sp.inner; ++i)
            gx[(a * sp.extent + e) * sp.inner + i] += g[a * sp.inner + i] * factor;
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> reduce_sum_axis(const Tensor<T>& x, std::size_t axis) {
  return reduce_axis(x, axis, false, "reduce_sum_axis");
}

template <typename T>
Tensor<T> reduce_mean_axis(const Tensor<T>& x, std::size_t axis) {
  return reduce_axis(x, axis, true, "reduce_mean_axis");
}

template <typename T>
Tensor<T> softmax_axis(const Tensor<T>& x, std::size_t axis) {
  const Shape& s = x.shape();
  require_axis(s, axis, "softmax_axis");
  const AxisSplit sp = split_at(s, axis);
  Tensor<T> out(s);
  auto in = x.data();
  auto o = out.data();
  for (std::size_t a = 0; a < sp.outer; ++a) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = a * sp.extent * sp.inner + i;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t e = 0; e < sp.extent; ++e) mx = std::max(mx, in[base + e * sp.inner]);
      T total = 0;
      for (std::size_t e = 0; e < sp.extent; ++e) {
        const T v = std::exp(in[base + e * sp.inner] - mx);
        o[base + e * sp.inner] = v;
        total += v;
      }
      for (std::size_t e = 0; e < sp.extent; ++e) o[base + e * sp.inner] /= total;
    }
  }
  check_finite(out, "softmax_axis");
  if (should_record<T>({&x})) {
    auto xn = x.node_ptr();
    auto y = out.node_ptr();
    record<T>("softmax_axis", {xn}, out, [xn, y, sp](std::span<const T> g) {
      T* gx = grad_of(xn);
      for (std::size_t a = 0; a < sp.outer; ++a) {
        for (std::size_t i = 0; i < sp.inner; ++i) {
          const std::size_t base = a * sp.extent * sp.inner + i;
          T dot = 0;
          for (std::size_t e = 0; e < sp.extent; ++e) {
            const std::size_t idx = base + e * sp.inner;
            dot += g[idx] * y->data[idx];
          }
          for (std::size_t e = 0; e < sp.extent; ++e) {
            const std::size_t idx = base + e * sp.inner;
            gx[idx] += y->data[idx] * (g[idx] - dot);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> conv1d_same(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias) {
  const Shape& xs = x.shape();
  const Shape& ks = kernel.shape();
  if (xs.size() != 3 || ks.size() != 3 || bias.rank() != 1) {
    throw DimensionError("conv1d_same: expected x [N,C_in,T], kernel [C_out,C_in,k], bias "
                         "[C_out]; got " +
                         shape_string(xs) + ", " + shape_string(ks) + ", " +
                         shape_string(bias.shape()));
  }
  const std::size_t n = xs[0], cin = xs[1], t = xs[2];
  const std::size_t cout = ks[0], k = ks[2];
  if (ks[1] != cin) {
    throw DimensionError("conv1d_same: input has " + std::to_string(cin) +
                         " channels, kernel expects " + std::to_string(ks[1]));
  }
  if (bias.dim(0) != cout) {
    throw DimensionError("conv1d_same: bias " + shape_string(bias.shape()) +
                         " does not match kernel " + shape_string(ks));
  }
  if (k == 0 || t == 0) throw DimensionError("conv1d_same: empty kernel or series");
  const std::ptrdiff_t pad_left = static_cast<std::ptrdiff_t>((k - 1) / 2);
  const std::size_t rows = cin * k, cols = n * t;

  // im2col: column n*T + t holds the receptive field of output step t of instance n
  auto columns = std::make_shared<std::vector<T>>(rows * cols, T(0));
  auto in = x.data();
  for (std::size_t ni = 0; ni < n; ++ni)
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t j = 0; j < k; ++j) {
        T* dst = columns->data() + (ci * k + j) * cols + ni * t;
        const T* src = in.data() + (ni * cin + ci) * t;
        for (std::size_t ti = 0; ti < t; ++ti) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(ti + j) - pad_left;
          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(t)) dst[ti] = src[pos];
        }
      }

  RowMat<T> y = ConstMap<T>(kernel.data().data(), cout, rows) *
                ConstMap<T>(columns->data(), rows, cols);
  Tensor<T> out(Shape{n, cout, t});
  auto o = out.data();
  auto b = bias.data();
  for (std::size_t ni = 0; ni < n; ++ni)
    for (std::size_t co = 0; co < cout; ++co) {
      T* dst = o.data() + (ni * cout + co) * t;
      const T* src = y.data() + co * cols + ni * t;
      for (std::size_t ti = 0; ti < t; ++ti) dst[ti] = src[ti] + b[co];
    }
  check_finite(out, "conv1d_same");

  if (should_record<T>({&x, &kernel, &bias})) {
    auto xn = x.node_ptr(), kn = kernel.node_ptr(), bn = bias.node_ptr();
    record<T>("conv1d_same", {xn, kn, bn}, out,
              [xn, kn, bn, columns, n, cin, t, cout, k, pad_left, rows,
               cols](std::span<const T> g) {
                RowMat<T> gy(cout, cols);
                for (std::size_t ni = 0; ni < n; ++ni)
                  for (std::size_t co = 0; co < cout; ++co)
                    std::copy_n(g.data() + (ni * cout + co) * t, t,
                                gy.data() + co * cols + ni * t);
                if (T* gk = grad_of(kn)) {
                  MutMap<T>(gk, cout, rows).noalias() +=
                      gy * ConstMap<T>(columns->data(), rows, cols).transpose();
                }
                if (T* gb = grad_of(bn)) {
                  for (std::size_t co = 0; co < cout; ++co) {
                    T acc = 0;
                    for (std::size_t c = 0; c < cols; ++c) acc += gy(co, c);
                    gb[co] += acc;
                  }
                }
                if (T* gx = grad_of(xn)) {
                  RowMat<T> gcol =
                      ConstMap<T>(kn->data.data(), cout, rows).transpose() * gy;
                  for (std::size_t ni = 0; ni < n; ++ni)
                    for (std::size_t ci = 0; ci < cin; ++ci)
                      for (std::size_t j = 0; j < k; ++j) {
                        const T* src = gcol.data() + (ci * k + j) * cols + ni * t;
                        T* dst = gx + (ni * cin + ci) * t;
                        for (std::size_t ti = 0; ti < t; ++ti) {
                          const std::ptrdiff_t pos =
                              static_cast<std::ptrdiff_t>(ti + j) - pad_left;
                          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(t))
                            dst[pos] += src[ti];
                        }
                      }
                }
              });
  }
  return out;
}

#define CSATS_INSTANTIATE_OPS(T)                                                   \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> transpose_last2(const Tensor<T>&);                            \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                             \
  template Tensor<T> repeat_axis(const Tensor<T>&, std::size_t, std::size_t);      \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> scale(const Tensor<T>&, T);                                   \
  template Tensor<T> mul_scalar(const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> abs(const Tensor<T>&);                                        \
  template Tensor<T> relu(const Tensor<T>&);                                       \
  template Tensor<T> sum(const Tensor<T>&);                                        \
  template Tensor<T> reduce_sum_axis(const Tensor<T>&, std::size_t);               \
  template Tensor<T> reduce_mean_axis(const Tensor<T>&, std::size_t);              \
  template Tensor<T> softmax_axis(const Tensor<T>&, std::size_t);                  \
  template Tensor<T> conv1d_same(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);

CSATS_INSTANTIATE_OPS(float)
CSATS_INSTANTIATE_OPS(double)

}  // namespace csats::ops
