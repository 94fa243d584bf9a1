#include <charconv>
#include <fstream>

#include "csats/eval.hpp"
#include "csats/ops.hpp"
#include "csats/tape.hpp"

namespace csats {

FeatureMatrices export_feature_matrices(FcnCsaModel<float>& model, const Tensor<float>& x) {
  if (!model.uses_csa()) throw UnsupportedError("feature export needs a CSA variant (baseline has no O_CSA)");
  if (x.rank() != 3) throw DimensionError("feature export expects [N, V, T]");
  const std::size_t n = x.dim(0), per = x.dim(1) * x.dim(2);
  const std::size_t f = model.feature_width(), c = model.config().classes;
  NoGradScope<float> no_record;
  FeatureMatrices out{Tensor<float>(Shape{n, f}), Tensor<float>(Shape{n, c, f})};
  auto src = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    Tensor<float> one(Shape{1, x.dim(1), x.dim(2)},
                      std::vector<float>(src.begin() + i * per, src.begin() + (i + 1) * per));
    ForwardTrace<float> tr = model.forward_trace(one, {}, false);
    const Tensor<float> pooled_l = ops::reduce_mean_axis(tr.l, 1);
    auto pl = pooled_l.data();
    auto po = tr.pooled.data();
    std::copy(pl.begin(), pl.end(), out.p_l.data().begin() + i * f);
    std::copy(po.begin(), po.end(), out.p_o.data().begin() + i * c * f);
  }
  return out;
}

namespace {

void append_number(std::string& out, float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

void write_feature_csvs(const std::filesystem::path& dir, const FeatureMatrices& features,
                        std::span<const int> labels, const std::vector<std::string>& class_names) {
  const std::size_t n = features.p_l.dim(0), f = features.p_l.dim(1), c = features.p_o.dim(1);
  if (!labels.empty() && labels.size() != n) throw DimensionError("one label per instance expected");
  auto label_of = [&](std::size_t i) -> std::string {
    if (labels.empty()) return "";
    return class_names.at(static_cast<std::size_t>(labels[i]));
  };
  std::filesystem::create_directories(dir);

  std::string header;
  for (std::size_t k = 0; k < f; ++k) header += ",f" + std::to_string(k);

  std::string pl = "index,label" + header + "\n";
  auto l = features.p_l.data();
  for (std::size_t i = 0; i < n; ++i) {
    pl += std::to_string(i) + "," + label_of(i);
    for (std::size_t k = 0; k < f; ++k) {
      pl += ',';
      append_number(pl, l[i * f + k]);
    }
    pl += '\n';
  }
  write_text(dir / "p_l.csv", pl);

  std::string po = "index,label,class" + header + "\n";
  auto o = features.p_o.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t cls = 0; cls < c; ++cls) {
      po += std::to_string(i) + "," + label_of(i) + "," + class_names.at(cls);
      for (std::size_t k = 0; k < f; ++k) {
        po += ',';
        append_number(po, o[(i * c + cls) * f + k]);
      }
      po += '\n';
    }
  }
  write_text(dir / "p_o.csv", po);
}

}  // namespace csats
