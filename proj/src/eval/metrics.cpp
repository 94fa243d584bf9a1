#include <cmath>

#include "csats/eval.hpp"

namespace csats {

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw DimensionError(std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw DomainError("accuracy of an empty set is undefined");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double accuracy_improvement(double acc_a, double acc_b) {
  if (!(acc_b > 0)) throw DomainError("accuracy improvement over a zero baseline is undefined");
  return 100.0 * (acc_a - acc_b) / acc_b;
}

double chi_square_sf_df1(double x) {
  if (x <= 0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

ChiSquareResult chi_square_test(const Contingency2x2& table) {
  const auto& o = table.counts;
  double rows[2] = {0, 0}, cols[2] = {0, 0}, n = 0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const auto v = static_cast<double>(o[i][j]);
      rows[i] += v;
      cols[j] += v;
      n += v;
    }
  }
  if (rows[0] == 0 || rows[1] == 0 || cols[0] == 0 || cols[1] == 0) {
    throw DomainError("chi-square test is undefined for a table with a zero marginal");
  }
  ChiSquareResult r;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double e = rows[i] * cols[j] / n;
      const double d = static_cast<double>(o[i][j]) - e;
      r.statistic += d * d / e;
    }
  }
  r.p_value = chi_square_sf_df1(r.statistic);
  return r;
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::SignificantlyBetter:
      return "significantly-better";
    case Verdict::Better:
      return "better";
    case Verdict::NotBetter:
      return "not-better";
  }
  return "?";
}

Verdict significance_verdict(double p_value, double acc_a, double acc_b, double threshold) {
  if (!(acc_a > acc_b)) return Verdict::NotBetter;
  return p_value < threshold ? Verdict::SignificantlyBetter : Verdict::Better;
}

VerdictTally tally_verdicts(std::span<const Verdict> verdicts) {
  VerdictTally t;
  t.datasets = verdicts.size();
  for (Verdict v : verdicts) {
    if (v == Verdict::SignificantlyBetter) ++t.significant;
    if (v == Verdict::Better) ++t.not_significant;
  }
  t.total = t.significant + t.not_significant;
  return t;
}

}  // namespace csats
