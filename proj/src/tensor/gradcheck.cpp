#include "csats/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "csats/tape.hpp"

namespace csats {

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "passed" : "FAILED") << ": " << coordinates_checked
     << " coordinates, max rel err " << max_rel_error;
  if (!worst_param.empty()) os << " at " << worst_param << "[" << worst_coordinate << "]";
  for (const auto& f : failures) {
    os << "\n  " << f.param << "[" << f.coordinate << "] analytic=" << f.analytic
       << " numeric=" << f.numeric << " rel=" << f.rel_error;
  }
  return os.str();
}

GradCheckReport grad_check(const std::function<Tensor<double>()>& loss,
                           const std::vector<NamedTensor>& params,
                           const GradCheckOptions& options) {
  for (const auto& [name, p] : params) {
    if (!p.requires_grad()) throw ContractError("grad_check: '" + name + "' does not require grad");
    if (!p.all_finite()) throw ContractError("grad_check: '" + name + "' has non-finite values");
    p.zero_grad();
  }

  {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    Tensor<double> value = loss();
    tape.backward(value);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& np : params) analytic.emplace_back(np.second.grad().begin(), np.second.grad().end());

  GradCheckReport report;
  NoGradScope<double> no_record;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const auto& [name, p] = params[pi];
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + options.step;
      const double up = loss().item();
      values[i] = original - options.step;
      const double down = loss().item();
      values[i] = original;

      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coordinates_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = name;
        report.worst_coordinate = i;
      }
      if (!(rel <= options.tolerance)) {
        report.passed = false;
        report.failures.push_back({name, i, a, numeric, rel});
      }
    }
  }
  return report;
}

}  // namespace csats
