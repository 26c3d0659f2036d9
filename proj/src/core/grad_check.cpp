#include "neurop/core/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "neurop/core/error.hpp"

namespace neurop {

namespace {

double evaluate(const TapeFunction& f, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& t : inputs) vars.push_back(tape.leaf(t, false));
  return f(tape, vars).value().item();
}

}  // namespace

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "pass" : "FAIL") << ": max relative error " << max_error << " at input " << worst_input << "["
     << worst_index << "]";
  return os.str();
}

GradCheckReport grad_check(const TapeFunction& f, const std::vector<Tensor>& inputs, const GradCheckOptions& options) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.leaf(t, true));
    Var out = f(tape, vars);
    tape.backward(out);
    for (const auto& v : vars) analytic.push_back(tape.gradient(v));
  }

  GradCheckReport report;
  std::vector<Tensor> probe = inputs;
  for (std::size_t which = 0; which < inputs.size(); ++which) {
    std::vector<double> errors(inputs[which].size());
    for (std::size_t i = 0; i < inputs[which].size(); ++i) {
      const double x0 = inputs[which][i];
      probe[which][i] = x0 + options.step;
      const double up = evaluate(f, probe);
      probe[which][i] = x0 - options.step;
      const double down = evaluate(f, probe);
      probe[which][i] = x0;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[which][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      errors[i] = std::abs(a - numeric) / denom;
      if (!std::isfinite(errors[i]) || errors[i] > report.max_error) {
        report.max_error = std::isfinite(errors[i]) ? errors[i] : INFINITY;
        report.worst_input = which;
        report.worst_index = i;
      }
    }
    report.errors.push_back(std::move(errors));
  }
  report.passed = report.max_error < options.tolerance;
  return report;
}

GradCheckReport grad_check(const std::function<Var(Tape&, const Var&)>& f, const Tensor& x,
                           const GradCheckOptions& options) {
  return grad_check([&f](Tape& tape, std::span<const Var> vars) { return f(tape, vars[0]); }, std::vector<Tensor>{x},
                    options);
}

}  // namespace neurop
