#include "nar/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nar/rng.hpp"

namespace nar {

namespace {

double eval_scalar(const LossBuilder& f, const ParameterSet& params) {
  Tape tape;
  VarMap vars(&tape, params, /*requires_grad=*/false);
  Var loss = f(tape, vars);
  if (loss.value().numel() != 1) {
    throw std::invalid_argument("grad_check: function must produce a scalar, got " + loss.value().shape_str());
  }
  return static_cast<double>(loss.value()[0]);
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& f, const ParameterSet& params, const GradCheckOptions& opts) {
  GradMap analytic;
  {
    Tape tape;
    VarMap vars(&tape, params, /*requires_grad=*/true);
    Var loss = f(tape, vars);
    if (loss.value().numel() != 1) {
      throw std::invalid_argument("grad_check: function must produce a scalar, got " + loss.value().shape_str());
    }
    tape.backward(loss);
    analytic = extract_grads(vars, params);
  }

  std::vector<std::pair<std::string, int64_t>> coords;
  for (const auto& [path, tensor] : params.items()) {
    for (int64_t i = 0; i < tensor.numel(); ++i) coords.emplace_back(path, i);
  }
  if (coords.empty()) throw std::invalid_argument("grad_check: parameter set is empty");

  if (static_cast<int>(coords.size()) > opts.max_coords) {
    // Deterministic partial Fisher-Yates: the first max_coords entries become
    // a uniform sample without replacement.
    Rng rng(opts.seed);
    for (int i = 0; i < opts.max_coords; ++i) {
      const auto j = static_cast<size_t>(i) + rng.bounded(coords.size() - static_cast<size_t>(i));
      std::swap(coords[static_cast<size_t>(i)], coords[j]);
    }
    coords.resize(static_cast<size_t>(opts.max_coords));
  }

  GradCheckReport report;
  ParameterSet work;
  for (const auto& [path, tensor] : params.items()) work.insert(path, tensor);
  work.set_version(params.version());

  for (const auto& [path, idx] : coords) {
    Tensor& t = work.at(path);
    const float original = t[idx];
    const float plus = static_cast<float>(static_cast<double>(original) + opts.epsilon);
    const float minus = static_cast<float>(static_cast<double>(original) - opts.epsilon);

    t[idx] = plus;
    const double f_plus = eval_scalar(f, work);
    t[idx] = minus;
    const double f_minus = eval_scalar(f, work);
    t[idx] = original;

    const double applied = static_cast<double>(plus) - static_cast<double>(minus);
    const double numeric = (f_plus - f_minus) / applied;
    const double a = static_cast<double>(analytic.at(path)[idx]);
    const double denom = std::max({std::abs(a), std::abs(numeric), opts.rel_floor});
    const double rel = std::abs(a - numeric) / denom;

    ++report.coords_checked;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_path = path;
      report.worst_index = idx;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace nar
