#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "nar/params.hpp"

namespace nar {

struct GradCheckOptions {
  double epsilon = 1e-2;
  // Relative error uses max(|analytic|, |numeric|, rel_floor) as denominator
  // so coordinates with near-zero gradient are judged on an absolute scale.
  double rel_floor = 1e-2;
  int max_coords = 120;
  uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  int coords_checked = 0;
  std::string worst_path;
  int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool pass(double tolerance) const { return coords_checked > 0 && max_rel_err < tolerance; }
};

/// Builds a differentiable scalar from the parameters (must be deterministic).
using LossBuilder = std::function<Var(Tape&, const VarMap&)>;

/// Compares reverse-mode gradients of `f` against central finite differences
/// at sampled coordinates (all coordinates when the parameter count is within
/// max_coords). The numeric derivative divides by the actually-applied f32
/// perturbation, not the nominal epsilon.
GradCheckReport grad_check(const LossBuilder& f, const ParameterSet& params, const GradCheckOptions& opts = {});

}  // namespace nar
