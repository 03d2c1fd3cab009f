#pragma once

#include <functional>
#include <string>

#include "mvan/autodiff.hpp"
#include "mvan/params.hpp"

namespace mvan {

/// Builds a scalar loss on `tape` from `params`. Must be deterministic.
using LossFn = std::function<ad::Var(ad::Tape& tape, const ParameterStore& params)>;

struct GradCheckResult {
  double max_rel_error = 0;
  std::string worst;  // "name[index]"
  double worst_analytic = 0;
  double worst_numeric = 0;
  std::size_t checked = 0;
};

/// Compares tape gradients against central differences for every scalar of
/// every parameter. Relative error is |a - n| / max(|a|, |n|, floor), so
/// entries whose gradient is tiny are compared in absolute terms.
GradCheckResult check_gradients(ParameterStore& params, const LossFn& loss, double step = 1e-5,
                                double floor = 1e-3);

}  // namespace mvan
