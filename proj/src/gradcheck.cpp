#include "mvan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace mvan {

namespace {

double eval(ParameterStore& params, const LossFn& loss) {
  ad::Tape tape;
  return loss(tape, params).value()[0];
}

}  // namespace

GradCheckResult check_gradients(ParameterStore& params, const LossFn& loss, double step, double floor) {
  ad::Gradients grads;
  {
    ad::Tape tape;
    grads = tape.gradient(loss(tape, params));
  }
  GradCheckResult r;
  for (auto& [name, tensor] : params) {
    auto it = grads.find(name);
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double analytic = it == grads.end() ? 0.0 : it->second[i];
      const double saved = tensor[i];
      tensor[i] = saved + step;
      const double up = eval(params, loss);
      tensor[i] = saved - step;
      const double down = eval(params, loss);
      tensor[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      ++r.checked;
      if (r.worst.empty() || err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst = name + "[" + std::to_string(i) + "]";
        r.worst_analytic = analytic;
        r.worst_numeric = numeric;
      }
    }
  }
  return r;
}

}  // namespace mvan
