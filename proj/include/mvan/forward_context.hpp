#pragma once

#include <set>
#include <string>

#include "mvan/autodiff.hpp"
#include "mvan/params.hpp"
#include "mvan/rng.hpp"

namespace mvan {

/// Everything one forward pass needs besides its input: the tape to record
/// on, the parameter snapshot, and the dropout setup.
struct ForwardContext {
  ad::Tape& tape;
  const ParameterStore& params;
  bool training = false;
  double dropout = 0.0;
  Rng* rng = nullptr;  // required when training with dropout > 0
  const std::set<std::string>* frozen = nullptr;

  ad::Var param(const std::string& name) const {
    const Tensor& t = params.at(name);
    if (frozen && frozen->count(name)) return tape.constant_view(t);
    return tape.parameter(name, t);
  }

  ad::Var drop(ad::Var x) const {
    if (!training || dropout == 0.0) return x;
    if (!rng) throw std::logic_error("dropout requested without a random stream");
    return ad::dropout(x, dropout, true, *rng);
  }
};

}  // namespace mvan
