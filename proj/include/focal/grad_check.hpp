#pragma once

#include <functional>

#include "focal/tape.hpp"

namespace focal {

// Builds a scalar loss from the single parameter registered on the tape.
using TapeFn = std::function<VarId(Tape&, VarId param)>;

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// The analytic side comes from Tape::backward; the reference side re-evaluates
// the function at point +- step per coordinate, independent of any stored
// partials.
double grad_check(const TapeFn& f, const Tensor& point, double step = 1e-6);

// Scalar evaluation helper for oracle code paths.
double eval_scalar(const TapeFn& f, const Tensor& point);

}  // namespace focal
