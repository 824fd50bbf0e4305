#include "focal/grad_check.hpp"

#include <cmath>

#include "focal/errors.hpp"

namespace focal {

double eval_scalar(const TapeFn& f, const Tensor& point) {
  Tape tape;
  VarId p = tape.param(point);
  VarId loss = f(tape, p);
  const Tensor& v = tape.value(loss);
  if (v.size() != 1) throw shape_error("grad_check: function is not scalar-valued");
  return v[0];
}

double grad_check(const TapeFn& f, const Tensor& point, double step) {
  Tape tape;
  VarId p = tape.param(point);
  VarId loss = f(tape, p);
  if (tape.value(loss).size() != 1)
    throw shape_error("grad_check: function is not scalar-valued");
  tape.backward(loss);
  Tensor analytic = tape.grad(p);

  double max_err = 0.0;
  Tensor x = point;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = eval_scalar(f, x);
    x[i] = saved - step;
    const double down = eval_scalar(f, x);
    x[i] = saved;
    const double fd = (up - down) / (2.0 * step);
    const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace focal
