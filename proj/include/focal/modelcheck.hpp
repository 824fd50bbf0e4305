#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "focal/grad_check.hpp"

namespace focal {

struct ComponentGradReport {
  std::string component;
  double max_rel_error = 0.0;  // worst over parameter groups and points
};

struct ModelGradReport {
  std::vector<ComponentGradReport> components;
  double max_rel_error = 0.0;
  bool pass(double tol = 1e-5) const { return max_rel_error <= tol; }
  std::string to_text() const;
};

// Central finite-difference checks of every model component (COA, AOA
// single and multi meta-path, gated fusion, adaptive residual, ASL,
// consistency, full forward) on a small planted graph, each at `points`
// random parameter points.
ModelGradReport run_model_grad_checks(std::uint64_t seed, std::size_t points = 10);

}  // namespace focal
