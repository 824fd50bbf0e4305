#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "focal/config.hpp"
#include "focal/hetgraph.hpp"
#include "focal/model.hpp"
#include "focal/rng.hpp"

namespace focal {

// Logit distribution for dilution trials. Closed-form E[e^X] exists for the
// three supported families; anything else is rejected by parse().
struct LogitDistribution {
  enum class Kind { kPointMass, kNormal, kUniform };
  Kind kind = Kind::kPointMass;
  double a = 0.0, b = 0.0;  // point_mass(c) | normal(mu, sigma) | uniform(lo, hi)

  static LogitDistribution point_mass(double c);
  static LogitDistribution normal(double mu, double sigma);
  static LogitDistribution uniform(double lo, double hi);
  static LogitDistribution parse(const std::string& spec);  // e.g. "normal(0,1)"

  double sample(SplitMix64& rng) const;
  double mean_exp() const;  // E[exp(X)]
  std::string to_string() const;
};

struct DilutionTrialConfig {
  std::size_t n_star = 4;
  std::vector<std::size_t> m_values = {256, 512, 1024, 2048, 4096};  // ascending
  LogitDistribution primary = LogitDistribution::normal(0, 1);
  LogitDistribution secondary = LogitDistribution::normal(0, 1);
  std::size_t trials = 2000;
  std::uint64_t seed = 0;
  // Negative control: adds drift * ln(m) to every secondary logit, breaking
  // the fixed-mean assumption; the fit must then fail.
  double secondary_drift = 0.0;
  double mean_rel_tol = 0.02;

  void validate() const;
};

struct TheoremCheck {
  std::string name;
  double measured = 0.0;
  double reference = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct TheoremCurve {
  std::string name;
  std::vector<double> x, y;
};

struct TheoremReport {
  std::string theorem;
  std::vector<TheoremCheck> checks;
  std::vector<TheoremCurve> curves;
  bool pass = false;  // conjunction of all checks
  double runtime_seconds = 0.0;  // excluded from determinism comparisons

  std::string to_text() const;
  void finalize();  // sets pass from checks
};

// Monte-Carlo mean of the primary attention mass A* against
// n* mu* / (n* mu* + m mu), plus the log-log decay slope.
TheoremReport verify_dilution(const DilutionTrialConfig& cfg);

struct GradAttenuationConfig {
  std::size_t trials = 10000;
  std::size_t trend_trials = 1000;
  std::uint64_t seed = 0;
};

// Autodiff gradient norm w.r.t. the primary messages of a one-step
// attention aggregator with a positive-label BCE head, against C * L * A*.
TheoremReport verify_grad_attenuation(const GradAttenuationConfig& cfg);

struct LossAmplificationConfig {
  std::size_t trials = 10000;
  std::uint64_t seed = 0;
};

// Positive-label BCE >= L * (-log sigmoid(a M A* + b)).
TheoremReport verify_loss_amplification(const LossAmplificationConfig& cfg);

struct MetapathMassConfig {
  std::vector<std::size_t> m_total = {8, 16, 32, 64, 128, 256};
  std::size_t m_star = 2;
  std::size_t draws = 10000;
  std::uint64_t seed = 0;
};

// Semantic mass B* against (e^{s_hi - s_lo} / c) * |M*| / |M| with the
// bound constants read off each draw.
TheoremReport verify_metapath_mass(const MetapathMassConfig& cfg);

struct LossFloorConfig {
  std::vector<double> bstar_grid = {0.0, 0.05, 0.1, 0.25, 0.5, 1.0};
  std::vector<std::size_t> positives_grid = {1, 2, 4, 8};
  double w_bound = 1.0;
  double h_bound = 1.0;
  std::size_t feature_dim = 8;
  std::size_t draws = 10000;
  std::uint64_t seed = 0;
};

// Positive loss >= |P| log 2 - (|P|/2) W H B*.
TheoremReport verify_loss_floor(const LossFloorConfig& cfg);

// Gate floor, AOA invariance under added secondary relations/meta-paths,
// and finite-difference dependency coverage, on the given graph and
// parameters (random parameters are fine; the statements are structural).
TheoremReport verify_focal_guarantees(const HetGraph& g, const FocalConfig& cfg,
                                      const FocalParams& params, std::uint64_t seed);

// Convenience overload: builds a small planted graph and random parameters.
TheoremReport verify_focal_guarantees(std::uint64_t seed);

// Trains full FOCAL and the coverage-only ablation at each depth with the
// same seed and compares the Micro-F1 drop from the shallowest to the
// deepest setting.
TheoremReport run_oversmoothing(const HetGraph& g, const FocalConfig& cfg,
                                const std::vector<std::size_t>& depths);

// Shared planted-benchmark settings used by the ablation and
// over-smoothing experiments (and the CLI defaults).
SynthConfig planted_benchmark_synth(std::size_t num_targets, double noise_std, double rare_rate,
                                    std::uint64_t seed);
FocalConfig planted_benchmark_config(std::uint64_t seed);

}  // namespace focal
