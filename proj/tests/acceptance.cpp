// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fail. Statistical checks run at fixed seeds with the tolerances stated
// inline; inequality checks must hold on every trial.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "focal/graph_io.hpp"
#include "focal/modelcheck.hpp"
#include "focal/objective.hpp"
#include "focal/rng.hpp"
#include "focal/synthgen.hpp"
#include "focal/theoremlab.hpp"
#include "focal/trainer.hpp"

using namespace focal;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int number, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", number, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

bool check_named(const TheoremReport& rep, const std::string& name) {
  for (const TheoremCheck& c : rep.checks)
    if (c.name == name) return c.pass;
  return false;
}

double measured(const TheoremReport& rep, const std::string& name) {
  for (const TheoremCheck& c : rep.checks)
    if (c.name == name) return c.measured;
  return std::nan("");
}

// --- 1. Dilution law -------------------------------------------------
void criterion_dilution() {
  const auto t0 = Clock::now();
  DilutionTrialConfig pm;
  pm.seed = 3;
  pm.n_star = 4;
  pm.primary = LogitDistribution::point_mass(0.0);
  pm.secondary = LogitDistribution::point_mass(0.0);
  TheoremReport point_rep = verify_dilution(pm);

  DilutionTrialConfig nm;
  nm.seed = 3;
  nm.n_star = 4;
  nm.trials = 2000;
  nm.mean_rel_tol = 0.02;
  TheoremReport normal_rep = verify_dilution(nm);

  const double elapsed = seconds_since(t0);
  const bool pass = point_rep.pass && normal_rep.pass && elapsed < 30.0;
  report(1, "dilution law",
         pass,
         "point-mass exact (1e-12): " + std::string(point_rep.pass ? "ok" : "violated") +
             "; normal(0,1) mean within 2%: " + (normal_rep.pass ? "ok" : "violated") +
             "; slope " + fmt(measured(normal_rep, "loglog_slope")) + " in [-1.1,-0.9]; " +
             fmt(elapsed) + "s (< 30s)");
}

// --- 2. Gradient attenuation ----------------------------------------
void criterion_grad_attenuation() {
  GradAttenuationConfig cfg;
  cfg.trials = 10000;
  cfg.seed = 5;
  TheoremReport rep = verify_grad_attenuation(cfg);
  report(2, "gradient attenuation bound",
         check_named(rep, "grad_norm_bound_violations") && check_named(rep, "worst_margin"),
         "10^4 autodiff trials, violations " +
             fmt(measured(rep, "grad_norm_bound_violations")) + ", worst margin " +
             fmt(measured(rep, "worst_margin")) + " (<= 1e-9), m=1000/m=10 norm ratio " +
             fmt(measured(rep, "mean_norm_ratio_m1000_vs_m10")));
}

// --- 3. Multi-label loss bound ---------------------------------------
void criterion_loss_amplification() {
  LossAmplificationConfig cfg;
  cfg.trials = 10000;
  cfg.seed = 6;
  TheoremReport rep = verify_loss_amplification(cfg);
  report(3, "multi-label loss bound", rep.pass,
         "10^4 trials, violations " + fmt(measured(rep, "loss_bound_violations")) +
             ", worst margin " + fmt(measured(rep, "worst_margin")) +
             "; A*=0,b=0 equality to 1e-12: " +
             (check_named(rep, "zero_astar_equality") ? "ok" : "violated"));
}

// --- 4. Meta-path mass ------------------------------------------------
void criterion_metapath_mass() {
  MetapathMassConfig cfg;
  cfg.draws = 10000;
  cfg.seed = 7;
  TheoremReport rep = verify_metapath_mass(cfg);
  report(4, "meta-path semantic mass bound", rep.pass,
         "10^4 draws per |M| in {8..256}, violations " +
             fmt(measured(rep, "bstar_bound_violations")) + ", uniform case exact: " +
             (check_named(rep, "uniform_bstar_total8") ? "ok" : "violated"));
}

// --- 5. Loss floor ----------------------------------------------------
void criterion_loss_floor() {
  LossFloorConfig cfg;
  cfg.draws = 10000;
  cfg.seed = 8;
  TheoremReport rep = verify_loss_floor(cfg);
  report(5, "positive-loss floor", rep.pass,
         "10^4 draws per grid point, violations " + fmt(measured(rep, "floor_violations")) +
             "; B*=0 gives |P|log2 exactly: " +
             (check_named(rep, "zero_bstar_equality_p2") ? "ok" : "violated"));
}

// --- 6. FOCAL guarantees ----------------------------------------------
void criterion_focal_guarantees() {
  TheoremReport rep = verify_focal_guarantees(9);
  report(6, "FOCAL structural guarantees", rep.pass,
         "gate floor violations " + fmt(measured(rep, "gate_floor_violations")) +
             " (1000 nodes, 1e-12); AOA max diff after +3 relations/+2 meta-paths " +
             fmt(measured(rep, "aoa_max_abs_diff_after_augmentation")) +
             "; reachable sensitivity " + fmt(measured(rep, "reachable_sensitivity_fraction")) +
             " (>= 0.99); unreachable nonzero " +
             fmt(measured(rep, "unreachable_nonzero_count")));
}

// --- 7. Gradient checks -----------------------------------------------
void criterion_grad_checks() {
  ModelGradReport rep = run_model_grad_checks(11, 10);
  std::string worst;
  for (const ComponentGradReport& c : rep.components)
    worst += c.component + " " + fmt(c.max_rel_error) + "; ";
  report(7, "finite-difference gradient checks", rep.pass(1e-5),
         "10 points per component, max rel err " + fmt(rep.max_rel_error) + " (<= 1e-5): " +
             worst);
}

// --- 8. Metrics oracle -----------------------------------------------
MetricsReport oracle_metrics(const Tensor& yt, const Tensor& yp) {
  MetricsReport r;
  const std::size_t n = yt.rows(), C = yt.cols();
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t c = 0; c < C; ++c) {
    double ctp = 0, cfp = 0, cfn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (yt.at(i, c) == 1 && yp.at(i, c) == 1) ++ctp;
      if (yt.at(i, c) == 0 && yp.at(i, c) == 1) ++cfp;
      if (yt.at(i, c) == 1 && yp.at(i, c) == 0) ++cfn;
    }
    tp += ctp;
    fp += cfp;
    fn += cfn;
    r.macro_f1 += (2 * ctp + cfp + cfn) > 0 ? 2 * ctp / (2 * ctp + cfp + cfn) : 0.0;
    r.macro_precision += (ctp + cfp) > 0 ? ctp / (ctp + cfp) : 0.0;
    r.macro_recall += (ctp + cfn) > 0 ? ctp / (ctp + cfn) : 0.0;
  }
  r.macro_f1 /= C;
  r.macro_precision /= C;
  r.macro_recall /= C;
  r.micro_f1 = (2 * tp + fp + fn) > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
  r.micro_precision = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
  r.micro_recall = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
  double ham = 0, subset = 0, sf1 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool exact = true;
    double rtp = 0, rfp = 0, rfn = 0;
    for (std::size_t c = 0; c < C; ++c) {
      if (yt.at(i, c) != yp.at(i, c)) {
        ++ham;
        exact = false;
      }
      if (yt.at(i, c) == 1 && yp.at(i, c) == 1) ++rtp;
      if (yt.at(i, c) == 0 && yp.at(i, c) == 1) ++rfp;
      if (yt.at(i, c) == 1 && yp.at(i, c) == 0) ++rfn;
    }
    if (exact) ++subset;
    if (rtp + rfp + rfn == 0) sf1 += 1.0;
    else sf1 += 2 * rtp / (2 * rtp + rfp + rfn);
  }
  r.hamming_loss = ham / static_cast<double>(n * C);
  r.subset_accuracy = subset / static_cast<double>(n);
  r.sample_f1 = sf1 / static_cast<double>(n);
  return r;
}

void criterion_metrics_oracle() {
  SplitMix64 rng(12);
  std::size_t mismatches = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 1 + rng.next_below(32);
    const std::size_t c = 1 + rng.next_below(8);
    Tensor y(n, c), p(n, c);
    for (double& v : y.data()) v = rng.next_unit() < 0.35 ? 1.0 : 0.0;
    for (double& v : p.data()) v = rng.next_unit() < 0.35 ? 1.0 : 0.0;
    MetricsReport got = metrics(y, p);
    MetricsReport want = oracle_metrics(y, p);
    const bool same =
        got.micro_f1 == want.micro_f1 && got.macro_f1 == want.macro_f1 &&
        got.sample_f1 == want.sample_f1 && got.hamming_loss == want.hamming_loss &&
        got.subset_accuracy == want.subset_accuracy &&
        got.micro_precision == want.micro_precision &&
        got.macro_precision == want.macro_precision && got.micro_recall == want.micro_recall &&
        got.macro_recall == want.macro_recall;
    if (!same) ++mismatches;
  }
  report(8, "metrics vs brute-force confusion oracle", mismatches == 0,
         "1000 random (y, y-hat) pairs, exact mismatches " + fmt(double(mismatches)));
}

// --- 9. Planted benchmark --------------------------------------------
void criterion_planted_benchmark() {
  const auto t0 = Clock::now();

  // Noiseless recoverability.
  HetGraph clean = generate(planted_benchmark_synth(500, 0.0, 0.0, 1));
  FocalConfig clean_cfg = planted_benchmark_config(0);
  clean_cfg.max_epoch = 200;
  clean_cfg.patience = 200;
  const auto t_clean = Clock::now();
  TrainResult clean_res = train(clean, clean_cfg);
  const double clean_secs = seconds_since(t_clean);
  const double clean_train_micro =
      evaluate(clean_res.params, clean, clean_cfg, clean.splits.train).micro_f1;
  const bool clean_ok =
      clean_train_micro == 1.0 && clean_res.report.epochs_run <= 200 && clean_secs < 60.0;

  // Noisy ablation ordering over 3 seeds.
  HetGraph noisy = generate(planted_benchmark_synth(2000, 0.5, 0.1, 1));
  FocalConfig cfg = planted_benchmark_config(0);
  const std::vector<std::uint64_t> seeds = {0, 1, 2};
  AggregateMetrics full = multi_seed_train(noisy, cfg, seeds, AblationMode::kFull);
  AggregateMetrics coa = multi_seed_train(noisy, cfg, seeds, AblationMode::kCoaOnly);
  AggregateMetrics aoa = multi_seed_train(noisy, cfg, seeds, AblationMode::kAoaOnly);
  const double margin_coa = full.mean.micro_f1 - coa.mean.micro_f1;
  const double margin_aoa = full.mean.micro_f1 - aoa.mean.micro_f1;

  const double elapsed = seconds_since(t0);
  const bool pass =
      clean_ok && margin_coa >= 0.02 && margin_aoa >= 0.02 && elapsed < 300.0;
  report(9, "planted benchmark",
         pass,
         "noiseless train micro " + fmt(clean_train_micro) + " in " +
             fmt(double(clean_res.report.epochs_run)) + " epochs/" + fmt(clean_secs) +
             "s; noisy mean micro full " + fmt(full.mean.micro_f1) + " vs coa_only " +
             fmt(coa.mean.micro_f1) + " vs aoa_only " + fmt(aoa.mean.micro_f1) +
             " (margins " + fmt(margin_coa) + ", " + fmt(margin_aoa) + " >= 0.02); total " +
             fmt(elapsed) + "s (< 300s)");
}

// --- 10. Over-smoothing ----------------------------------------------
void criterion_oversmoothing() {
  const auto t0 = Clock::now();
  HetGraph g = generate(planted_benchmark_synth(2000, 0.5, 0.1, 1));
  FocalConfig cfg = planted_benchmark_config(0);
  cfg.lr = 0.003;
  cfg.max_epoch = 300;
  cfg.patience = 60;
  TheoremReport rep = run_oversmoothing(g, cfg, {2, 6});
  const double elapsed = seconds_since(t0);
  double full2 = rep.curves[0].y[0], full6 = rep.curves[0].y[1];
  double coa2 = rep.curves[1].y[0], coa6 = rep.curves[1].y[1];
  report(10, "over-smoothing resistance", rep.pass && elapsed < 600.0,
         "micro full " + fmt(full2) + "->" + fmt(full6) + " (drop " + fmt(full2 - full6) +
             "), coa_only " + fmt(coa2) + "->" + fmt(coa6) + " (drop " + fmt(coa2 - coa6) +
             "); full drop <= coa drop; " + fmt(elapsed) + "s (< 600s)");
}

// --- 11. Determinism ---------------------------------------------------
void criterion_determinism() {
  SynthConfig sc = planted_benchmark_synth(120, 0.4, 0.1, 21);
  HetGraph g1 = generate(sc);
  HetGraph g2 = generate(sc);
  bool graphs_same = g1.labels == g2.labels;
  for (std::size_t t = 0; t < g1.features.size() && graphs_same; ++t)
    graphs_same = g1.features[t] == g2.features[t];
  for (std::size_t r = 0; r < g1.relations.size() && graphs_same; ++r)
    graphs_same = g1.relations[r].edges == g2.relations[r].edges;

  FocalConfig cfg = planted_benchmark_config(4);
  cfg.max_epoch = 12;
  TrainResult a = train(g1, cfg);
  TrainResult b = train(g1, cfg);
  bool params_same = true;
  auto ra = param_refs(a.params);
  auto rb = param_refs(b.params);
  for (std::size_t i = 0; i < ra.size(); ++i)
    params_same = params_same && *ra[i].tensor == *rb[i].tensor;
  const bool metrics_same = a.report.test.to_text() == b.report.test.to_text() &&
                            a.report.history.size() == b.report.history.size();

  DilutionTrialConfig dc;
  dc.seed = 13;
  dc.m_values = {64, 128};
  dc.trials = 300;
  TheoremReport r1 = verify_dilution(dc);
  TheoremReport r2 = verify_dilution(dc);
  bool reports_same = r1.checks.size() == r2.checks.size();
  for (std::size_t i = 0; i < r1.checks.size() && reports_same; ++i)
    reports_same = r1.checks[i].measured == r2.checks[i].measured &&
                   r1.checks[i].pass == r2.checks[i].pass;

  report(11, "bit-exact determinism", graphs_same && params_same && metrics_same && reports_same,
         std::string("generator ") + (graphs_same ? "ok" : "differs") + ", trained parameters " +
             (params_same ? "ok" : "differ") + ", metrics " + (metrics_same ? "ok" : "differ") +
             ", theorem reports " + (reports_same ? "ok" : "differ"));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  criterion_dilution();
  criterion_grad_attenuation();
  criterion_loss_amplification();
  criterion_metapath_mass();
  criterion_loss_floor();
  criterion_focal_guarantees();
  criterion_grad_checks();
  criterion_metrics_oracle();
  criterion_planted_benchmark();
  criterion_oversmoothing();
  criterion_determinism();
  std::printf("%d/11 criteria passed in %.1fs\n", 11 - g_failures, seconds_since(t0));
  return g_failures == 0 ? 0 : 1;
}
