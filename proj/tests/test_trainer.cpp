#include <doctest.h>

#include <cmath>

#include "focal/errors.hpp"
#include "focal/synthgen.hpp"
#include "focal/theoremlab.hpp"
#include "focal/trainer.hpp"

using namespace focal;

TEST_SUITE_BEGIN("trainer");

namespace {

SynthConfig small_synth(std::uint64_t seed) {
  SynthConfig sc;
  sc.seed = seed;
  sc.num_targets = 60;
  sc.num_labels = 3;
  sc.primary_degree = 2;
  sc.secondary_degree = 5;
  sc.rare_rate = 0.1;
  sc.label_cardinality = 1.3;
  sc.feature_dim = 6;
  sc.noise_std = 0.3;
  return sc;
}

FocalConfig small_config(std::uint64_t seed) {
  FocalConfig cfg;
  cfg.hidden_dim = 8;
  cfg.out_dim = 8;
  cfg.num_layers = 2;
  cfg.coa_heads = 2;
  cfg.aoa_heads = 2;
  cfg.dropout = 0.0;
  cfg.lr = 0.01;
  cfg.max_epoch = 30;
  cfg.patience = 30;
  cfg.seed = seed;
  cfg.metapaths = synth_primary_metapaths();
  return cfg;
}

bool params_equal(const FocalParams& a, const FocalParams& b) {
  auto ra = param_refs(a);
  auto rb = param_refs(b);
  for (std::size_t i = 0; i < ra.size(); ++i)
    if (!(*ra[i].tensor == *rb[i].tensor)) return false;
  return true;
}

}  // namespace

TEST_CASE("adamw step matches a finite-difference-driven step on a 20-parameter toy") {
  SplitMix64 rng(71);
  Tensor theta(4, 5);
  for (double& v : theta.data()) v = rng.next_gaussian();
  Tensor proj(4, 5);
  for (double& v : proj.data()) v = rng.next_gaussian();

  auto loss_at = [&](const Tensor& t) {
    Tape tape;
    VarId x = tape.constant(t);
    return tape.value(tape.sum_all(tape.mul(tape.tanh_act(x), tape.constant(proj))))[0];
  };

  // analytic gradients
  Tape tape;
  VarId x = tape.param(theta);
  VarId loss = tape.sum_all(tape.mul(tape.tanh_act(x), tape.constant(proj)));
  tape.backward(loss);
  Tensor analytic = tape.grad(x);

  // central differences
  Tensor fd(4, 5);
  const double h = 1e-6;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    Tensor up = theta, down = theta;
    up[i] += h;
    down[i] -= h;
    fd[i] = (loss_at(up) - loss_at(down)) / (2.0 * h);
  }

  FocalParams pa, pb;
  pa.w_cls = theta;
  pa.b_cls = Tensor(1, 1);
  pb.w_cls = theta;
  pb.b_cls = Tensor(1, 1);
  auto refs_a = param_refs(pa);
  auto refs_b = param_refs(pb);
  AdamW opt_a(0.01, 0.0005), opt_b(0.01, 0.0005);
  opt_a.step(refs_a, {analytic, Tensor(1, 1)});
  opt_b.step(refs_b, {fd, Tensor(1, 1)});
  for (std::size_t i = 0; i < pa.w_cls.size(); ++i)
    CHECK(std::abs(pa.w_cls[i] - pb.w_cls[i]) <=
          1e-4 * std::max(1.0, std::abs(pa.w_cls[i])));
}

TEST_CASE("lr = 0 leaves parameters bit-identical") {
  HetGraph g = generate(small_synth(1));
  FocalConfig cfg = small_config(1);
  cfg.lr = 0.0;
  cfg.max_epoch = 3;
  ModelStructure s = build_structure(g, cfg);
  FocalParams init = init_params(cfg, g, s.primary_paths.size(), cfg.seed);
  TrainResult res = train(g, cfg);
  CHECK(params_equal(res.params, init));
}

TEST_CASE("same seed gives bit-identical parameters and report") {
  HetGraph g = generate(small_synth(2));
  FocalConfig cfg = small_config(2);
  cfg.max_epoch = 8;
  cfg.dropout = 0.5;  // exercise the dropout path too
  TrainResult a = train(g, cfg);
  TrainResult b = train(g, cfg);
  CHECK(params_equal(a.params, b.params));
  REQUIRE(a.report.history.size() == b.report.history.size());
  for (std::size_t e = 0; e < a.report.history.size(); ++e) {
    CHECK(a.report.history[e].train_loss == b.report.history[e].train_loss);
    CHECK(a.report.history[e].val.micro_f1 == b.report.history[e].val.micro_f1);
  }
  CHECK(a.report.best_epoch == b.report.best_epoch);
  CHECK(a.report.test.to_text() == b.report.test.to_text());
}

TEST_CASE("noiseless planted graph reaches train Micro-F1 = 1.0") {
  SynthConfig sc = small_synth(3);
  sc.num_targets = 100;
  sc.noise_std = 0.0;
  sc.rare_rate = 0.0;
  sc.secondary_degree = 8;
  HetGraph g = generate(sc);
  FocalConfig cfg = small_config(3);
  cfg.max_epoch = 200;
  cfg.patience = 200;
  TrainResult res = train(g, cfg);
  MetricsReport on_train = evaluate(res.params, g, cfg, g.splits.train);
  CHECK(on_train.micro_f1 == 1.0);
  CHECK(res.report.epochs_run <= 200);
}

TEST_CASE("evaluate: empty split is an error and evaluation has no side effects") {
  HetGraph g = generate(small_synth(4));
  FocalConfig cfg = small_config(4);
  ModelStructure s = build_structure(g, cfg);
  FocalParams p = init_params(cfg, g, s.primary_paths.size(), 11);
  FocalParams copy = p;
  CHECK_THROWS_AS(evaluate(p, g, cfg, {}), validation_error);
  MetricsReport r1 = evaluate(p, g, cfg, g.splits.val);
  CHECK(params_equal(p, copy));
  MetricsReport r2 = evaluate(p, g, cfg, g.splits.val);
  CHECK(r1.to_text() == r2.to_text());
}

TEST_CASE("early stopping reports the max validation Micro-F1 over epochs run") {
  HetGraph g = generate(small_synth(5));
  FocalConfig cfg = small_config(5);
  cfg.max_epoch = 25;
  cfg.patience = 5;
  TrainResult res = train(g, cfg);
  double best = -1.0;
  for (const EpochRecord& r : res.report.history) best = std::max(best, r.val.micro_f1);
  CHECK(res.report.best_val_micro_f1 == best);
  CHECK(res.report.best_epoch < res.report.epochs_run);
  CHECK(res.report.epochs_run <= cfg.max_epoch);
}

TEST_CASE("coa_only ablation never touches AOA parameters") {
  HetGraph g = generate(small_synth(6));
  FocalConfig cfg = small_config(6);
  ModelStructure s = build_structure(g, cfg);
  FocalParams p = init_params(cfg, g, s.primary_paths.size(), 13);

  Tape tape;
  FocalParamVars vars = bind_params(tape, p);
  ForwardOptions opt;
  opt.mode = AblationMode::kCoaOnly;
  ForwardResult fwd = focal_forward(tape, vars, s, g, cfg, opt);
  VarId loss = asl_loss(tape, fwd.logits, g.labels, cfg.asl);
  tape.backward(loss);
  for (const AoaLayerVars& layer : vars.aoa) {
    for (const AoaPathVars& path : layer.paths) {
      for (VarId w : path.w)
        for (double v : tape.grad(w).data()) CHECK(v == 0.0);
      for (VarId a : path.attn)
        for (double v : tape.grad(a).data()) CHECK(v == 0.0);
    }
    for (double v : tape.grad(layer.w_sem).data()) CHECK(v == 0.0);
  }
  // and symmetrically, aoa_only leaves COA parameters untouched
  Tape tape2;
  FocalParamVars vars2 = bind_params(tape2, p);
  ForwardOptions opt2;
  opt2.mode = AblationMode::kAoaOnly;
  ForwardResult fwd2 = focal_forward(tape2, vars2, s, g, cfg, opt2);
  VarId loss2 = asl_loss(tape2, fwd2.logits, g.labels, cfg.asl);
  tape2.backward(loss2);
  for (const CoaLayerVars& layer : vars2.coa)
    for (VarId w : layer.w_q)
      for (double v : tape2.grad(w).data()) CHECK(v == 0.0);
}

TEST_CASE("ablation mode strings") {
  CHECK(ablation_mode_from_string("full") == AblationMode::kFull);
  CHECK(ablation_mode_from_string("coa_only") == AblationMode::kCoaOnly);
  CHECK(ablation_mode_from_string("aoa_only") == AblationMode::kAoaOnly);
  CHECK_THROWS_AS(ablation_mode_from_string("bogus"), validation_error);
}

TEST_CASE("aggregate_metrics: hand case {0.6, 0.7} and zero spread for equal runs") {
  SeedRun a{0, {}}, b{1, {}};
  a.test.micro_f1 = 0.6;
  b.test.micro_f1 = 0.7;
  AggregateMetrics agg = aggregate_metrics({a, b});
  CHECK(agg.mean.micro_f1 == doctest::Approx(0.65).epsilon(1e-15));
  CHECK(agg.stddev.micro_f1 == doctest::Approx(0.07071067811865475).epsilon(1e-12));

  AggregateMetrics same = aggregate_metrics({a, a, a});
  CHECK(same.stddev.micro_f1 == 0.0);
  CHECK(same.mean.micro_f1 == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("multi-seed training aggregates deterministically") {
  HetGraph g = generate(small_synth(7));
  FocalConfig cfg = small_config(7);
  cfg.max_epoch = 5;
  AggregateMetrics agg1 = multi_seed_train(g, cfg, {0, 1}, AblationMode::kFull, 1);
  AggregateMetrics agg2 = multi_seed_train(g, cfg, {0, 1}, AblationMode::kFull, 2);
  CHECK(agg1.mean.micro_f1 == agg2.mean.micro_f1);
  CHECK(agg1.stddev.micro_f1 == agg2.stddev.micro_f1);
  CHECK_THROWS_AS(multi_seed_train(g, cfg, {0}, AblationMode::kFull, 1), validation_error);
}

TEST_CASE("mini-batched mode with fanout sampling stays deterministic") {
  SynthConfig sc = small_synth(8);
  sc.num_targets = 40;
  HetGraph g = generate(sc);
  FocalConfig cfg = small_config(8);
  cfg.batch_size = 8;  // forces batching: 28 train nodes > 8
  cfg.fanout = 3;
  cfg.max_epoch = 4;
  TrainResult a = train(g, cfg);
  TrainResult b = train(g, cfg);
  CHECK(params_equal(a.params, b.params));
  CHECK(a.report.history.back().train_loss == b.report.history.back().train_loss);
}

TEST_CASE("divergence raises a numeric error naming the epoch") {
  HetGraph g = generate(small_synth(9));
  g.features[0].at(0, 0) = 1e300;  // finite, but the first dot product overflows
  FocalConfig cfg = small_config(9);
  CHECK_THROWS_WITH_AS(train(g, cfg), doctest::Contains("epoch 0"), numeric_error);
}

TEST_CASE("train rejects empty splits") {
  HetGraph g = generate(small_synth(10));
  g.splits.val.clear();
  FocalConfig cfg = small_config(10);
  CHECK_THROWS_AS(train(g, cfg), validation_error);
}

TEST_SUITE_END();
