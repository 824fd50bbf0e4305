#include "focal/modelcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "focal/model.hpp"
#include "focal/objective.hpp"
#include "focal/synthgen.hpp"

namespace focal {

namespace {

// Small planted graph with two primary meta-paths (the planted 2-step
// path plus its 1-step prefix) so the multi-path branch is exercised.
struct CheckFixture {
  HetGraph g;
  FocalConfig cfg;
  ModelStructure s;

  explicit CheckFixture(std::uint64_t seed) {
    SynthConfig sc;
    sc.seed = seed;
    sc.num_targets = 5;
    sc.num_labels = 2;
    sc.primary_degree = 2.0;
    sc.secondary_degree = 2.0;
    sc.rare_rate = 0.3;
    sc.label_cardinality = 1.2;
    sc.feature_dim = 3;
    sc.noise_std = 0.4;
    g = generate(sc);

    cfg.hidden_dim = 4;
    cfg.out_dim = 4;
    cfg.num_layers = 2;
    cfg.coa_heads = 2;
    cfg.aoa_heads = 2;
    cfg.dropout = 0.0;
    cfg.lambda = 0.05;
    cfg.metapaths = {{kSynthTargetToAnchor, kSynthAnchorToTarget}, {kSynthTargetToAnchor}};
    s = build_structure(g, cfg);
  }
};

Tensor random_tensor(std::size_t rows, std::size_t cols, SplitMix64& rng, double scale = 0.6) {
  Tensor t(rows, cols);
  for (double& v : t.data()) v = scale * rng.next_gaussian();
  return t;
}

// Checks a function of several tensors by treating each tensor in turn as
// the differentiated parameter while the others stay at their point values.
double check_groups(const std::vector<Tensor>& point,
                    const std::function<VarId(Tape&, const std::vector<VarId>&)>& build) {
  double worst = 0.0;
  for (std::size_t j = 0; j < point.size(); ++j) {
    auto fn = [&, j](Tape& tape, VarId var) {
      std::vector<VarId> vars;
      for (std::size_t i = 0; i < point.size(); ++i)
        vars.push_back(i == j ? var : tape.constant(point[i]));
      return build(tape, vars);
    };
    worst = std::max(worst, grad_check(fn, point[j]));
  }
  return worst;
}

// Random fixed projection turning an n x d output into a scalar.
VarId project_to_scalar(Tape& tape, VarId x, const Tensor& proj) {
  return tape.sum_all(tape.mul(x, tape.constant(proj)));
}

double check_coa(const CheckFixture& fx, SplitMix64& rng) {
  const std::size_t d = fx.cfg.hidden_dim;
  const std::size_t dh = d / fx.cfg.coa_heads;
  Tensor h_prev = random_tensor(fx.s.n_total, d, rng);
  Tensor proj = random_tensor(fx.s.n_total, d, rng);
  std::vector<Tensor> point;
  for (std::size_t i = 0; i < fx.cfg.coa_heads; ++i) {
    point.push_back(random_tensor(d, dh, rng));
    point.push_back(random_tensor(d, dh, rng));
    point.push_back(random_tensor(d, dh, rng));
  }
  point.push_back(random_tensor(fx.g.num_relations(), fx.cfg.coa_heads, rng));
  return check_groups(point, [&](Tape& tape, const std::vector<VarId>& vars) {
    CoaLayerVars cv;
    for (std::size_t i = 0; i < fx.cfg.coa_heads; ++i) {
      cv.w_q.push_back(vars[3 * i]);
      cv.w_k.push_back(vars[3 * i + 1]);
      cv.w_v.push_back(vars[3 * i + 2]);
    }
    cv.rho = vars.back();
    VarId h = tape.constant(h_prev);
    return project_to_scalar(tape, coa_layer(tape, cv, h, fx.s, fx.cfg.coa_heads).h, proj);
  });
}

double check_aoa_single(const CheckFixture& fx, SplitMix64& rng) {
  const std::size_t d = fx.cfg.hidden_dim;
  const std::size_t dh = d / fx.cfg.aoa_heads;
  Tensor h_prev = random_tensor(fx.s.n_total, d, rng);
  Tensor proj = random_tensor(fx.s.n_total, d, rng);
  std::vector<Tensor> point;
  for (std::size_t i = 0; i < fx.cfg.aoa_heads; ++i) {
    point.push_back(random_tensor(d, dh, rng));
    point.push_back(random_tensor(2 * dh, 1, rng));
  }
  return check_groups(point, [&](Tape& tape, const std::vector<VarId>& vars) {
    AoaPathVars pv;
    for (std::size_t i = 0; i < fx.cfg.aoa_heads; ++i) {
      pv.w.push_back(vars[2 * i]);
      pv.attn.push_back(vars[2 * i + 1]);
    }
    VarId h = tape.constant(h_prev);
    return project_to_scalar(
        tape,
        aoa_path_layer(tape, pv, h, fx.s.paths[0], fx.s.n_total, fx.cfg.aoa_heads,
                       fx.cfg.leaky_slope)
            .z,
        proj);
  });
}

double check_aoa_multi(const CheckFixture& fx, SplitMix64& rng) {
  const std::size_t d = fx.cfg.hidden_dim;
  const std::size_t dh = d / fx.cfg.aoa_heads;
  Tensor h_prev = random_tensor(fx.s.n_total, d, rng);
  Tensor proj = random_tensor(fx.s.n_total, d, rng);
  std::vector<Tensor> point;
  for (std::size_t p = 0; p < fx.s.paths.size(); ++p)
    for (std::size_t i = 0; i < fx.cfg.aoa_heads; ++i) {
      point.push_back(random_tensor(d, dh, rng));
      point.push_back(random_tensor(2 * dh, 1, rng));
    }
  point.push_back(random_tensor(d, d, rng));
  point.push_back(random_tensor(1, d, rng));
  point.push_back(random_tensor(d, 1, rng));
  return check_groups(point, [&](Tape& tape, const std::vector<VarId>& vars) {
    AoaLayerVars av;
    std::size_t k = 0;
    for (std::size_t p = 0; p < fx.s.paths.size(); ++p) {
      AoaPathVars pv;
      for (std::size_t i = 0; i < fx.cfg.aoa_heads; ++i) {
        pv.w.push_back(vars[k++]);
        pv.attn.push_back(vars[k++]);
      }
      av.paths.push_back(std::move(pv));
    }
    av.w_sem = vars[k++];
    av.b_sem = vars[k++];
    av.q_sem = vars[k++];
    VarId h = tape.constant(h_prev);
    return project_to_scalar(
        tape, aoa_layer(tape, av, h, fx.s, fx.cfg.aoa_heads, fx.cfg.leaky_slope).h, proj);
  });
}

double check_fusion(const CheckFixture& fx, SplitMix64& rng) {
  const std::size_t d = fx.cfg.hidden_dim;
  const std::size_t n = fx.s.n_total;
  Tensor h_coa = random_tensor(n, d, rng);
  Tensor h_aoa = random_tensor(n, d, rng);
  Tensor proj = random_tensor(n, d, rng);
  std::vector<Tensor> point = {random_tensor(2 * d, d, rng), random_tensor(1, d, rng),
                               random_tensor(2 * d, d, rng), random_tensor(1, d, rng)};
  return check_groups(point, [&](Tape& tape, const std::vector<VarId>& vars) {
    VarId hc = tape.constant(h_coa);
    VarId ha = tape.constant(h_aoa);
    VarId cat = tape.concat_cols({hc, ha});
    VarId g1 = tape.sigmoid(tape.add_rowvec(tape.matmul(cat, vars[0]), vars[1]));
    VarId g2 = tape.sigmoid(tape.add_rowvec(tape.matmul(cat, vars[2]), vars[3]));
    return project_to_scalar(tape, fuse(tape, g1, g2, hc, ha), proj);
  });
}

double check_residual(const CheckFixture& fx, SplitMix64& rng) {
  const std::size_t d = fx.cfg.hidden_dim;
  const std::size_t n = fx.s.n_total;
  Tensor h_fuse = random_tensor(n, d, rng);
  Tensor h_prev = random_tensor(n, d, rng);
  Tensor proj = random_tensor(n, d, rng);
  std::vector<Tensor> point = {random_tensor(2 * d, d, rng), random_tensor(1, d, rng)};
  return check_groups(point, [&](Tape& tape, const std::vector<VarId>& vars) {
    VarId hf = tape.constant(h_fuse);
    VarId hp = tape.constant(h_prev);
    return project_to_scalar(tape, adaptive_residual(tape, hf, hp, vars[0], vars[1]), proj);
  });
}

double check_asl(const CheckFixture& fx, SplitMix64& rng) {
  const std::size_t n = 6, C = 3;
  Tensor labels(n, C);
  for (double& v : labels.data()) v = rng.next_unit() < 0.4 ? 1.0 : 0.0;
  std::vector<Tensor> point = {random_tensor(n, C, rng, 1.5)};
  return check_groups(point, [&](Tape& tape, const std::vector<VarId>& vars) {
    return asl_loss(tape, vars[0], labels, fx.cfg.asl);
  });
}

double check_consistency(const CheckFixture&, SplitMix64& rng) {
  const std::size_t n = 6, d = 4;
  std::vector<Tensor> point = {random_tensor(n, d, rng), random_tensor(n, d, rng)};
  return check_groups(point, [&](Tape& tape, const std::vector<VarId>& vars) {
    return consistency_loss(tape, vars[0], vars[1]);
  });
}

double check_full_forward(const CheckFixture& fx, std::uint64_t point_seed) {
  FocalParams params = init_params(fx.cfg, fx.g, fx.s.paths.size(), point_seed);
  auto refs = param_refs(params);
  std::vector<Tensor> point;
  for (const ParamRef& r : refs) point.push_back(*r.tensor);

  return check_groups(point, [&](Tape& tape, const std::vector<VarId>& vars) {
    FocalParamVars pv;
    std::size_t k = 0;
    for (std::size_t t = 0; t < params.input_proj.size(); ++t) pv.input_proj.push_back(vars[k++]);
    for (std::size_t l = 0; l < params.coa.size(); ++l) {
      CoaLayerVars cv;
      for (std::size_t i = 0; i < params.coa[l].w_q.size(); ++i) {
        cv.w_q.push_back(vars[k++]);
        cv.w_k.push_back(vars[k++]);
        cv.w_v.push_back(vars[k++]);
      }
      cv.rho = vars[k++];
      pv.coa.push_back(std::move(cv));
    }
    for (std::size_t l = 0; l < params.aoa.size(); ++l) {
      AoaLayerVars av;
      for (std::size_t p = 0; p < params.aoa[l].paths.size(); ++p) {
        AoaPathVars pathv;
        for (std::size_t i = 0; i < params.aoa[l].paths[p].w.size(); ++i) {
          pathv.w.push_back(vars[k++]);
          pathv.attn.push_back(vars[k++]);
        }
        av.paths.push_back(std::move(pathv));
      }
      av.w_sem = vars[k++];
      av.b_sem = vars[k++];
      av.q_sem = vars[k++];
      pv.aoa.push_back(std::move(av));
    }
    for (std::size_t l = 0; l < params.fusion.size(); ++l) {
      FusionLayerVars fv;
      fv.w_g1 = vars[k++];
      fv.b_g1 = vars[k++];
      fv.w_g2 = vars[k++];
      fv.b_g2 = vars[k++];
      fv.w_alpha = vars[k++];
      fv.b_alpha = vars[k++];
      pv.fusion.push_back(std::move(fv));
    }
    pv.w_cls = vars[k++];
    pv.b_cls = vars[k++];

    ForwardResult fwd = focal_forward(tape, pv, fx.s, fx.g, fx.cfg, {});
    VarId loss = asl_loss(tape, fwd.logits, fx.g.labels, fx.cfg.asl);
    VarId consist = consistency_loss(tape, fwd.h_coa_final, fwd.h_aoa_final);
    return total_loss(tape, loss, consist, fx.cfg.lambda);
  });
}

}  // namespace

std::string ModelGradReport::to_text() const {
  std::ostringstream os;
  for (const ComponentGradReport& c : components)
    os << c.component << " max_rel_error " << c.max_rel_error << "\n";
  os << "overall max_rel_error " << max_rel_error << "\n";
  return os.str();
}

ModelGradReport run_model_grad_checks(std::uint64_t seed, std::size_t points) {
  CheckFixture fx(seed);
  ModelGradReport rep;
  struct Entry {
    const char* name;
    std::function<double(const CheckFixture&, SplitMix64&)> fn;
  };
  const std::vector<Entry> entries = {
      {"coa", check_coa},
      {"aoa_single", check_aoa_single},
      {"aoa_multi", check_aoa_multi},
      {"fusion", check_fusion},
      {"residual", check_residual},
      {"asl", check_asl},
      {"consistency", check_consistency},
  };
  for (const Entry& e : entries) {
    ComponentGradReport c;
    c.component = e.name;
    for (std::size_t p = 0; p < points; ++p) {
      SplitMix64 rng = rng_stream(seed, 33, p);
      c.max_rel_error = std::max(c.max_rel_error, e.fn(fx, rng));
    }
    rep.max_rel_error = std::max(rep.max_rel_error, c.max_rel_error);
    rep.components.push_back(c);
  }
  {
    ComponentGradReport c;
    c.component = "full_forward";
    for (std::size_t p = 0; p < points; ++p)
      c.max_rel_error = std::max(c.max_rel_error, check_full_forward(fx, seed + 1000 + p));
    rep.max_rel_error = std::max(rep.max_rel_error, c.max_rel_error);
    rep.components.push_back(c);
  }
  return rep;
}

}  // namespace focal
