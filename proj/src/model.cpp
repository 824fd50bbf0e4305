#include "focal/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "focal/errors.hpp"
#include "focal/graph_io.hpp"

namespace focal {

namespace {

constexpr double kMuEpsilon = 1e-4;

enum Stream : std::uint64_t {
  kStreamInit = 7,
  kStreamDropout = 8,
  kStreamFanout = 9,
};

void xavier_fill(Tensor& w, SplitMix64& rng) {
  const double bound =
      std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (double& v : w.data()) v = rng.next_uniform(-bound, bound);
}

}  // namespace

std::vector<ParamRef> param_refs(FocalParams& p) {
  std::vector<ParamRef> refs;
  for (std::size_t t = 0; t < p.input_proj.size(); ++t)
    refs.push_back({"proj." + std::to_string(t), &p.input_proj[t]});
  for (std::size_t l = 0; l < p.coa.size(); ++l) {
    CoaLayerParams& c = p.coa[l];
    const std::string base = "coa." + std::to_string(l);
    for (std::size_t i = 0; i < c.w_q.size(); ++i) {
      refs.push_back({base + ".h" + std::to_string(i) + ".wq", &c.w_q[i]});
      refs.push_back({base + ".h" + std::to_string(i) + ".wk", &c.w_k[i]});
      refs.push_back({base + ".h" + std::to_string(i) + ".wv", &c.w_v[i]});
    }
    refs.push_back({base + ".rho", &c.rho});
  }
  for (std::size_t l = 0; l < p.aoa.size(); ++l) {
    AoaLayerParams& a = p.aoa[l];
    const std::string base = "aoa." + std::to_string(l);
    for (std::size_t pi = 0; pi < a.paths.size(); ++pi) {
      for (std::size_t i = 0; i < a.paths[pi].w.size(); ++i) {
        const std::string hb =
            base + ".p" + std::to_string(pi) + ".h" + std::to_string(i);
        refs.push_back({hb + ".w", &a.paths[pi].w[i]});
        refs.push_back({hb + ".a", &a.paths[pi].attn[i]});
      }
    }
    refs.push_back({base + ".wsem", &a.w_sem});
    refs.push_back({base + ".bsem", &a.b_sem});
    refs.push_back({base + ".qsem", &a.q_sem});
  }
  for (std::size_t l = 0; l < p.fusion.size(); ++l) {
    FusionLayerParams& f = p.fusion[l];
    const std::string base = "fusion." + std::to_string(l);
    refs.push_back({base + ".wg1", &f.w_g1});
    refs.push_back({base + ".bg1", &f.b_g1});
    refs.push_back({base + ".wg2", &f.w_g2});
    refs.push_back({base + ".bg2", &f.b_g2});
    refs.push_back({base + ".walpha", &f.w_alpha});
    refs.push_back({base + ".balpha", &f.b_alpha});
  }
  refs.push_back({"cls.w", &p.w_cls});
  refs.push_back({"cls.b", &p.b_cls});
  return refs;
}

std::vector<ParamRef> param_refs(const FocalParams& p) {
  return param_refs(const_cast<FocalParams&>(p));
}

FocalParams init_params(const FocalConfig& cfg, const HetGraph& g,
                        std::size_t num_primary_paths, std::uint64_t seed) {
  cfg.validate();
  if (num_primary_paths == 0) throw validation_error("init_params: no primary meta-paths");
  const std::size_t d = cfg.hidden_dim;
  const std::size_t dh_coa = d / cfg.coa_heads;
  const std::size_t dh_aoa = d / cfg.aoa_heads;
  const std::size_t R = g.num_relations();
  const std::size_t C = g.num_classes();

  FocalParams p;
  for (std::size_t t = 0; t < g.num_node_types(); ++t)
    p.input_proj.emplace_back(g.features[t].cols(), d);
  p.coa.resize(cfg.num_layers);
  p.aoa.resize(cfg.num_layers);
  p.fusion.resize(cfg.num_layers);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    CoaLayerParams& c = p.coa[l];
    for (std::size_t i = 0; i < cfg.coa_heads; ++i) {
      c.w_q.emplace_back(d, dh_coa);
      c.w_k.emplace_back(d, dh_coa);
      c.w_v.emplace_back(d, dh_coa);
    }
    c.rho = Tensor(R, cfg.coa_heads);
    AoaLayerParams& a = p.aoa[l];
    a.paths.resize(num_primary_paths);
    for (AoaPathParams& path : a.paths)
      for (std::size_t i = 0; i < cfg.aoa_heads; ++i) {
        path.w.emplace_back(d, dh_aoa);
        path.attn.emplace_back(2 * dh_aoa, 1);
      }
    a.w_sem = Tensor(d, d);
    a.b_sem = Tensor(1, d);
    a.q_sem = Tensor(d, 1);
    FusionLayerParams& f = p.fusion[l];
    f.w_g1 = Tensor(2 * d, d);
    f.b_g1 = Tensor(1, d);
    f.w_g2 = Tensor(2 * d, d);
    f.b_g2 = Tensor(1, d);
    f.w_alpha = Tensor(2 * d, d);
    f.b_alpha = Tensor(1, d);
  }
  p.w_cls = Tensor(d, C);
  p.b_cls = Tensor(1, C);

  // Weight matrices Xavier-uniform, biases and relation reweights zero.
  auto refs = param_refs(p);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const std::string& name = refs[i].name;
    const bool is_bias = name.find(".b") != std::string::npos || name == "cls.b" ||
                         name.find(".rho") != std::string::npos;
    if (is_bias) continue;
    SplitMix64 rng = rng_stream(seed, kStreamInit, i);
    xavier_fill(*refs[i].tensor, rng);
  }
  return p;
}

void save_params(const FocalParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path);
  auto refs = param_refs(p);
  out << "format_version: 1\n";
  out << "params: " << refs.size() << "\n";
  for (const ParamRef& r : refs) {
    out << r.name << " " << r.tensor->rows() << " " << r.tensor->cols() << "\n";
    for (std::size_t row = 0; row < r.tensor->rows(); ++row) {
      for (std::size_t c = 0; c < r.tensor->cols(); ++c) {
        if (c) out << " ";
        out << format_double(r.tensor->at(row, c));
      }
      out << "\n";
    }
  }
  if (!out) throw io_error("write failed: " + path);
}

void load_params(FocalParams& p, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open for reading: " + path);
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw parse_error("params file: unexpected end: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };
  next_line();
  if (line != "format_version: 1") throw parse_error("params file: bad version header");
  next_line();
  auto refs = param_refs(p);
  if (line != "params: " + std::to_string(refs.size()))
    throw parse_error("params file: parameter count mismatch (got '" + line + "')");
  for (ParamRef& r : refs) {
    next_line();
    std::istringstream hs(line);
    std::string name;
    std::size_t rows = 0, cols = 0;
    hs >> name >> rows >> cols;
    if (name != r.name || rows != r.tensor->rows() || cols != r.tensor->cols())
      throw parse_error("params file: expected '" + r.name + " " +
                        std::to_string(r.tensor->rows()) + " " +
                        std::to_string(r.tensor->cols()) + "', got '" + line + "'");
    for (std::size_t row = 0; row < rows; ++row) {
      next_line();
      std::istringstream vs(line);
      std::string tok;
      for (std::size_t c = 0; c < cols; ++c) {
        if (!(vs >> tok)) throw parse_error("params file: short row in " + r.name);
        r.tensor->at(row, c) = parse_double(tok);
      }
    }
  }
}

ModelStructure build_structure(const HetGraph& g, const FocalConfig& cfg,
                               std::size_t fanout_cap, std::uint64_t fanout_seed) {
  ModelStructure s;
  s.n_total = g.total_nodes();
  s.n_targets = g.num_targets();
  s.target_offset = g.type_offset(g.target_type);

  // Resolve meta-paths; AOA anchors only on the primary ones.
  std::vector<MetaPath> all_paths;
  for (const auto& names : cfg.metapaths) all_paths.push_back(make_metapath(g, names));
  for (MetaPath& p : all_paths)
    if (p.primary(g)) s.primary_paths.push_back(std::move(p));
  if (s.primary_paths.empty())
    throw validation_error("no primary meta-path configured (every path uses a secondary relation)");

  // Coverage pairs in relation-major, stored-edge order.
  for (RelationTypeId r = 0; r < g.num_relations(); ++r) {
    const Relation& rel = g.relations[r];
    const std::size_t src_off = g.type_offset(rel.src_type);
    const std::size_t dst_off = g.type_offset(rel.dst_type);
    if (fanout_cap == 0) {
      for (const auto& e : rel.edges) {
        s.cov_src.push_back(src_off + e.first);
        s.cov_dst.push_back(dst_off + e.second);
        s.cov_rel.push_back(r);
        s.cov_self_fallback.push_back(false);
      }
    } else {
      // Per-destination cap, sampled without replacement.
      std::vector<std::vector<std::size_t>> by_dst(g.node_counts[rel.dst_type]);
      for (std::size_t e = 0; e < rel.edges.size(); ++e)
        by_dst[rel.edges[e].second].push_back(e);
      for (std::size_t dloc = 0; dloc < by_dst.size(); ++dloc) {
        auto& list = by_dst[dloc];
        if (list.size() > fanout_cap) {
          SplitMix64 rng = rng_stream(fanout_seed, kStreamFanout,
                                      (static_cast<std::uint64_t>(r) << 32) | dloc);
          for (std::size_t i = 0; i < fanout_cap; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.next_below(list.size() - i));
            std::swap(list[i], list[j]);
          }
          list.resize(fanout_cap);
          std::sort(list.begin(), list.end());
        }
        for (std::size_t e : list) {
          s.cov_src.push_back(src_off + rel.edges[e].first);
          s.cov_dst.push_back(dst_off + rel.edges[e].second);
          s.cov_rel.push_back(r);
          s.cov_self_fallback.push_back(false);
        }
      }
    }
  }
  // Nodes with no in-edge fall back to their own value projection.
  {
    std::vector<bool> has_in(s.n_total, false);
    for (std::size_t d : s.cov_dst) has_in[d] = true;
    for (std::size_t v = 0; v < s.n_total; ++v)
      if (!has_in[v]) {
        s.cov_src.push_back(v);
        s.cov_dst.push_back(v);
        s.cov_rel.push_back(0);
        s.cov_self_fallback.push_back(true);
      }
  }

  // Meta-path pairs: shared per-relation adjacency, then the same
  // frontier/dedup walk as metapath_neighborhood (asserted equal in tests).
  std::vector<std::vector<std::vector<std::uint32_t>>> adj(g.num_relations());
  for (RelationTypeId r = 0; r < g.num_relations(); ++r) {
    adj[r].resize(g.node_counts[g.relations[r].src_type]);
    for (const auto& e : g.relations[r].edges) adj[r][e.first].push_back(e.second);
  }
  for (const MetaPath& p : s.primary_paths) {
    ModelStructure::PathPairs pairs;
    const NodeTypeId terminal_type = g.relations[p.relation_ids.back()].dst_type;
    const std::size_t term_off = g.type_offset(terminal_type);
    for (std::size_t t = 0; t < s.n_targets; ++t) {
      std::vector<std::uint32_t> frontier{static_cast<std::uint32_t>(t)};
      for (RelationTypeId r : p.relation_ids) {
        std::set<std::uint32_t> next;
        for (std::uint32_t u : frontier)
          for (std::uint32_t v : adj[r][u]) next.insert(v);
        frontier.assign(next.begin(), next.end());
        if (frontier.empty()) break;
      }
      const std::size_t t_global = s.target_offset + t;
      if (frontier.empty()) {
        pairs.src.push_back(t_global);
        pairs.dst.push_back(t_global);
      } else {
        for (std::uint32_t nb : frontier) {
          pairs.src.push_back(term_off + nb);
          pairs.dst.push_back(t_global);
        }
      }
    }
    // Non-target nodes have no anchored neighborhood; self-fallback.
    for (std::size_t v = 0; v < s.n_total; ++v) {
      if (v >= s.target_offset && v < s.target_offset + s.n_targets) continue;
      pairs.src.push_back(v);
      pairs.dst.push_back(v);
    }
    s.paths.push_back(std::move(pairs));
  }
  return s;
}

FocalParamVars bind_params(Tape& tape, const FocalParams& p) {
  FocalParamVars v;
  for (const Tensor& t : p.input_proj) v.input_proj.push_back(tape.param(t));
  for (const CoaLayerParams& c : p.coa) {
    CoaLayerVars cv;
    for (std::size_t i = 0; i < c.w_q.size(); ++i) {
      cv.w_q.push_back(tape.param(c.w_q[i]));
      cv.w_k.push_back(tape.param(c.w_k[i]));
      cv.w_v.push_back(tape.param(c.w_v[i]));
    }
    cv.rho = tape.param(c.rho);
    v.coa.push_back(std::move(cv));
  }
  for (const AoaLayerParams& a : p.aoa) {
    AoaLayerVars av;
    for (const AoaPathParams& path : a.paths) {
      AoaPathVars pv;
      for (std::size_t i = 0; i < path.w.size(); ++i) {
        pv.w.push_back(tape.param(path.w[i]));
        pv.attn.push_back(tape.param(path.attn[i]));
      }
      av.paths.push_back(std::move(pv));
    }
    av.w_sem = tape.param(a.w_sem);
    av.b_sem = tape.param(a.b_sem);
    av.q_sem = tape.param(a.q_sem);
    v.aoa.push_back(std::move(av));
  }
  for (const FusionLayerParams& f : p.fusion) {
    FusionLayerVars fv;
    fv.w_g1 = tape.param(f.w_g1);
    fv.b_g1 = tape.param(f.b_g1);
    fv.w_g2 = tape.param(f.w_g2);
    fv.b_g2 = tape.param(f.b_g2);
    fv.w_alpha = tape.param(f.w_alpha);
    fv.b_alpha = tape.param(f.b_alpha);
    v.fusion.push_back(std::move(fv));
  }
  v.w_cls = tape.param(p.w_cls);
  v.b_cls = tape.param(p.b_cls);

  // Flat list mirrors param_refs order.
  for (VarId id : v.input_proj) v.flat.push_back(id);
  for (const CoaLayerVars& c : v.coa) {
    for (std::size_t i = 0; i < c.w_q.size(); ++i) {
      v.flat.push_back(c.w_q[i]);
      v.flat.push_back(c.w_k[i]);
      v.flat.push_back(c.w_v[i]);
    }
    v.flat.push_back(c.rho);
  }
  for (const AoaLayerVars& a : v.aoa) {
    for (const AoaPathVars& path : a.paths)
      for (std::size_t i = 0; i < path.w.size(); ++i) {
        v.flat.push_back(path.w[i]);
        v.flat.push_back(path.attn[i]);
      }
    v.flat.push_back(a.w_sem);
    v.flat.push_back(a.b_sem);
    v.flat.push_back(a.q_sem);
  }
  for (const FusionLayerVars& f : v.fusion) {
    v.flat.push_back(f.w_g1);
    v.flat.push_back(f.b_g1);
    v.flat.push_back(f.w_g2);
    v.flat.push_back(f.b_g2);
    v.flat.push_back(f.w_alpha);
    v.flat.push_back(f.b_alpha);
  }
  v.flat.push_back(v.w_cls);
  v.flat.push_back(v.b_cls);
  return v;
}

CoaLayerOut coa_layer(Tape& tape, const CoaLayerVars& vars, VarId h_prev,
                      const ModelStructure& s, std::size_t heads) {
  CoaLayerOut out;
  // mu = softplus(rho) + eps, gathered per edge.
  VarId mu = tape.affine(tape.log1p_exp(vars.rho), 1.0, kMuEpsilon);
  VarId mu_edges = tape.gather_rows(mu, s.cov_rel);
  const std::size_t dh = tape.value(vars.w_q[0]).cols();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<VarId> head_outs;
  for (std::size_t i = 0; i < heads; ++i) {
    VarId q = tape.matmul(h_prev, vars.w_q[i]);
    VarId k = tape.matmul(h_prev, vars.w_k[i]);
    VarId v = tape.matmul(h_prev, vars.w_v[i]);
    VarId dots = tape.pair_dot(q, k, s.cov_dst, s.cov_src);
    VarId logits = tape.mul(tape.scale(dots, inv_sqrt_d),
                            tape.slice_cols(mu_edges, i, i + 1));
    VarId alpha = tape.segment_softmax(logits, s.cov_dst, s.n_total);
    out.head_alpha.push_back(alpha);
    head_outs.push_back(tape.segment_weighted_sum(v, alpha, s.cov_src, s.cov_dst, s.n_total));
  }
  out.h = tape.concat_cols(head_outs);
  return out;
}

AoaPathOut aoa_path_layer(Tape& tape, const AoaPathVars& vars, VarId h_prev,
                          const ModelStructure::PathPairs& pairs, std::size_t n_total,
                          std::size_t heads, double leaky_slope) {
  AoaPathOut out;
  std::vector<VarId> head_outs;
  const std::size_t dh = tape.value(vars.w[0]).cols();
  for (std::size_t i = 0; i < heads; ++i) {
    VarId wh = tape.matmul(h_prev, vars.w[i]);
    // e = LeakyReLU(a^T [W h(t) || W h(s)]), split into the two halves.
    VarId a_row = tape.transpose(vars.attn[i]);  // 1 x 2dh
    VarId a_t = tape.transpose(tape.slice_cols(a_row, 0, dh));
    VarId a_s = tape.transpose(tape.slice_cols(a_row, dh, 2 * dh));
    VarId dot_t = tape.matmul(wh, a_t);
    VarId dot_s = tape.matmul(wh, a_s);
    VarId e = tape.leaky_relu(
        tape.add(tape.gather_rows(dot_t, pairs.dst), tape.gather_rows(dot_s, pairs.src)),
        leaky_slope);
    VarId alpha = tape.segment_softmax(e, pairs.dst, n_total);
    out.head_alpha.push_back(alpha);
    head_outs.push_back(tape.segment_weighted_sum(wh, alpha, pairs.src, pairs.dst, n_total));
  }
  out.z = tape.concat_cols(head_outs);
  return out;
}

AoaLayerOut aoa_layer(Tape& tape, const AoaLayerVars& vars, VarId h_prev,
                      const ModelStructure& s, std::size_t heads, double leaky_slope) {
  if (vars.paths.empty()) throw validation_error("aoa_layer: empty meta-path set");
  AoaLayerOut out;
  std::vector<VarId> scores;
  for (std::size_t p = 0; p < vars.paths.size(); ++p) {
    AoaPathOut po =
        aoa_path_layer(tape, vars.paths[p], h_prev, s.paths[p], s.n_total, heads, leaky_slope);
    // u_P = q^T tanh(W_s z_P + b_s)
    VarId u = tape.matmul(
        tape.tanh_act(tape.add_rowvec(tape.matmul(po.z, vars.w_sem), vars.b_sem)), vars.q_sem);
    scores.push_back(u);
    out.per_path.push_back(std::move(po));
  }
  out.beta = tape.softmax_rows(tape.concat_cols(scores));
  VarId h = 0;
  for (std::size_t p = 0; p < vars.paths.size(); ++p) {
    VarId term = tape.scale_rows(out.per_path[p].z, tape.slice_cols(out.beta, p, p + 1));
    h = (p == 0) ? term : tape.add(h, term);
  }
  out.h = h;
  return out;
}

VarId fuse(Tape& tape, VarId g1, VarId g2, VarId h_coa, VarId h_aoa) {
  return tape.add(tape.mul(g1, h_coa), tape.mul(g2, h_aoa));
}

VarId adaptive_residual(Tape& tape, VarId h_fuse, VarId h_prev, VarId w_alpha, VarId b_alpha,
                        VarId* alpha_out) {
  VarId cat = tape.concat_cols({h_fuse, h_prev});
  VarId alpha = tape.sigmoid(tape.add_rowvec(tape.matmul(cat, w_alpha), b_alpha));
  if (alpha_out) *alpha_out = alpha;
  return tape.add(tape.mul(alpha, h_fuse), tape.mul(tape.affine(alpha, -1.0, 1.0), h_prev));
}

AblationMode ablation_mode_from_string(const std::string& s) {
  if (s == "full") return AblationMode::kFull;
  if (s == "coa_only") return AblationMode::kCoaOnly;
  if (s == "aoa_only") return AblationMode::kAoaOnly;
  throw validation_error("unknown ablation mode: '" + s + "' (want full|coa_only|aoa_only)");
}

std::string to_string(AblationMode m) {
  switch (m) {
    case AblationMode::kFull: return "full";
    case AblationMode::kCoaOnly: return "coa_only";
    case AblationMode::kAoaOnly: return "aoa_only";
  }
  return "?";
}

ForwardResult focal_forward(Tape& tape, const FocalParamVars& vars, const ModelStructure& s,
                            const HetGraph& g, const FocalConfig& cfg,
                            const ForwardOptions& opt) {
  // Layer 0: per-type input projection into the shared hidden width.
  std::vector<VarId> blocks;
  for (std::size_t t = 0; t < g.num_node_types(); ++t)
    blocks.push_back(tape.matmul(tape.constant(g.features[t]), vars.input_proj[t]));
  VarId h = tape.concat_rows(blocks);

  ForwardResult res;
  VarId h_coa_last = 0, h_aoa_last = 0;
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    LayerTraceEntry entry;
    const bool want_coa = opt.mode != AblationMode::kAoaOnly;
    const bool want_aoa = opt.mode != AblationMode::kCoaOnly;
    CoaLayerOut coa;
    AoaLayerOut aoa;
    if (want_coa) coa = coa_layer(tape, vars.coa[l], h, s, cfg.coa_heads);
    if (want_aoa) aoa = aoa_layer(tape, vars.aoa[l], h, s, cfg.aoa_heads, cfg.leaky_slope);

    VarId h_fuse;
    VarId alpha = 0;
    if (opt.mode == AblationMode::kFull) {
      VarId cat = tape.concat_cols({coa.h, aoa.h});
      VarId g1 = tape.sigmoid(
          tape.add_rowvec(tape.matmul(cat, vars.fusion[l].w_g1), vars.fusion[l].b_g1));
      VarId g2 = tape.sigmoid(
          tape.add_rowvec(tape.matmul(cat, vars.fusion[l].w_g2), vars.fusion[l].b_g2));
      h_fuse = fuse(tape, g1, g2, coa.h, aoa.h);
      if (opt.record_trace) {
        entry.g1 = tape.value(g1);
        entry.g2 = tape.value(g2);
      }
      h_coa_last = coa.h;
      h_aoa_last = aoa.h;
    } else if (opt.mode == AblationMode::kCoaOnly) {
      h_fuse = coa.h;
      h_coa_last = coa.h;
    } else {
      h_fuse = aoa.h;
      h_aoa_last = aoa.h;
    }

    VarId h_out =
        adaptive_residual(tape, h_fuse, h, vars.fusion[l].w_alpha, vars.fusion[l].b_alpha, &alpha);

    if (opt.training && cfg.dropout > 0.0) {
      // Inverted dropout on the layer output; evaluation and theorem runs
      // never take this branch.
      const Tensor& hv = tape.value(h_out);
      Tensor mask(hv.rows(), hv.cols());
      SplitMix64 rng = rng_stream(opt.dropout_seed, kStreamDropout,
                                  opt.epoch * cfg.num_layers + l);
      const double keep = 1.0 - cfg.dropout;
      for (double& m : mask.data()) m = rng.next_unit() < keep ? 1.0 / keep : 0.0;
      h_out = tape.mul(h_out, tape.constant(std::move(mask)));
    }

    if (opt.record_trace) {
      if (want_coa) {
        entry.h_coa = tape.value(coa.h);
        for (VarId a : coa.head_alpha) entry.coa_head_alpha.push_back(tape.value(a));
      }
      if (want_aoa) {
        entry.h_aoa = tape.value(aoa.h);
        entry.beta = tape.value(aoa.beta);
        for (const AoaPathOut& po : aoa.per_path) {
          std::vector<Tensor> per_head;
          for (VarId a : po.head_alpha) per_head.push_back(tape.value(a));
          entry.aoa_head_alpha.push_back(std::move(per_head));
        }
      }
      entry.h_fuse = tape.value(h_fuse);
      entry.alpha = tape.value(alpha);
      entry.h_out = tape.value(h_out);
      res.trace.layers.push_back(std::move(entry));
    }
    h = h_out;
  }

  std::vector<std::size_t> target_rows(s.n_targets);
  std::iota(target_rows.begin(), target_rows.end(), s.target_offset);
  VarId h_targets = tape.gather_rows(h, target_rows);
  res.logits = tape.add_rowvec(tape.matmul(h_targets, vars.w_cls), vars.b_cls);
  if (opt.mode == AblationMode::kFull) {
    res.h_coa_final = tape.gather_rows(h_coa_last, target_rows);
    res.h_aoa_final = tape.gather_rows(h_aoa_last, target_rows);
    res.has_branches = true;
  }
  return res;
}

double gate_floor(const LayerTraceEntry& layer, std::size_t node) {
  if (layer.g2.empty()) throw validation_error("gate_floor: trace has no gates (ablation run?)");
  double m = layer.g2.at(node, 0);
  for (std::size_t c = 1; c < layer.g2.cols(); ++c) m = std::min(m, layer.g2.at(node, c));
  return m;
}

double primary_attention_mass(const std::vector<double>& weights,
                              const std::vector<bool>& is_primary) {
  if (weights.size() != is_primary.size())
    throw shape_error("primary_attention_mass: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (is_primary[i]) s += weights[i];
  return s;
}

double semantic_mass(const std::vector<double>& beta, const std::vector<bool>& is_primary) {
  return primary_attention_mass(beta, is_primary);
}

}  // namespace focal
