#pragma once

#include <string>
#include <vector>

#include "focal/config.hpp"
#include "focal/hetgraph.hpp"
#include "focal/rng.hpp"
#include "focal/tape.hpp"

namespace focal {

// All learnable weights. Projection matrices are stored input-major
// (rows = fan-in, cols = fan-out) so embeddings multiply on the left.
struct CoaLayerParams {
  std::vector<Tensor> w_q, w_k, w_v;  // per head: d_in x d_head
  Tensor rho;                         // R x heads; mu = softplus(rho) + 1e-4
};

struct AoaPathParams {
  std::vector<Tensor> w;     // per head: d_in x d_head
  std::vector<Tensor> attn;  // per head: 2*d_head x 1
};

struct AoaLayerParams {
  std::vector<AoaPathParams> paths;  // per primary meta-path
  Tensor w_sem;                      // d x d
  Tensor b_sem;                      // 1 x d
  Tensor q_sem;                      // d x 1
};

struct FusionLayerParams {
  Tensor w_g1, w_g2;      // 2d x d
  Tensor b_g1, b_g2;      // 1 x d
  Tensor w_alpha;         // 2d x d
  Tensor b_alpha;         // 1 x d
};

struct FocalParams {
  std::vector<Tensor> input_proj;       // per node type: d_phi x d
  std::vector<CoaLayerParams> coa;      // per layer
  std::vector<AoaLayerParams> aoa;      // per layer
  std::vector<FusionLayerParams> fusion;
  Tensor w_cls;                         // d x C
  Tensor b_cls;                         // 1 x C
};

struct ParamRef {
  std::string name;
  Tensor* tensor;
};

// Fixed enumeration order; everything that iterates parameters (optimizer,
// serialization, gradient checks, determinism comparisons) uses this.
std::vector<ParamRef> param_refs(FocalParams& p);
std::vector<ParamRef> param_refs(const FocalParams& p);

// Xavier-uniform weights, zero biases, zero relation reweight
// pre-activations; deterministic in seed.
FocalParams init_params(const FocalConfig& cfg, const HetGraph& g,
                        std::size_t num_primary_paths, std::uint64_t seed);

void save_params(const FocalParams& p, const std::string& path);
void load_params(FocalParams& p, const std::string& path);  // shapes must match

// ------------------------------------------------------------------
// Static aggregation structure: pair lists shared by every layer.
// Node indices are global (types laid out consecutively). Nodes with an
// empty neighborhood get a (v, v) self-fallback pair so attention reduces
// to the node's own value projection.
struct ModelStructure {
  std::size_t n_total = 0;
  std::size_t n_targets = 0;
  std::size_t target_offset = 0;

  // Coverage pairs: src/dst global node ids plus the relation of each edge.
  std::vector<std::size_t> cov_src, cov_dst, cov_rel;
  std::vector<bool> cov_self_fallback;  // marks synthetic self pairs

  struct PathPairs {
    std::vector<std::size_t> src, dst;
  };
  std::vector<PathPairs> paths;        // per primary meta-path
  std::vector<MetaPath> primary_paths;
};

// Resolves cfg.metapaths against the graph, keeps the primary ones
// (every relation flagged primary), and builds all pair lists.
// fanout_cap > 0 limits coverage in-edges per (node, relation), sampled
// deterministically from fanout_seed.
ModelStructure build_structure(const HetGraph& g, const FocalConfig& cfg,
                               std::size_t fanout_cap = 0, std::uint64_t fanout_seed = 0);

// ------------------------------------------------------------------
// Parameters materialized on a tape.
struct CoaLayerVars {
  std::vector<VarId> w_q, w_k, w_v;
  VarId rho = 0;
};
struct AoaPathVars {
  std::vector<VarId> w, attn;
};
struct AoaLayerVars {
  std::vector<AoaPathVars> paths;
  VarId w_sem = 0, b_sem = 0, q_sem = 0;
};
struct FusionLayerVars {
  VarId w_g1 = 0, b_g1 = 0, w_g2 = 0, b_g2 = 0, w_alpha = 0, b_alpha = 0;
};
struct FocalParamVars {
  std::vector<VarId> input_proj;
  std::vector<CoaLayerVars> coa;
  std::vector<AoaLayerVars> aoa;
  std::vector<FusionLayerVars> fusion;
  VarId w_cls = 0, b_cls = 0;
  std::vector<VarId> flat;  // param_refs order
};

FocalParamVars bind_params(Tape& tape, const FocalParams& p);

// ------------------------------------------------------------------
// Layer components. All operate on the full node set at once.

struct CoaLayerOut {
  VarId h = 0;                     // n_total x d
  std::vector<VarId> head_alpha;   // per head: |cov pairs| x 1
};

// Transformer-style attention over the coverage neighborhood with
// relation-head reweighting.
CoaLayerOut coa_layer(Tape& tape, const CoaLayerVars& vars, VarId h_prev,
                      const ModelStructure& s, std::size_t heads);

struct AoaPathOut {
  VarId z = 0;                    // n_total x d
  std::vector<VarId> head_alpha;  // per head: |path pairs| x 1
};

// Node-level attention within one meta-path neighborhood.
AoaPathOut aoa_path_layer(Tape& tape, const AoaPathVars& vars, VarId h_prev,
                          const ModelStructure::PathPairs& pairs, std::size_t n_total,
                          std::size_t heads, double leaky_slope);

struct AoaLayerOut {
  VarId h = 0;     // n_total x d
  VarId beta = 0;  // n_total x |paths|
  std::vector<AoaPathOut> per_path;
};

// Hierarchical aggregation: node-level attention per meta-path, then
// semantic-level attention over meta-paths. With one meta-path the
// semantic weight is exactly 1 and the output equals the path output.
AoaLayerOut aoa_layer(Tape& tape, const AoaLayerVars& vars, VarId h_prev,
                      const ModelStructure& s, std::size_t heads, double leaky_slope);

// h_fuse = g1 (.) h_coa + g2 (.) h_aoa
VarId fuse(Tape& tape, VarId g1, VarId g2, VarId h_coa, VarId h_aoa);

// h_out = alpha (.) h_fuse + (1 - alpha) (.) h_prev with
// alpha = sigmoid(W_a [h_fuse || h_prev] + b_a).
VarId adaptive_residual(Tape& tape, VarId h_fuse, VarId h_prev, VarId w_alpha, VarId b_alpha,
                        VarId* alpha_out = nullptr);

// ------------------------------------------------------------------
enum class AblationMode { kFull, kCoaOnly, kAoaOnly };

AblationMode ablation_mode_from_string(const std::string& s);
std::string to_string(AblationMode m);

struct ForwardOptions {
  AblationMode mode = AblationMode::kFull;
  bool training = false;            // enables dropout on layer outputs
  std::uint64_t dropout_seed = 0;
  std::size_t epoch = 0;
  bool record_trace = false;
};

// Values recorded per layer for the theorem lab and property tests.
struct LayerTraceEntry {
  Tensor h_coa, h_aoa;        // n_total x d
  Tensor g1, g2;              // n_total x d (full mode only)
  Tensor h_fuse, alpha, h_out;
  std::vector<Tensor> coa_head_alpha;                // per head, |cov| x 1
  std::vector<std::vector<Tensor>> aoa_head_alpha;   // per path, per head
  Tensor beta;                // n_total x |paths|
};

struct LayerTrace {
  std::vector<LayerTraceEntry> layers;
};

struct ForwardResult {
  VarId logits = 0;       // n_targets x C
  VarId h_coa_final = 0;  // n_targets x d (full mode)
  VarId h_aoa_final = 0;
  bool has_branches = false;
  LayerTrace trace;
};

// Full FOCAL forward pass: layer-0 type projections, per layer COA and AOA
// in parallel on h^(l-1), gated fusion, node-adaptive residual, classifier
// head on target rows.
ForwardResult focal_forward(Tape& tape, const FocalParamVars& vars, const ModelStructure& s,
                            const HetGraph& g, const FocalConfig& cfg,
                            const ForwardOptions& opt = {});

// gamma_v = min_k g2[v,k] from a recorded trace layer; strictly > 0.
double gate_floor(const LayerTraceEntry& layer, std::size_t node);

// Total attention mass on the primary subset of one weight vector
// (entries aligned with `is_primary`).
double primary_attention_mass(const std::vector<double>& weights,
                              const std::vector<bool>& is_primary);

// B*: semantic mass of a beta row restricted to a primary subset.
double semantic_mass(const std::vector<double>& beta, const std::vector<bool>& is_primary);

}  // namespace focal
