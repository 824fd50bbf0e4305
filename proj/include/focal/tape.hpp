#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "focal/tensor.hpp"

namespace focal {

using VarId = std::uint32_t;

// Append-only record of primitive ops. Ops only reference earlier entries,
// so the graph is acyclic by construction and backward() is a single
// reverse sweep that visits each entry exactly once. Values are computed
// eagerly and checked for finiteness; overflow raises numeric_error
// instead of propagating NaN/Inf.
//
// One tape per forward pass, single writer. Independent tapes may run in
// parallel threads.
class Tape {
 public:
  VarId param(Tensor value) { return push_leaf(std::move(value), true); }
  VarId constant(Tensor value) { return push_leaf(std::move(value), false); }

  const Tensor& value(VarId v) const { return nodes_[v].value; }
  // Zero tensor until backward() reaches it; parameters never touched by
  // the loss keep an exact zero gradient.
  const Tensor& grad(VarId v) const;
  std::size_t size() const { return nodes_.size(); }

  // -- elementwise / broadcast ---------------------------------------
  VarId add(VarId a, VarId b);
  VarId sub(VarId a, VarId b);
  VarId mul(VarId a, VarId b);
  VarId div(VarId a, VarId b);
  VarId affine(VarId a, double s, double c);  // s*x + c
  VarId scale(VarId a, double s) { return affine(a, s, 0.0); }
  VarId add_rowvec(VarId a, VarId v);    // a: n x c, v: 1 x c
  VarId scale_rows(VarId a, VarId col);  // a: n x c, col: n x 1
  VarId sigmoid(VarId a);
  VarId tanh_act(VarId a);
  VarId leaky_relu(VarId a, double slope = 0.01);
  VarId relu(VarId a) { return leaky_relu(a, 0.0); }
  VarId log1p_exp(VarId a);  // stable log(1 + e^x)
  VarId exp_elem(VarId a);
  VarId log_elem(VarId a);
  VarId sqrt_elem(VarId a);
  VarId pow_const(VarId a, double p);
  VarId clamp_max(VarId a, double hi);

  // -- structure -------------------------------------------------------
  VarId matmul(VarId a, VarId b);
  VarId transpose(VarId a);
  VarId concat_cols(const std::vector<VarId>& parts);
  VarId concat_rows(const std::vector<VarId>& parts);
  VarId gather_rows(VarId a, std::vector<std::size_t> rows);
  VarId slice_cols(VarId a, std::size_t c0, std::size_t c1);  // [c0, c1)
  VarId softmax_rows(VarId a);  // row-wise softmax, max-subtracted

  // -- reductions --------------------------------------------------
  VarId sum_all(VarId a);
  VarId mean_all(VarId a);
  VarId row_dot(VarId a, VarId b);  // n x 1 of per-row dot products

  // -- attention primitives ------------------------------------------
  // Per-entry dot products A[ia[e]] . B[ib[e]] -> E x 1.
  VarId pair_dot(VarId a, VarId b, std::vector<std::size_t> ia, std::vector<std::size_t> ib);
  // Softmax of an E x 1 logit column within each segment (max-subtracted).
  // Empty segments are fine: they simply have no entries.
  VarId segment_softmax(VarId logits, std::vector<std::size_t> seg, std::size_t n_seg);
  // out[seg[e]] += w[e] * x[src[e]]  -> n_seg x cols(x).
  VarId segment_weighted_sum(VarId x, VarId w, std::vector<std::size_t> src,
                             std::vector<std::size_t> seg, std::size_t n_seg);
  // Softmax over the masked subset of a flat vector; zeros elsewhere.
  VarId softmax_masked(VarId logits, std::vector<std::size_t> mask);

  // Reverse accumulation from a scalar loss.
  void backward(VarId loss);

 private:
  enum class Op : std::uint8_t {
    kLeaf, kAdd, kSub, kMul, kDiv, kAffine, kAddRowVec, kScaleRows,
    kSigmoid, kTanh, kLeakyRelu, kLog1pExp, kExp, kLog, kSqrt, kPowConst,
    kClampMax, kMatmul, kTranspose, kConcatCols, kConcatRows, kGatherRows,
    kSliceCols, kSoftmaxRows, kSumAll, kMeanAll, kRowDot, kPairDot,
    kSegmentSoftmax, kSegmentWeightedSum, kSoftmaxMasked,
  };

  struct Node {
    Tensor value;
    Tensor grad;
    Op op = Op::kLeaf;
    bool requires_grad = false;
    std::uint8_t n_in = 0;
    std::array<VarId, 2> in{0, 0};
    double c0 = 0.0, c1 = 0.0;
    std::vector<VarId> in_list;        // concat_cols
    std::vector<std::size_t> idx;      // gather rows / pair src / segments / mask
    std::vector<std::size_t> idx2;     // pair dst
    std::size_t n_seg = 0;
  };

  VarId push_leaf(Tensor value, bool requires_grad);
  VarId push1(Op op, VarId a, Tensor value);
  VarId push2(Op op, VarId a, VarId b, Tensor value);
  bool needs_grad(VarId v) const { return nodes_[v].requires_grad; }
  void check_finite(const Tensor& t, const char* op) const;
  void backward_node(std::size_t i);
  Tensor& grad_buf(VarId v);

  std::vector<Node> nodes_;
  Tensor zero_grad_;  // returned for grads never materialized
};

}  // namespace focal
