#include "focal/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "focal/errors.hpp"

namespace focal {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_log1p_exp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace

const Tensor& Tape::grad(VarId v) const {
  const Node& n = nodes_[v];
  if (n.grad.empty() && !n.value.empty()) {
    // Never touched by backward: behave as an exact zero of matching shape.
    const_cast<Tape*>(this)->nodes_[v].grad = Tensor(n.value.rows(), n.value.cols());
  }
  return nodes_[v].grad;
}

Tensor& Tape::grad_buf(VarId v) {
  Node& n = nodes_[v];
  if (n.grad.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::check_finite(const Tensor& t, const char* op) const {
  if (!t.all_finite())
    throw numeric_error(std::string(op) + ": non-finite result (overflow is an error)");
}

VarId Tape::push_leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::push1(Op op, VarId a, Tensor value) {
  check_finite(value, "tape op");
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.n_in = 1;
  n.in[0] = a;
  n.requires_grad = needs_grad(a);
  nodes_.push_back(std::move(n));
  return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::push2(Op op, VarId a, VarId b, Tensor value) {
  check_finite(value, "tape op");
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.n_in = 2;
  n.in[0] = a;
  n.in[1] = b;
  n.requires_grad = needs_grad(a) || needs_grad(b);
  nodes_.push_back(std::move(n));
  return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::add(VarId a, VarId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb))
    throw shape_error("add: shapes differ: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += tb[i];
  return push2(Op::kAdd, a, b, std::move(out));
}

VarId Tape::sub(VarId a, VarId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb))
    throw shape_error("sub: shapes differ: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= tb[i];
  return push2(Op::kSub, a, b, std::move(out));
}

VarId Tape::mul(VarId a, VarId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb))
    throw shape_error("mul: shapes differ: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
  return push2(Op::kMul, a, b, std::move(out));
}

VarId Tape::div(VarId a, VarId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb))
    throw shape_error("div: shapes differ: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= tb[i];
  return push2(Op::kDiv, a, b, std::move(out));
}

VarId Tape::affine(VarId a, double s, double c) {
  Tensor out = value(a);
  for (double& v : out.data()) v = s * v + c;
  VarId r = push1(Op::kAffine, a, std::move(out));
  nodes_[r].c0 = s;
  nodes_[r].c1 = c;
  return r;
}

VarId Tape::add_rowvec(VarId a, VarId v) {
  const Tensor& ta = value(a);
  const Tensor& tv = value(v);
  if (tv.rows() != 1 || tv.cols() != ta.cols())
    throw shape_error("add_rowvec: want 1x" + std::to_string(ta.cols()) + ", got " +
                      tv.shape_str());
  Tensor out = ta;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out.at(r, c) += tv[c];
  return push2(Op::kAddRowVec, a, v, std::move(out));
}

VarId Tape::scale_rows(VarId a, VarId col) {
  const Tensor& ta = value(a);
  const Tensor& tc = value(col);
  if (tc.cols() != 1 || tc.rows() != ta.rows())
    throw shape_error("scale_rows: want " + std::to_string(ta.rows()) + "x1, got " +
                      tc.shape_str());
  Tensor out = ta;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const double w = tc[r];
    double* p = out.row_ptr(r);
    for (std::size_t c = 0; c < out.cols(); ++c) p[c] *= w;
  }
  return push2(Op::kScaleRows, a, col, std::move(out));
}

VarId Tape::sigmoid(VarId a) {
  Tensor out = value(a);
  for (double& v : out.data()) v = stable_sigmoid(v);
  return push1(Op::kSigmoid, a, std::move(out));
}

VarId Tape::tanh_act(VarId a) {
  Tensor out = value(a);
  for (double& v : out.data()) v = std::tanh(v);
  return push1(Op::kTanh, a, std::move(out));
}

VarId Tape::leaky_relu(VarId a, double slope) {
  Tensor out = value(a);
  for (double& v : out.data())
    if (v < 0.0) v *= slope;
  VarId r = push1(Op::kLeakyRelu, a, std::move(out));
  nodes_[r].c0 = slope;
  return r;
}

VarId Tape::log1p_exp(VarId a) {
  Tensor out = value(a);
  for (double& v : out.data()) v = stable_log1p_exp(v);
  return push1(Op::kLog1pExp, a, std::move(out));
}

VarId Tape::exp_elem(VarId a) {
  Tensor out = value(a);
  for (double& v : out.data()) v = std::exp(v);
  return push1(Op::kExp, a, std::move(out));
}

VarId Tape::log_elem(VarId a) {
  Tensor out = value(a);
  for (double& v : out.data()) v = std::log(v);
  return push1(Op::kLog, a, std::move(out));
}

VarId Tape::sqrt_elem(VarId a) {
  Tensor out = value(a);
  for (double& v : out.data()) v = std::sqrt(v);
  return push1(Op::kSqrt, a, std::move(out));
}

VarId Tape::pow_const(VarId a, double p) {
  Tensor out = value(a);
  for (double& v : out.data()) v = std::pow(v, p);
  VarId r = push1(Op::kPowConst, a, std::move(out));
  nodes_[r].c0 = p;
  return r;
}

VarId Tape::clamp_max(VarId a, double hi) {
  Tensor out = value(a);
  for (double& v : out.data()) v = std::min(v, hi);
  VarId r = push1(Op::kClampMax, a, std::move(out));
  nodes_[r].c0 = hi;
  return r;
}

VarId Tape::matmul(VarId a, VarId b) {
  return push2(Op::kMatmul, a, b, focal::matmul(value(a), value(b)));
}

VarId Tape::transpose(VarId a) {
  const Tensor& ta = value(a);
  Tensor out(ta.cols(), ta.rows());
  for (std::size_t r = 0; r < ta.rows(); ++r)
    for (std::size_t c = 0; c < ta.cols(); ++c) out.at(c, r) = ta.at(r, c);
  return push1(Op::kTranspose, a, std::move(out));
}

VarId Tape::concat_cols(const std::vector<VarId>& parts) {
  if (parts.empty()) throw shape_error("concat_cols: empty list");
  const std::size_t n = value(parts[0]).rows();
  std::size_t total = 0;
  for (VarId p : parts) {
    if (value(p).rows() != n)
      throw shape_error("concat_cols: row counts differ: " + value(parts[0]).shape_str() +
                        " vs " + value(p).shape_str());
    total += value(p).cols();
  }
  Tensor out(n, total);
  std::size_t off = 0;
  for (VarId p : parts) {
    const Tensor& t = value(p);
    for (std::size_t r = 0; r < n; ++r)
      std::copy(t.row_ptr(r), t.row_ptr(r) + t.cols(), out.row_ptr(r) + off);
    off += t.cols();
  }
  check_finite(out, "concat_cols");
  Node node;
  node.value = std::move(out);
  node.op = Op::kConcatCols;
  node.in_list = parts;
  for (VarId p : parts) node.requires_grad = node.requires_grad || needs_grad(p);
  nodes_.push_back(std::move(node));
  return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::concat_rows(const std::vector<VarId>& parts) {
  if (parts.empty()) throw shape_error("concat_rows: empty list");
  const std::size_t cols = value(parts[0]).cols();
  std::size_t total = 0;
  for (VarId p : parts) {
    if (value(p).cols() != cols)
      throw shape_error("concat_rows: col counts differ: " + value(parts[0]).shape_str() +
                        " vs " + value(p).shape_str());
    total += value(p).rows();
  }
  Tensor out(total, cols);
  std::size_t off = 0;
  for (VarId p : parts) {
    const Tensor& t = value(p);
    std::copy(t.data().begin(), t.data().end(), out.data().begin() + off * cols);
    off += t.rows();
  }
  check_finite(out, "concat_rows");
  Node node;
  node.value = std::move(out);
  node.op = Op::kConcatRows;
  node.in_list = parts;
  for (VarId p : parts) node.requires_grad = node.requires_grad || needs_grad(p);
  nodes_.push_back(std::move(node));
  return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::softmax_rows(VarId a) {
  const Tensor& ta = value(a);
  if (ta.cols() == 0) throw shape_error("softmax_rows: zero-width tensor");
  Tensor out(ta.rows(), ta.cols());
  for (std::size_t r = 0; r < ta.rows(); ++r) {
    const double* p = ta.row_ptr(r);
    double mx = p[0];
    for (std::size_t c = 1; c < ta.cols(); ++c) mx = std::max(mx, p[c]);
    double sum = 0.0;
    double* o = out.row_ptr(r);
    for (std::size_t c = 0; c < ta.cols(); ++c) {
      o[c] = std::exp(p[c] - mx);
      sum += o[c];
    }
    for (std::size_t c = 0; c < ta.cols(); ++c) o[c] /= sum;
  }
  return push1(Op::kSoftmaxRows, a, std::move(out));
}

VarId Tape::gather_rows(VarId a, std::vector<std::size_t> rows) {
  const Tensor& ta = value(a);
  Tensor out(rows.size(), ta.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= ta.rows())
      throw shape_error("gather_rows: row " + std::to_string(rows[i]) + " out of range for " +
                        ta.shape_str());
    std::copy(ta.row_ptr(rows[i]), ta.row_ptr(rows[i]) + ta.cols(), out.row_ptr(i));
  }
  VarId r = push1(Op::kGatherRows, a, std::move(out));
  nodes_[r].idx = std::move(rows);
  return r;
}

VarId Tape::slice_cols(VarId a, std::size_t c0, std::size_t c1) {
  const Tensor& ta = value(a);
  if (c0 >= c1 || c1 > ta.cols())
    throw shape_error("slice_cols: bad range [" + std::to_string(c0) + "," +
                      std::to_string(c1) + ") for " + ta.shape_str());
  Tensor out(ta.rows(), c1 - c0);
  for (std::size_t r = 0; r < ta.rows(); ++r)
    std::copy(ta.row_ptr(r) + c0, ta.row_ptr(r) + c1, out.row_ptr(r));
  VarId r = push1(Op::kSliceCols, a, std::move(out));
  nodes_[r].c0 = static_cast<double>(c0);
  return r;
}

VarId Tape::sum_all(VarId a) {
  double s = 0.0;
  for (double v : value(a).data()) s += v;
  return push1(Op::kSumAll, a, Tensor::scalar(s));
}

VarId Tape::mean_all(VarId a) {
  const std::size_t n = value(a).size();
  if (n == 0) throw shape_error("mean_all: empty tensor");
  double s = 0.0;
  for (double v : value(a).data()) s += v;
  return push1(Op::kMeanAll, a, Tensor::scalar(s / static_cast<double>(n)));
}

VarId Tape::row_dot(VarId a, VarId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb))
    throw shape_error("row_dot: shapes differ: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out(ta.rows(), 1);
  for (std::size_t r = 0; r < ta.rows(); ++r) {
    double s = 0.0;
    const double* pa = ta.row_ptr(r);
    const double* pb = tb.row_ptr(r);
    for (std::size_t c = 0; c < ta.cols(); ++c) s += pa[c] * pb[c];
    out[r] = s;
  }
  return push2(Op::kRowDot, a, b, std::move(out));
}

VarId Tape::pair_dot(VarId a, VarId b, std::vector<std::size_t> ia,
                     std::vector<std::size_t> ib) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.cols() != tb.cols())
    throw shape_error("pair_dot: widths differ: " + ta.shape_str() + " vs " + tb.shape_str());
  if (ia.size() != ib.size()) throw shape_error("pair_dot: index lists differ in length");
  Tensor out(ia.size(), 1);
  for (std::size_t e = 0; e < ia.size(); ++e) {
    const double* pa = ta.row_ptr(ia[e]);
    const double* pb = tb.row_ptr(ib[e]);
    double s = 0.0;
    for (std::size_t c = 0; c < ta.cols(); ++c) s += pa[c] * pb[c];
    out[e] = s;
  }
  VarId r = push2(Op::kPairDot, a, b, std::move(out));
  nodes_[r].idx = std::move(ia);
  nodes_[r].idx2 = std::move(ib);
  return r;
}

VarId Tape::segment_softmax(VarId logits, std::vector<std::size_t> seg, std::size_t n_seg) {
  const Tensor& tl = value(logits);
  if (tl.cols() != 1) throw shape_error("segment_softmax: want Ex1, got " + tl.shape_str());
  if (seg.size() != tl.rows()) throw shape_error("segment_softmax: segment list length mismatch");
  std::vector<double> seg_max(n_seg, -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < seg.size(); ++e)
    seg_max[seg[e]] = std::max(seg_max[seg[e]], tl[e]);
  Tensor out(tl.rows(), 1);
  std::vector<double> seg_sum(n_seg, 0.0);
  for (std::size_t e = 0; e < seg.size(); ++e) {
    out[e] = std::exp(tl[e] - seg_max[seg[e]]);
    seg_sum[seg[e]] += out[e];
  }
  for (std::size_t e = 0; e < seg.size(); ++e) out[e] /= seg_sum[seg[e]];
  VarId r = push1(Op::kSegmentSoftmax, logits, std::move(out));
  nodes_[r].idx = std::move(seg);
  nodes_[r].n_seg = n_seg;
  return r;
}

VarId Tape::segment_weighted_sum(VarId x, VarId w, std::vector<std::size_t> src,
                                 std::vector<std::size_t> seg, std::size_t n_seg) {
  const Tensor& tx = value(x);
  const Tensor& tw = value(w);
  if (tw.cols() != 1 || tw.rows() != src.size() || src.size() != seg.size())
    throw shape_error("segment_weighted_sum: weight/index shapes inconsistent");
  Tensor out(n_seg, tx.cols());
  for (std::size_t e = 0; e < src.size(); ++e) {
    const double we = tw[e];
    const double* px = tx.row_ptr(src[e]);
    double* po = out.row_ptr(seg[e]);
    for (std::size_t c = 0; c < tx.cols(); ++c) po[c] += we * px[c];
  }
  VarId r = push2(Op::kSegmentWeightedSum, x, w, std::move(out));
  nodes_[r].idx = std::move(src);
  nodes_[r].idx2 = std::move(seg);
  nodes_[r].n_seg = n_seg;
  return r;
}

VarId Tape::softmax_masked(VarId logits, std::vector<std::size_t> mask) {
  const Tensor& tl = value(logits);
  if (mask.empty()) throw shape_error("softmax_masked: empty mask");
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i : mask) {
    if (i >= tl.size())
      throw shape_error("softmax_masked: mask index " + std::to_string(i) + " out of range");
    mx = std::max(mx, tl[i]);
  }
  Tensor out(tl.rows(), tl.cols());
  double sum = 0.0;
  for (std::size_t i : mask) {
    out[i] = std::exp(tl[i] - mx);
    sum += out[i];
  }
  for (std::size_t i : mask) out[i] /= sum;
  VarId r = push1(Op::kSoftmaxMasked, logits, std::move(out));
  nodes_[r].idx = std::move(mask);
  return r;
}

void Tape::backward(VarId loss) {
  const Tensor& lv = value(loss);
  if (lv.size() != 1) throw shape_error("backward: loss must be scalar, got " + lv.shape_str());
  grad_buf(loss)[0] = 1.0;
  for (std::size_t i = loss + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.op == Op::kLeaf || n.grad.empty()) continue;
    backward_node(i);
  }
}

void Tape::backward_node(std::size_t i) {
  Node& n = nodes_[i];
  const Tensor& g = n.grad;
  const VarId a = n.in[0];
  const VarId b = n.in[1];
  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kAdd: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
      }
      if (needs_grad(b)) {
        Tensor& gb = grad_buf(b);
        for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k];
      }
      break;
    }
    case Op::kSub: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
      }
      if (needs_grad(b)) {
        Tensor& gb = grad_buf(b);
        for (std::size_t k = 0; k < g.size(); ++k) gb[k] -= g[k];
      }
      break;
    }
    case Op::kMul: {
      const Tensor& va = value(a);
      const Tensor& vb = value(b);
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * vb[k];
      }
      if (needs_grad(b)) {
        Tensor& gb = grad_buf(b);
        for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * va[k];
      }
      break;
    }
    case Op::kDiv: {
      const Tensor& va = value(a);
      const Tensor& vb = value(b);
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] / vb[k];
      }
      if (needs_grad(b)) {
        Tensor& gb = grad_buf(b);
        for (std::size_t k = 0; k < g.size(); ++k)
          gb[k] -= g[k] * va[k] / (vb[k] * vb[k]);
      }
      break;
    }
    case Op::kAffine: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * n.c0;
      }
      break;
    }
    case Op::kAddRowVec: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
      }
      if (needs_grad(b)) {
        Tensor& gb = grad_buf(b);
        const std::size_t cols = gb.cols();
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < cols; ++c) gb[c] += g.at(r, c);
      }
      break;
    }
    case Op::kScaleRows: {
      const Tensor& va = value(a);
      const Tensor& vc = value(b);
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          const double w = vc[r];
          for (std::size_t c = 0; c < g.cols(); ++c) ga.at(r, c) += g.at(r, c) * w;
        }
      }
      if (needs_grad(b)) {
        Tensor& gc = grad_buf(b);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          double s = 0.0;
          for (std::size_t c = 0; c < g.cols(); ++c) s += g.at(r, c) * va.at(r, c);
          gc[r] += s;
        }
      }
      break;
    }
    case Op::kSigmoid: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        const Tensor& y = n.value;
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * y[k] * (1.0 - y[k]);
      }
      break;
    }
    case Op::kTanh: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        const Tensor& y = n.value;
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * (1.0 - y[k] * y[k]);
      }
      break;
    }
    case Op::kLeakyRelu: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        const Tensor& x = value(a);
        for (std::size_t k = 0; k < g.size(); ++k)
          ga[k] += g[k] * (x[k] < 0.0 ? n.c0 : 1.0);
      }
      break;
    }
    case Op::kLog1pExp: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        const Tensor& x = value(a);
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * stable_sigmoid(x[k]);
      }
      break;
    }
    case Op::kExp: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        const Tensor& y = n.value;
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * y[k];
      }
      break;
    }
    case Op::kLog: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        const Tensor& x = value(a);
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] / x[k];
      }
      break;
    }
    case Op::kSqrt: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        const Tensor& y = n.value;
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * 0.5 / y[k];
      }
      break;
    }
    case Op::kPowConst: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        const Tensor& x = value(a);
        const double p = n.c0;
        for (std::size_t k = 0; k < g.size(); ++k) {
          double d;
          if (p == 0.0) d = 0.0;
          else if (p == 1.0) d = 1.0;
          else d = p * std::pow(x[k], p - 1.0);
          ga[k] += g[k] * d;
        }
      }
      break;
    }
    case Op::kClampMax: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        const Tensor& x = value(a);
        for (std::size_t k = 0; k < g.size(); ++k)
          if (x[k] < n.c0) ga[k] += g[k];
      }
      break;
    }
    case Op::kMatmul: {
      const Tensor& va = value(a);
      const Tensor& vb = value(b);
      if (needs_grad(a)) {
        // ga += g . vb^T
        Tensor& ga = grad_buf(a);
        for (std::size_t r = 0; r < va.rows(); ++r)
          for (std::size_t c = 0; c < va.cols(); ++c) {
            double s = 0.0;
            const double* pg = g.row_ptr(r);
            const double* pb = vb.row_ptr(c);
            for (std::size_t j = 0; j < g.cols(); ++j) s += pg[j] * pb[j];
            ga.at(r, c) += s;
          }
      }
      if (needs_grad(b)) {
        // gb += va^T . g
        Tensor& gb = grad_buf(b);
        for (std::size_t r = 0; r < va.rows(); ++r) {
          const double* pa = va.row_ptr(r);
          const double* pg = g.row_ptr(r);
          for (std::size_t c = 0; c < va.cols(); ++c) {
            const double av = pa[c];
            if (av == 0.0) continue;
            double* pgb = gb.row_ptr(c);
            for (std::size_t j = 0; j < g.cols(); ++j) pgb[j] += av * pg[j];
          }
        }
      }
      break;
    }
    case Op::kTranspose: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) ga.at(c, r) += g.at(r, c);
      }
      break;
    }
    case Op::kConcatCols: {
      std::size_t off = 0;
      for (VarId p : n.in_list) {
        const std::size_t w = value(p).cols();
        if (needs_grad(p)) {
          Tensor& gp = grad_buf(p);
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < w; ++c) gp.at(r, c) += g.at(r, off + c);
        }
        off += w;
      }
      break;
    }
    case Op::kConcatRows: {
      std::size_t off = 0;
      for (VarId p : n.in_list) {
        const std::size_t rows = value(p).rows();
        if (needs_grad(p)) {
          Tensor& gp = grad_buf(p);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) gp.at(r, c) += g.at(off + r, c);
        }
        off += rows;
      }
      break;
    }
    case Op::kSoftmaxRows: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        const Tensor& y = n.value;
        for (std::size_t r = 0; r < g.rows(); ++r) {
          double dotv = 0.0;
          for (std::size_t c = 0; c < g.cols(); ++c) dotv += g.at(r, c) * y.at(r, c);
          for (std::size_t c = 0; c < g.cols(); ++c)
            ga.at(r, c) += y.at(r, c) * (g.at(r, c) - dotv);
        }
      }
      break;
    }
    case Op::kGatherRows: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        for (std::size_t i2 = 0; i2 < n.idx.size(); ++i2) {
          double* pd = ga.row_ptr(n.idx[i2]);
          const double* pg = g.row_ptr(i2);
          for (std::size_t c = 0; c < g.cols(); ++c) pd[c] += pg[c];
        }
      }
      break;
    }
    case Op::kSliceCols: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        const std::size_t c0 = static_cast<std::size_t>(n.c0);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) ga.at(r, c0 + c) += g.at(r, c);
      }
      break;
    }
    case Op::kSumAll: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        for (double& v : ga.data()) v += g[0];
      }
      break;
    }
    case Op::kMeanAll: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        const double s = g[0] / static_cast<double>(ga.size());
        for (double& v : ga.data()) v += s;
      }
      break;
    }
    case Op::kRowDot: {
      const Tensor& va = value(a);
      const Tensor& vb = value(b);
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        for (std::size_t r = 0; r < va.rows(); ++r)
          for (std::size_t c = 0; c < va.cols(); ++c) ga.at(r, c) += g[r] * vb.at(r, c);
      }
      if (needs_grad(b)) {
        Tensor& gb = grad_buf(b);
        for (std::size_t r = 0; r < va.rows(); ++r)
          for (std::size_t c = 0; c < va.cols(); ++c) gb.at(r, c) += g[r] * va.at(r, c);
      }
      break;
    }
    case Op::kPairDot: {
      const Tensor& va = value(a);
      const Tensor& vb = value(b);
      const std::size_t w = va.cols();
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        for (std::size_t e = 0; e < n.idx.size(); ++e) {
          double* pd = ga.row_ptr(n.idx[e]);
          const double* ps = vb.row_ptr(n.idx2[e]);
          for (std::size_t c = 0; c < w; ++c) pd[c] += g[e] * ps[c];
        }
      }
      if (needs_grad(b)) {
        Tensor& gb = grad_buf(b);
        for (std::size_t e = 0; e < n.idx.size(); ++e) {
          double* pd = gb.row_ptr(n.idx2[e]);
          const double* ps = va.row_ptr(n.idx[e]);
          for (std::size_t c = 0; c < w; ++c) pd[c] += g[e] * ps[c];
        }
      }
      break;
    }
    case Op::kSegmentSoftmax: {
      if (needs_grad(a)) {
        // dx_e = y_e * (g_e - sum_{e' in seg} g_e' y_e')
        Tensor& ga = grad_buf(a);
        const Tensor& y = n.value;
        std::vector<double> seg_dot(n.n_seg, 0.0);
        for (std::size_t e = 0; e < n.idx.size(); ++e) seg_dot[n.idx[e]] += g[e] * y[e];
        for (std::size_t e = 0; e < n.idx.size(); ++e)
          ga[e] += y[e] * (g[e] - seg_dot[n.idx[e]]);
      }
      break;
    }
    case Op::kSegmentWeightedSum: {
      const Tensor& vx = value(a);
      const Tensor& vw = value(b);
      const std::size_t w = vx.cols();
      if (needs_grad(a)) {
        Tensor& gx = grad_buf(a);
        for (std::size_t e = 0; e < n.idx.size(); ++e) {
          double* pd = gx.row_ptr(n.idx[e]);
          const double* pg = g.row_ptr(n.idx2[e]);
          const double we = vw[e];
          for (std::size_t c = 0; c < w; ++c) pd[c] += we * pg[c];
        }
      }
      if (needs_grad(b)) {
        Tensor& gw = grad_buf(b);
        for (std::size_t e = 0; e < n.idx.size(); ++e) {
          const double* px = vx.row_ptr(n.idx[e]);
          const double* pg = g.row_ptr(n.idx2[e]);
          double s = 0.0;
          for (std::size_t c = 0; c < w; ++c) s += px[c] * pg[c];
          gw[e] += s;
        }
      }
      break;
    }
    case Op::kSoftmaxMasked: {
      if (needs_grad(a)) {
        Tensor& ga = grad_buf(a);
        const Tensor& y = n.value;
        double dotv = 0.0;
        for (std::size_t k : n.idx) dotv += g[k] * y[k];
        for (std::size_t k : n.idx) ga[k] += y[k] * (g[k] - dotv);
      }
      break;
    }
  }
}

}  // namespace focal
