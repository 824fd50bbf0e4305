#pragma once

#include <string>

#include "focal/config.hpp"
#include "focal/tape.hpp"

namespace focal {

// Asymmetric multi-label loss: mean over rows of
//   sum_k [ y (1-p)^{g+} (-log p) + (1-y) p_m^{g-} (-log(1-p_m)) ]
// with p = sigmoid(z) and p_m = max(p - clip, 0). Everything is computed
// through stable log1p_exp/sigmoid forms; with g+ = g- = 0 and clip = 0 it
// is exactly mean binary cross-entropy.
VarId asl_loss(Tape& tape, VarId logits, const Tensor& labels, const AslConfig& cfg);

// (1/n) sum_rows (1 - cos(h_coa, h_aoa)). Zero rows contribute the
// constant 1 ("maximally inconsistent") and a warning is written to
// stderr; they carry no gradient.
VarId consistency_loss(Tape& tape, VarId h_coa, VarId h_aoa);

// total = asl + lambda * consistency
VarId total_loss(Tape& tape, VarId asl, VarId consist, double lambda);

// Multi-hot prediction: sigmoid(z) >= threshold (ties count as positive).
Tensor predict(const Tensor& logits, double threshold = 0.5);

struct MetricsReport {
  double micro_f1 = 0, macro_f1 = 0, sample_f1 = 0;
  double hamming_loss = 0, subset_accuracy = 0;
  double micro_precision = 0, macro_precision = 0;
  double micro_recall = 0, macro_recall = 0;

  std::string to_text() const;   // flat key = value block
  std::string to_json() const;
  static MetricsReport from_text(const std::string& text);
};

// Pooled / per-class / per-node confusion statistics. Conventions:
// 0/0 := 0 everywhere except per-node F1, which is 1 when both the true
// and predicted label sets are empty.
MetricsReport metrics(const Tensor& y_true, const Tensor& y_pred);

}  // namespace focal
