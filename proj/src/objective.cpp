#include "focal/objective.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "focal/errors.hpp"
#include "focal/graph_io.hpp"

namespace focal {

VarId asl_loss(Tape& tape, VarId logits, const Tensor& labels, const AslConfig& cfg) {
  cfg.validate();
  const Tensor& z = tape.value(logits);
  if (!z.same_shape(labels))
    throw shape_error("asl_loss: logits " + z.shape_str() + " vs labels " +
                      Tensor(labels).shape_str());

  VarId neg_z = tape.scale(logits, -1.0);
  // Positive part: (1-p)^{g+} * (-log p), with -log p = log1p_exp(-z).
  VarId pos = tape.mul(tape.pow_const(tape.sigmoid(neg_z), cfg.gamma_pos),
                       tape.log1p_exp(neg_z));
  // Negative part: p_m^{g-} * (-log(1-p_m)), p_m = max(p - clip, 0).
  VarId neg;
  if (cfg.clip == 0.0) {
    neg = tape.mul(tape.pow_const(tape.sigmoid(logits), cfg.gamma_neg),
                   tape.log1p_exp(logits));
  } else {
    VarId p_m = tape.relu(tape.affine(tape.sigmoid(logits), 1.0, -cfg.clip));
    // 1 - p_m = min(sigmoid(-z) + clip, 1), bounded away from 0.
    VarId one_minus_pm = tape.clamp_max(tape.affine(tape.sigmoid(neg_z), 1.0, cfg.clip), 1.0);
    neg = tape.mul(tape.pow_const(p_m, cfg.gamma_neg),
                   tape.scale(tape.log_elem(one_minus_pm), -1.0));
  }

  Tensor y = labels;
  Tensor not_y(labels.rows(), labels.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0)
      throw validation_error("asl_loss: labels must be multi-hot (0/1)");
    not_y[i] = 1.0 - labels[i];
  }
  VarId combined = tape.add(tape.mul(tape.constant(std::move(y)), pos),
                            tape.mul(tape.constant(std::move(not_y)), neg));
  return tape.scale(tape.sum_all(combined), 1.0 / static_cast<double>(labels.rows()));
}

VarId consistency_loss(Tape& tape, VarId h_coa, VarId h_aoa) {
  const Tensor& u = tape.value(h_coa);
  const Tensor& v = tape.value(h_aoa);
  if (!u.same_shape(v))
    throw shape_error("consistency_loss: shapes differ: " + u.shape_str() + " vs " +
                      v.shape_str());
  const std::size_t n = u.rows();
  if (n == 0) throw shape_error("consistency_loss: empty input");

  std::vector<std::size_t> nonzero;
  std::size_t zero_rows = 0;
  for (std::size_t r = 0; r < n; ++r) {
    double su = 0.0, sv = 0.0;
    for (std::size_t c = 0; c < u.cols(); ++c) {
      su += u.at(r, c) * u.at(r, c);
      sv += v.at(r, c) * v.at(r, c);
    }
    if (su == 0.0 || sv == 0.0) ++zero_rows;
    else nonzero.push_back(r);
  }
  if (zero_rows > 0)
    std::cerr << "warning: consistency_loss: " << zero_rows
              << " zero embedding row(s) count as maximally inconsistent\n";
  const double zero_share = static_cast<double>(zero_rows) / static_cast<double>(n);
  if (nonzero.empty()) return tape.constant(Tensor::scalar(zero_share));

  VarId uu = tape.gather_rows(h_coa, nonzero);
  VarId vv = tape.gather_rows(h_aoa, nonzero);
  VarId cos = tape.div(tape.row_dot(uu, vv),
                       tape.mul(tape.sqrt_elem(tape.row_dot(uu, uu)),
                                tape.sqrt_elem(tape.row_dot(vv, vv))));
  VarId sum = tape.sum_all(tape.affine(cos, -1.0, 1.0));  // sum of (1 - cos)
  return tape.affine(sum, 1.0 / static_cast<double>(n), zero_share);
}

VarId total_loss(Tape& tape, VarId asl, VarId consist, double lambda) {
  return tape.add(asl, tape.scale(consist, lambda));
}

Tensor predict(const Tensor& logits, double threshold) {
  Tensor out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = logits[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-logits[i]))
                                      : std::exp(logits[i]) / (1.0 + std::exp(logits[i]));
    out[i] = p >= threshold ? 1.0 : 0.0;
  }
  return out;
}

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double f1_from_counts(double tp, double fp, double fn) {
  return safe_div(2.0 * tp, 2.0 * tp + fp + fn);
}

}  // namespace

MetricsReport metrics(const Tensor& y_true, const Tensor& y_pred) {
  if (!y_true.same_shape(y_pred))
    throw shape_error("metrics: shapes differ: " + y_true.shape_str() + " vs " +
                      y_pred.shape_str());
  for (std::size_t i = 0; i < y_true.size(); ++i)
    if ((y_true[i] != 0.0 && y_true[i] != 1.0) || (y_pred[i] != 0.0 && y_pred[i] != 1.0))
      throw validation_error("metrics: entries must be binary");

  const std::size_t n = y_true.rows(), C = y_true.cols();
  MetricsReport rep;
  double tp = 0, fp = 0, fn = 0;
  double disagreements = 0, exact_rows = 0, sample_f1_sum = 0;
  std::vector<double> ctp(C, 0), cfp(C, 0), cfn(C, 0);

  for (std::size_t r = 0; r < n; ++r) {
    double rtp = 0, rfp = 0, rfn = 0;
    for (std::size_t c = 0; c < C; ++c) {
      const bool t = y_true.at(r, c) == 1.0;
      const bool p = y_pred.at(r, c) == 1.0;
      if (t && p) { ++ctp[c]; ++rtp; }
      else if (!t && p) { ++cfp[c]; ++rfp; }
      else if (t && !p) { ++cfn[c]; ++rfn; }
      if (t != p) ++disagreements;
    }
    if (rfp == 0 && rfn == 0 && rtp == 0) sample_f1_sum += 1.0;  // both label sets empty
    else sample_f1_sum += f1_from_counts(rtp, rfp, rfn);
    if (rfp == 0 && rfn == 0) ++exact_rows;
  }
  for (std::size_t c = 0; c < C; ++c) {
    tp += ctp[c];
    fp += cfp[c];
    fn += cfn[c];
    rep.macro_f1 += f1_from_counts(ctp[c], cfp[c], cfn[c]);
    rep.macro_precision += safe_div(ctp[c], ctp[c] + cfp[c]);
    rep.macro_recall += safe_div(ctp[c], ctp[c] + cfn[c]);
  }
  rep.micro_f1 = f1_from_counts(tp, fp, fn);
  rep.micro_precision = safe_div(tp, tp + fp);
  rep.micro_recall = safe_div(tp, tp + fn);
  rep.macro_f1 /= static_cast<double>(C);
  rep.macro_precision /= static_cast<double>(C);
  rep.macro_recall /= static_cast<double>(C);
  rep.sample_f1 = n ? sample_f1_sum / static_cast<double>(n) : 0.0;
  rep.hamming_loss = n ? disagreements / static_cast<double>(n * C) : 0.0;
  rep.subset_accuracy = n ? exact_rows / static_cast<double>(n) : 0.0;
  return rep;
}

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os << "micro_f1 = " << format_double(micro_f1) << "\n";
  os << "macro_f1 = " << format_double(macro_f1) << "\n";
  os << "sample_f1 = " << format_double(sample_f1) << "\n";
  os << "hamming_loss = " << format_double(hamming_loss) << "\n";
  os << "subset_accuracy = " << format_double(subset_accuracy) << "\n";
  os << "micro_precision = " << format_double(micro_precision) << "\n";
  os << "macro_precision = " << format_double(macro_precision) << "\n";
  os << "micro_recall = " << format_double(micro_recall) << "\n";
  os << "macro_recall = " << format_double(macro_recall) << "\n";
  return os.str();
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["micro_f1"] = micro_f1;
  j["macro_f1"] = macro_f1;
  j["sample_f1"] = sample_f1;
  j["hamming_loss"] = hamming_loss;
  j["subset_accuracy"] = subset_accuracy;
  j["micro_precision"] = micro_precision;
  j["macro_precision"] = macro_precision;
  j["micro_recall"] = micro_recall;
  j["macro_recall"] = macro_recall;
  return j.dump(2);
}

MetricsReport MetricsReport::from_text(const std::string& text) {
  MetricsReport rep;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    std::string value = line.substr(eq + 1);
    std::size_t b = value.find_first_not_of(' ');
    if (b == std::string::npos) continue;
    const double v = parse_double(value.substr(b));
    if (key == "micro_f1") rep.micro_f1 = v;
    else if (key == "macro_f1") rep.macro_f1 = v;
    else if (key == "sample_f1") rep.sample_f1 = v;
    else if (key == "hamming_loss") rep.hamming_loss = v;
    else if (key == "subset_accuracy") rep.subset_accuracy = v;
    else if (key == "micro_precision") rep.micro_precision = v;
    else if (key == "macro_precision") rep.macro_precision = v;
    else if (key == "micro_recall") rep.micro_recall = v;
    else if (key == "macro_recall") rep.macro_recall = v;
    else throw parse_error("metrics file: unknown key '" + key + "'");
  }
  return rep;
}

}  // namespace focal
