#include "focal/trainer.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <thread>

#include "focal/errors.hpp"
#include "focal/graph_io.hpp"
#include "focal/rng.hpp"

namespace focal {

namespace {

enum Stream : std::uint64_t {
  kStreamBatchShuffle = 10,
};

std::vector<std::size_t> split_to_logit_rows(const std::vector<std::uint32_t>& split) {
  return {split.begin(), split.end()};
}

Tensor gather_label_rows(const Tensor& labels, const std::vector<std::uint32_t>& rows) {
  Tensor out(rows.size(), labels.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < labels.cols(); ++c) out.at(i, c) = labels.at(rows[i], c);
  return out;
}

}  // namespace

void AdamW::step(std::vector<ParamRef>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) throw shape_error("AdamW::step: grad list size mismatch");
  if (m_.empty()) {
    for (const ParamRef& p : params) {
      m_.emplace_back(p.tensor->rows(), p.tensor->cols());
      v_.emplace_back(p.tensor->rows(), p.tensor->cols());
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = *params[i].tensor;
    const Tensor& g = grads[i];
    if (!w.same_shape(g))
      throw shape_error("AdamW::step: grad shape mismatch for " + params[i].name);
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      w[k] -= lr_ * (m_hat / (std::sqrt(v_hat) + eps_) + weight_decay_ * w[k]);
    }
  }
}

namespace {

MetricsReport evaluate_on(const FocalParams& params, const HetGraph& g, const FocalConfig& cfg,
                          const ModelStructure& s, const std::vector<std::uint32_t>& split,
                          AblationMode mode);

}  // namespace

MetricsReport evaluate(const FocalParams& params, const HetGraph& g, const FocalConfig& cfg,
                       const std::vector<std::uint32_t>& split, AblationMode mode) {
  if (split.empty()) throw validation_error("evaluate: empty split");
  ModelStructure s = build_structure(g, cfg);
  return evaluate_on(params, g, cfg, s, split, mode);
}

namespace {

MetricsReport evaluate_on(const FocalParams& params, const HetGraph& g, const FocalConfig& cfg,
                          const ModelStructure& s, const std::vector<std::uint32_t>& split,
                          AblationMode mode) {
  if (split.empty()) throw validation_error("evaluate: empty split");
  Tape tape;
  FocalParamVars vars = bind_params(tape, params);
  ForwardOptions opt;
  opt.mode = mode;
  opt.training = false;
  ForwardResult fwd = focal_forward(tape, vars, s, g, cfg, opt);
  const Tensor& logits = tape.value(fwd.logits);
  Tensor rows(split.size(), logits.cols());
  for (std::size_t i = 0; i < split.size(); ++i)
    for (std::size_t c = 0; c < logits.cols(); ++c) rows.at(i, c) = logits.at(split[i], c);
  return metrics(gather_label_rows(g.labels, split), predict(rows, cfg.threshold));
}

}  // namespace

TrainResult train(const HetGraph& g, const FocalConfig& cfg, AblationMode mode) {
  cfg.validate();
  if (g.splits.train.empty() || g.splits.val.empty())
    throw validation_error("train: empty train or val split");
  const auto start = std::chrono::steady_clock::now();

  ModelStructure base_structure = build_structure(g, cfg);
  FocalParams params = init_params(cfg, g, base_structure.primary_paths.size(), cfg.seed);
  auto refs = param_refs(params);
  AdamW opt(cfg.lr, cfg.weight_decay);

  const bool batched = g.splits.train.size() > cfg.batch_size;
  const bool sample_neighbors = batched && cfg.fanout > 0;
  // With dropout off and a full batch the training forward is the
  // evaluation forward, so validation metrics come from the same tape
  // (they then describe the parameters entering the epoch, and the best
  // snapshot is taken before the step that follows).
  const bool shared_forward = !batched && cfg.dropout == 0.0;

  TrainResult result;
  FocalParams best = params;
  std::size_t best_epoch = 0;
  double best_val = -1.0;
  double best_loss = 1e300;  // tie-break: equal val keeps the lower train loss
  std::size_t stale = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epoch; ++epoch) {
    ModelStructure epoch_structure =
        sample_neighbors ? build_structure(g, cfg, cfg.fanout, cfg.seed + epoch)
                         : ModelStructure();
    const ModelStructure& s = sample_neighbors ? epoch_structure : base_structure;

    std::vector<std::uint32_t> order = g.splits.train;
    if (batched) {
      SplitMix64 rng = rng_stream(cfg.seed, kStreamBatchShuffle, epoch);
      for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(order[i - 1], order[j]);
      }
    }
    const std::size_t bs = batched ? cfg.batch_size : order.size();

    double epoch_loss = 0.0;
    MetricsReport shared_val;
    for (std::size_t off = 0; off < order.size(); off += bs) {
      const std::size_t end = std::min(off + bs, order.size());
      std::vector<std::uint32_t> batch(order.begin() + off, order.begin() + end);

      Tape tape;
      FocalParamVars vars = bind_params(tape, params);
      ForwardOptions fopt;
      fopt.mode = mode;
      fopt.training = true;
      fopt.dropout_seed = cfg.seed;
      fopt.epoch = epoch;
      double loss_value = 0.0;
      VarId loss = 0;
      try {
        ForwardResult fwd = focal_forward(tape, vars, s, g, cfg, fopt);
        if (shared_forward) {
          const Tensor& logits = tape.value(fwd.logits);
          Tensor rows(g.splits.val.size(), logits.cols());
          for (std::size_t i = 0; i < g.splits.val.size(); ++i)
            for (std::size_t c = 0; c < logits.cols(); ++c)
              rows.at(i, c) = logits.at(g.splits.val[i], c);
          shared_val = metrics(gather_label_rows(g.labels, g.splits.val),
                               predict(rows, cfg.threshold));
        }
        VarId batch_logits = tape.gather_rows(fwd.logits, split_to_logit_rows(batch));
        loss = asl_loss(tape, batch_logits, gather_label_rows(g.labels, batch), cfg.asl);
        if (mode == AblationMode::kFull && cfg.lambda > 0.0) {
          VarId hc = tape.gather_rows(fwd.h_coa_final, split_to_logit_rows(batch));
          VarId ha = tape.gather_rows(fwd.h_aoa_final, split_to_logit_rows(batch));
          loss = total_loss(tape, loss, consistency_loss(tape, hc, ha), cfg.lambda);
        }
        loss_value = tape.value(loss)[0];
        tape.backward(loss);
      } catch (const numeric_error& e) {
        throw numeric_error("training diverged at epoch " + std::to_string(epoch) + ": " +
                            e.what());
      }
      if (!std::isfinite(loss_value))
        throw numeric_error("training diverged at epoch " + std::to_string(epoch));
      epoch_loss += loss_value * static_cast<double>(batch.size());

      EpochRecord rec;
      rec.epoch = epoch;
      if (shared_forward) {
        // Record and early-stop on the pre-step state, then apply the step.
        rec.train_loss = loss_value;
        rec.val = shared_val;
        result.report.history.push_back(rec);
        result.report.epochs_run = epoch + 1;
        if (rec.val.micro_f1 > best_val ||
            (rec.val.micro_f1 == best_val && rec.train_loss < best_loss)) {
          if (rec.val.micro_f1 > best_val) stale = 0;
          else ++stale;
          best_val = rec.val.micro_f1;
          best_loss = rec.train_loss;
          best = params;
          best_epoch = epoch;
        } else {
          ++stale;
        }
      }

      std::vector<Tensor> grads;
      grads.reserve(vars.flat.size());
      for (VarId id : vars.flat) grads.push_back(tape.grad(id));
      opt.step(refs, grads);
    }
    if (shared_forward) {
      if (stale >= cfg.patience) break;
      continue;
    }
    epoch_loss /= static_cast<double>(order.size());

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss;
    rec.val = evaluate_on(params, g, cfg, base_structure, g.splits.val, mode);
    result.report.history.push_back(rec);
    result.report.epochs_run = epoch + 1;

    if (rec.val.micro_f1 > best_val ||
        (rec.val.micro_f1 == best_val && rec.train_loss < best_loss)) {
      if (rec.val.micro_f1 > best_val) stale = 0;
      else ++stale;
      best_val = rec.val.micro_f1;
      best_loss = rec.train_loss;
      best = params;
      best_epoch = epoch;
      if (stale >= cfg.patience) break;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }

  result.params = std::move(best);
  result.report.best_epoch = best_epoch;
  result.report.best_val_micro_f1 = best_val;
  if (!g.splits.test.empty())
    result.report.test = evaluate_on(result.params, g, cfg, base_structure, g.splits.test, mode);
  result.report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string TrainReport::to_text() const {
  std::ostringstream os;
  os << "epochs_run = " << epochs_run << "\n";
  os << "best_epoch = " << best_epoch << "\n";
  os << "best_val_micro_f1 = " << format_double(best_val_micro_f1) << "\n";
  std::istringstream test_text(test.to_text());
  std::string line;
  while (std::getline(test_text, line)) os << "test." << line << "\n";
  for (const EpochRecord& r : history)
    os << "epoch " << r.epoch << " train_loss " << format_double(r.train_loss)
       << " val_micro_f1 " << format_double(r.val.micro_f1) << "\n";
  return os.str();
}

AggregateMetrics aggregate_metrics(const std::vector<SeedRun>& runs) {
  if (runs.size() < 2) throw validation_error("aggregate_metrics: need at least 2 runs");
  AggregateMetrics agg;
  agg.runs = runs;
  const double n = static_cast<double>(runs.size());
  auto fields = [](MetricsReport& r) {
    return std::array<double*, 9>{&r.micro_f1,       &r.macro_f1,        &r.sample_f1,
                                  &r.hamming_loss,   &r.subset_accuracy, &r.micro_precision,
                                  &r.macro_precision, &r.micro_recall,    &r.macro_recall};
  };
  auto cfields = [&](const MetricsReport& r) {
    return fields(const_cast<MetricsReport&>(r));
  };
  auto mean_ptrs = fields(agg.mean);
  auto std_ptrs = fields(agg.stddev);
  for (const SeedRun& run : runs) {
    auto vals = cfields(run.test);
    for (std::size_t i = 0; i < vals.size(); ++i) *mean_ptrs[i] += *vals[i] / n;
  }
  for (const SeedRun& run : runs) {
    auto vals = cfields(run.test);
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double d = *vals[i] - *mean_ptrs[i];
      *std_ptrs[i] += d * d;
    }
  }
  for (std::size_t i = 0; i < std_ptrs.size(); ++i)
    *std_ptrs[i] = std::sqrt(*std_ptrs[i] / (n - 1.0));
  return agg;
}

AggregateMetrics multi_seed_train(const HetGraph& g, const FocalConfig& cfg,
                                  const std::vector<std::uint64_t>& seeds, AblationMode mode,
                                  std::size_t max_threads) {
  if (seeds.size() < 2) throw validation_error("multi_seed_train: need at least 2 seeds");
  std::vector<SeedRun> runs(seeds.size());
  std::vector<std::string> failures(seeds.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(max_threads, seeds.size()));

  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= seeds.size()) return;
      try {
        FocalConfig run_cfg = cfg;
        run_cfg.seed = seeds[i];
        TrainResult res = train(g, run_cfg, mode);
        runs[i] = {seeds[i], res.report.test};
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  for (std::size_t i = 0; i < seeds.size(); ++i)
    if (!failures[i].empty())
      throw numeric_error("seed " + std::to_string(seeds[i]) + " failed: " + failures[i]);
  return aggregate_metrics(runs);
}

std::size_t focal_threads() {
  const char* env = std::getenv("FOCAL_THREADS");
  if (!env) return 1;
  const long v = std::atol(env);
  return v > 0 ? static_cast<std::size_t>(v) : 1;
}

}  // namespace focal
