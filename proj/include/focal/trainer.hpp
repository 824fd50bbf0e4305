#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "focal/model.hpp"
#include "focal/objective.hpp"

namespace focal {

// Adaptive moment estimation with decoupled weight decay
// (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
class AdamW {
 public:
  AdamW(double lr, double weight_decay) : lr_(lr), weight_decay_(weight_decay) {}

  void step(std::vector<ParamRef>& params, const std::vector<Tensor>& grads);

 private:
  double lr_;
  double weight_decay_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  MetricsReport val;
};

struct TrainReport {
  std::vector<EpochRecord> history;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_val_micro_f1 = 0.0;
  MetricsReport test;
  double wall_time_seconds = 0.0;  // excluded from determinism comparisons

  std::string to_text() const;
};

struct TrainResult {
  FocalParams params;  // best-validation parameters
  TrainReport report;
};

// Full-batch gradient steps (mini-batched with optional fanout sampling
// only when the training split exceeds batch_size), early stopping on
// validation Micro-F1 with `patience`, best parameters restored.
// Throws numeric_error naming the epoch if the loss diverges.
TrainResult train(const HetGraph& g, const FocalConfig& cfg,
                  AblationMode mode = AblationMode::kFull);

// Side-effect-free evaluation on a split; empty split is an error.
MetricsReport evaluate(const FocalParams& params, const HetGraph& g, const FocalConfig& cfg,
                       const std::vector<std::uint32_t>& split,
                       AblationMode mode = AblationMode::kFull);

struct SeedRun {
  std::uint64_t seed = 0;
  MetricsReport test;
};

struct AggregateMetrics {
  MetricsReport mean;
  MetricsReport stddev;  // sample standard deviation (n - 1)
  std::vector<SeedRun> runs;
};

// Mean and sample std of test metrics over per-seed runs. Runs execute in
// parallel up to max_threads workers; results are aggregated in seed-list
// order, so the outcome is independent of thread count.
AggregateMetrics multi_seed_train(const HetGraph& g, const FocalConfig& cfg,
                                  const std::vector<std::uint64_t>& seeds,
                                  AblationMode mode = AblationMode::kFull,
                                  std::size_t max_threads = 1);

AggregateMetrics aggregate_metrics(const std::vector<SeedRun>& runs);

// Worker cap from the FOCAL_THREADS environment variable (default 1).
std::size_t focal_threads();

}  // namespace focal
