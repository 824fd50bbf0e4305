#include <doctest.h>

#include <cmath>

#include "focal/errors.hpp"
#include "focal/hetgraph.hpp"
#include "focal/synthgen.hpp"

using namespace focal;

TEST_SUITE_BEGIN("synthgen");

namespace {

bool graphs_equal(const HetGraph& a, const HetGraph& b) {
  if (a.node_type_names != b.node_type_names || a.node_counts != b.node_counts) return false;
  if (a.relations.size() != b.relations.size()) return false;
  for (std::size_t r = 0; r < a.relations.size(); ++r)
    if (a.relations[r].edges != b.relations[r].edges) return false;
  for (std::size_t t = 0; t < a.features.size(); ++t)
    if (!(a.features[t] == b.features[t])) return false;
  return a.labels == b.labels && a.splits.train == b.splits.train &&
         a.splits.val == b.splits.val && a.splits.test == b.splits.test;
}

}  // namespace

TEST_CASE("same seed twice gives bit-identical graphs") {
  SynthConfig cfg;
  cfg.seed = 7;
  cfg.num_targets = 120;
  cfg.rare_rate = 0.2;
  cfg.noise_std = 0.5;
  HetGraph a = generate(cfg);
  HetGraph b = generate(cfg);
  CHECK(graphs_equal(a, b));
  cfg.seed = 8;
  CHECK_FALSE(graphs_equal(a, generate(cfg)));
}

TEST_CASE("generated graph validates and has the planted layout") {
  SynthConfig cfg;
  cfg.seed = 3;
  cfg.num_targets = 200;
  HetGraph g = generate(cfg);
  CHECK_NOTHROW(g.validate());
  CHECK(g.node_type_names.size() == 3);
  CHECK(g.relations.size() == 4);
  CHECK(g.relations[g.relation_id(kSynthAnchorToTarget)].primary);
  CHECK_FALSE(g.relations[g.relation_id(kSynthContextToTarget)].primary);
  // both directions stored
  CHECK(g.relations[g.relation_id(kSynthAnchorToTarget)].edges.size() ==
        g.relations[g.relation_id(kSynthTargetToAnchor)].edges.size());
  // 70/15/15
  CHECK(g.splits.train.size() == 140);
  CHECK(g.splits.val.size() == 30);
  CHECK(g.splits.test.size() == 30);
}

TEST_CASE("noiseless rare-free labels are exactly recoverable from primary neighbors") {
  SynthConfig cfg;
  cfg.seed = 11;
  cfg.num_targets = 300;
  cfg.noise_std = 0.0;
  cfg.rare_rate = 0.0;
  HetGraph g = generate(cfg);

  // Oracle classifier: per-label prototype projection of the mean anchor
  // feature; positive iff the projection is positive.
  const Relation& at = g.relations[g.relation_id(kSynthAnchorToTarget)];
  const Tensor& anchor_feat = g.features[g.node_type_id(kSynthAnchorType)];
  double tp = 0, fp = 0, fn = 0;
  for (std::uint32_t t = 0; t < g.num_targets(); ++t) {
    Tensor agg(1, cfg.feature_dim);
    std::size_t count = 0;
    for (const auto& e : at.edges)
      if (e.second == t) {
        for (std::size_t c = 0; c < cfg.feature_dim; ++c) agg[c] += anchor_feat.at(e.first, c);
        ++count;
      }
    for (std::size_t k = 0; k < cfg.num_labels; ++k) {
      Tensor proto = synth_prototype(k, cfg.feature_dim);
      double proj = 0.0;
      for (std::size_t c = 0; c < cfg.feature_dim; ++c) proj += agg[c] * proto[c];
      const bool pred = count > 0 && proj > 0.0;
      const bool truth = g.labels.at(t, k) == 1.0;
      if (pred && truth) ++tp;
      else if (pred) ++fp;
      else if (truth) ++fn;
    }
  }
  const double micro_f1 = 2 * tp / (2 * tp + fp + fn);
  CHECK(micro_f1 == 1.0);
}

TEST_CASE("mean label cardinality tracks the configured value") {
  SynthConfig cfg;
  cfg.seed = 5;
  cfg.num_targets = 500;
  cfg.primary_degree = 3;
  cfg.secondary_degree = 30;
  cfg.num_labels = 5;
  cfg.label_cardinality = 2.0;
  cfg.rare_rate = 0.0;
  HetGraph g = generate(cfg);
  double ones = 0;
  for (std::size_t i = 0; i < g.labels.size(); ++i) ones += g.labels[i];
  const double mean_card = ones / static_cast<double>(g.num_targets());
  CHECK(std::abs(mean_card - cfg.label_cardinality) <= 0.5);
}

TEST_CASE("config invariants enforced") {
  SynthConfig cfg;
  cfg.rare_rate = 1.5;
  CHECK_THROWS_AS(generate(cfg), validation_error);
  cfg.rare_rate = 0.5;
  cfg.noise_std = -1.0;
  CHECK_THROWS_AS(generate(cfg), validation_error);
}

TEST_CASE("describe on a generated graph") {
  SynthConfig cfg;
  cfg.seed = 9;
  cfg.num_targets = 80;
  HetGraph g = generate(cfg);
  GraphSummary s = describe(g);
  CHECK(s.nodes_per_type[0].second == 80);
  CHECK(s.train_size + s.val_size + s.test_size == 80);
  CHECK(s.mean_label_cardinality > 0.0);
}

TEST_SUITE_END();
