#include "focal/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "focal/rng.hpp"

namespace focal {

namespace {

constexpr double kPrototypeScale = 2.0;
// Targets echo their anchor-driven labels only faintly; recovering them
// cleanly requires the anchored neighborhood.
constexpr double kTargetSignalScale = 0.5;

// Stream ids; fixed so generated graphs are stable across code motion.
enum Stream : std::uint64_t {
  kStreamAnchors = 1,
  kStreamContext = 2,
  kStreamTargets = 3,
  kStreamLinks = 4,
  kStreamSplits = 5,
};

void fill_noise(Tensor& t, std::size_t row, double std_dev, SplitMix64& rng) {
  for (std::size_t c = 0; c < t.cols(); ++c) t.at(row, c) += std_dev * rng.next_gaussian();
}

}  // namespace

Tensor synth_prototype(std::size_t label, std::size_t feature_dim) {
  Tensor p(1, feature_dim);
  p[label % feature_dim] = kPrototypeScale;
  return p;
}

std::vector<std::vector<std::string>> synth_primary_metapaths() {
  return {{kSynthTargetToAnchor, kSynthAnchorToTarget}, {kSynthTargetToAnchor}};
}

HetGraph generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t C = cfg.num_labels;
  const std::size_t d = cfg.feature_dim;
  const std::size_t n = cfg.num_targets;

  // Anchor pool sized so each anchor serves roughly 25 targets; keeps
  // meta-path neighborhoods informative without blowing up pair counts.
  const std::size_t anchors_per_label = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::llround(
             static_cast<double>(n) * cfg.primary_degree / (static_cast<double>(C) * 25.0))));
  const std::size_t num_anchors = C * anchors_per_label;
  const std::size_t num_context = std::max<std::size_t>(4, n / 4);

  HetGraph g;
  g.node_type_names = {kSynthTargetType, kSynthAnchorType, kSynthContextType};
  g.node_counts = {static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(num_anchors),
                   static_cast<std::uint32_t>(num_context)};
  g.target_type = 0;
  g.relations.resize(4);
  g.relations[0] = {kSynthAnchorToTarget, 1, 0, true, {}};
  g.relations[1] = {kSynthTargetToAnchor, 0, 1, true, {}};
  g.relations[2] = {kSynthContextToTarget, 2, 0, false, {}};
  g.relations[3] = {kSynthTargetToContext, 0, 2, false, {}};

  // Anchor features: label k lives on anchors {k, k+C, k+2C, ...}.
  Tensor anchor_feat(num_anchors, d);
  {
    SplitMix64 rng = rng_stream(cfg.seed, kStreamAnchors);
    for (std::size_t a = 0; a < num_anchors; ++a) {
      const Tensor proto = synth_prototype(a % C, d);
      for (std::size_t c = 0; c < d; ++c) anchor_feat.at(a, c) = proto[c];
      fill_noise(anchor_feat, a, cfg.noise_std, rng);
    }
  }

  // Context pool: mostly noise carriers, decisive nodes carry a prototype.
  Tensor context_feat(num_context, d);
  std::vector<int> context_label(num_context, -1);
  {
    SplitMix64 rng = rng_stream(cfg.seed, kStreamContext);
    for (std::size_t j = 0; j < num_context; ++j) {
      const bool decisive = rng.next_unit() < cfg.rare_rate;
      const std::size_t lbl = static_cast<std::size_t>(rng.next_below(C));
      if (decisive) {
        context_label[j] = static_cast<int>(lbl);
        const Tensor proto = synth_prototype(lbl, d);
        for (std::size_t c = 0; c < d; ++c) context_feat.at(j, c) = proto[c];
      }
      fill_noise(context_feat, j, cfg.noise_std, rng);
    }
  }

  g.labels = Tensor(n, C);
  const double card_floor = std::floor(cfg.label_cardinality);
  const double card_frac = cfg.label_cardinality - card_floor;
  std::vector<std::vector<std::size_t>> anchor_labels(n);

  for (std::size_t t = 0; t < n; ++t) {
    SplitMix64 rng = rng_stream(cfg.seed, kStreamLinks, t);

    std::size_t want = static_cast<std::size_t>(card_floor) + (rng.next_unit() < card_frac ? 1 : 0);
    want = std::min(want, C);

    // Uniform label subset via partial Fisher-Yates.
    std::vector<std::size_t> pool(C);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < want; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.next_below(C - i));
      std::swap(pool[i], pool[j]);
    }
    std::vector<std::size_t> chosen(pool.begin(), pool.begin() + want);
    anchor_labels[t] = chosen;

    std::set<std::size_t> positives(chosen.begin(), chosen.end());

    const std::size_t anchor_links =
        std::max(want, static_cast<std::size_t>(rng.next_poisson(cfg.primary_degree)));
    for (std::size_t i = 0; i < anchor_links && !chosen.empty(); ++i) {
      const std::size_t lbl =
          i < chosen.size() ? chosen[i]
                            : chosen[static_cast<std::size_t>(rng.next_below(chosen.size()))];
      const std::uint32_t a = static_cast<std::uint32_t>(
          lbl + C * static_cast<std::size_t>(rng.next_below(anchors_per_label)));
      g.relations[0].edges.emplace_back(a, static_cast<std::uint32_t>(t));
      g.relations[1].edges.emplace_back(static_cast<std::uint32_t>(t), a);
    }

    const std::size_t context_links =
        static_cast<std::size_t>(rng.next_poisson(cfg.secondary_degree));
    for (std::size_t i = 0; i < context_links; ++i) {
      const std::uint32_t cnode = static_cast<std::uint32_t>(rng.next_below(num_context));
      g.relations[2].edges.emplace_back(cnode, static_cast<std::uint32_t>(t));
      g.relations[3].edges.emplace_back(static_cast<std::uint32_t>(t), cnode);
      if (context_label[cnode] >= 0) positives.insert(static_cast<std::size_t>(context_label[cnode]));
    }

    for (std::size_t k : positives) g.labels.at(t, k) = 1.0;
  }

  // Target features carry only the anchor-driven labels; labels added by
  // decisive context nodes stay invisible outside the context links.
  Tensor target_feat(n, d);
  {
    SplitMix64 rng = rng_stream(cfg.seed, kStreamTargets);
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t k : anchor_labels[t]) {
        const Tensor proto = synth_prototype(k, d);
        for (std::size_t c = 0; c < d; ++c) target_feat.at(t, c) += kTargetSignalScale * proto[c];
      }
      fill_noise(target_feat, t, cfg.noise_std, rng);
    }
  }

  g.features = {std::move(target_feat), std::move(anchor_feat), std::move(context_feat)};

  // 70/15/15 split by shuffled index.
  {
    SplitMix64 rng = rng_stream(cfg.seed, kStreamSplits);
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
      std::swap(order[i - 1], order[j]);
    }
    const std::size_t n_train = static_cast<std::size_t>(0.70 * static_cast<double>(n));
    const std::size_t n_val = static_cast<std::size_t>(0.15 * static_cast<double>(n));
    g.splits.train.assign(order.begin(), order.begin() + n_train);
    g.splits.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    g.splits.test.assign(order.begin() + n_train + n_val, order.end());
  }

  g.validate();
  return g;
}

}  // namespace focal
