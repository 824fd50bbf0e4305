#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace focal {

// Asymmetric multi-label loss parameters (positive/negative focusing
// exponents and the negative probability margin).
struct AslConfig {
  double gamma_pos = 0.0;
  double gamma_neg = 4.0;
  double clip = 0.05;  // probability margin on negatives, in [0, 1)

  void validate() const;
};

struct FocalConfig {
  std::size_t hidden_dim = 16;
  std::size_t out_dim = 16;
  std::size_t num_layers = 2;
  std::size_t coa_heads = 8;
  std::size_t aoa_heads = 2;
  double dropout = 0.5;
  double leaky_slope = 0.01;
  double lr = 0.003;
  double weight_decay = 0.0005;
  std::size_t batch_size = 5120;
  std::size_t patience = 60;
  std::size_t max_epoch = 500;
  std::size_t fanout = 5;  // neighbor cap; active only when batching kicks in
  double lambda = 0.05;    // consistency weight
  double threshold = 0.5;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::string>> metapaths;  // relation-name sequences
  AslConfig asl;

  void validate() const;
  std::string to_text() const;
};

// Planted-structure generator parameters.
struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t num_targets = 500;
  std::size_t num_labels = 5;
  double primary_degree = 3.0;    // mean anchor links per target
  double secondary_degree = 30.0; // mean context links per target
  double rare_rate = 0.0;         // probability a context node is decisive
  double label_cardinality = 2.0; // mean positives per target
  std::size_t feature_dim = 8;    // used for every node type
  double noise_std = 0.0;

  void validate() const;
  std::string to_text() const;
};

// Flat key = value text, '#' comments. Unknown keys are an error.
FocalConfig parse_focal_config(const std::string& text);
FocalConfig load_focal_config(const std::string& path);
SynthConfig parse_synth_config(const std::string& text);
SynthConfig load_synth_config(const std::string& path);

// FNV-1a hash of the canonical text form; recorded in run manifests.
std::string config_hash(const std::string& text);

}  // namespace focal
