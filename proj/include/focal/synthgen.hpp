#pragma once

#include "focal/config.hpp"
#include "focal/hetgraph.hpp"

namespace focal {

// Node/relation layout of generated graphs.
inline constexpr const char* kSynthTargetType = "target";
inline constexpr const char* kSynthAnchorType = "anchor";
inline constexpr const char* kSynthContextType = "context";
inline constexpr const char* kSynthAnchorToTarget = "anchor-target";
inline constexpr const char* kSynthTargetToAnchor = "target-anchor";
inline constexpr const char* kSynthContextToTarget = "context-target";
inline constexpr const char* kSynthTargetToContext = "target-context";

// Planted-structure generator. Three node types (target, anchor, context);
// anchor relations are primary, context relations secondary, and both
// directions of each relation are stored. Every label k owns a prototype
// vector (orthogonal basis directions when feature_dim >= num_labels); a
// target is positive for k iff it links to an anchor carrying k or to a
// decisive context node carrying k. Anchor and decisive-context features
// are prototype + N(0, noise_std); target features are the sum of their
// anchor-driven label prototypes + noise (labels contributed by decisive
// context stay invisible outside the context links); plain context
// features are pure noise. Pure function of cfg: same config, same graph,
// bit for bit.
HetGraph generate(const SynthConfig& cfg);

// The meta-paths the generator plants: the anchored 2-step cycle plus its
// 1-step prefix.
std::vector<std::vector<std::string>> synth_primary_metapaths();

// Label prototype used by the generator and by oracle classifiers.
Tensor synth_prototype(std::size_t label, std::size_t feature_dim);

}  // namespace focal
