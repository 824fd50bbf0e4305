#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "focal/tensor.hpp"

namespace focal {

using NodeTypeId = std::uint32_t;
using RelationTypeId = std::uint32_t;

struct Relation {
  std::string name;
  NodeTypeId src_type = 0;
  NodeTypeId dst_type = 0;
  bool primary = false;
  // Directed edges exactly as stored; symmetric relations list both
  // directions explicitly as separate relations.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
};

struct Splits {
  std::vector<std::uint32_t> train;
  std::vector<std::uint32_t> val;
  std::vector<std::uint32_t> test;
};

// Immutable after construction + validate(); safe for concurrent reads.
struct HetGraph {
  std::vector<std::string> node_type_names;
  std::vector<std::uint32_t> node_counts;   // per type
  std::vector<Relation> relations;
  std::vector<Tensor> features;             // per type: node_count x feature dim
  NodeTypeId target_type = 0;
  Tensor labels;                            // target count x C, entries in {0,1}
  Splits splits;

  std::uint32_t num_node_types() const { return static_cast<std::uint32_t>(node_type_names.size()); }
  std::uint32_t num_relations() const { return static_cast<std::uint32_t>(relations.size()); }
  std::uint32_t num_classes() const { return static_cast<std::uint32_t>(labels.cols()); }
  std::uint32_t num_targets() const { return node_counts[target_type]; }
  std::uint32_t total_nodes() const;

  NodeTypeId node_type_id(const std::string& name) const;       // throws validation_error
  RelationTypeId relation_id(const std::string& name) const;    // throws validation_error

  // Global node numbering used by the model: types laid out consecutively.
  std::uint32_t type_offset(NodeTypeId t) const;
  std::uint32_t global_index(NodeTypeId t, std::uint32_t local) const {
    return type_offset(t) + local;
  }

  // Checks every structural invariant; throws validation_error naming the
  // offending relation/row on failure.
  void validate() const;
};

// One coverage-neighborhood entry: an in-neighbor of the target reached via
// `relation`; the neighbor's type is that relation's src type. Duplicate
// edges yield duplicate entries.
struct CoverageEntry {
  RelationTypeId relation;
  std::uint32_t node;  // local index within the relation's src type
};

// Unconstrained heterogeneous neighborhood of target node t: all typed
// one-hop in-neighbors over every relation whose dst type is the target
// type. t itself is excluded unless an explicit self-loop edge exists.
std::vector<CoverageEntry> coverage_neighborhood(const HetGraph& g, std::uint32_t t);

// Ordered relation sequence with a consistent type chain starting at the
// target type.
struct MetaPath {
  std::string name;                         // display form, e.g. "t-a.a-t"
  std::vector<RelationTypeId> relation_ids;

  bool primary(const HetGraph& g) const;    // all relations primary
};

// Builds a meta-path from relation names and checks chain consistency.
MetaPath make_metapath(const HetGraph& g, const std::vector<std::string>& relation_names);

// Deduplicated set of terminal nodes of all walks following p from t,
// sorted ascending. Empty when t has no complete walk.
std::vector<std::uint32_t> metapath_neighborhood(const HetGraph& g, const MetaPath& p,
                                                 std::uint32_t t);

// Per type/relation counts, label density, split sizes.
struct GraphSummary {
  std::vector<std::pair<std::string, std::uint32_t>> nodes_per_type;
  std::vector<std::pair<std::string, std::size_t>> edges_per_relation;
  std::uint32_t num_classes = 0;
  double label_density = 0.0;  // fraction of ones in the label matrix
  double mean_label_cardinality = 0.0;
  std::size_t train_size = 0, val_size = 0, test_size = 0;

  std::string to_text() const;
};

GraphSummary describe(const HetGraph& g);

}  // namespace focal
