#include "focal/hetgraph.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "focal/errors.hpp"

namespace focal {

std::uint32_t HetGraph::total_nodes() const {
  std::uint32_t n = 0;
  for (std::uint32_t c : node_counts) n += c;
  return n;
}

NodeTypeId HetGraph::node_type_id(const std::string& name) const {
  for (std::size_t i = 0; i < node_type_names.size(); ++i)
    if (node_type_names[i] == name) return static_cast<NodeTypeId>(i);
  throw validation_error("unknown node type: " + name);
}

RelationTypeId HetGraph::relation_id(const std::string& name) const {
  for (std::size_t i = 0; i < relations.size(); ++i)
    if (relations[i].name == name) return static_cast<RelationTypeId>(i);
  throw validation_error("unknown relation: " + name);
}

std::uint32_t HetGraph::type_offset(NodeTypeId t) const {
  std::uint32_t off = 0;
  for (NodeTypeId i = 0; i < t; ++i) off += node_counts[i];
  return off;
}

void HetGraph::validate() const {
  if (node_type_names.empty()) throw validation_error("graph has no node types");
  if (node_type_names.size() != node_counts.size())
    throw validation_error("node type/count tables differ in length");
  if (features.size() != node_type_names.size())
    throw validation_error("feature table missing for some node type");
  for (std::size_t t = 0; t < features.size(); ++t) {
    if (features[t].rows() != node_counts[t])
      throw validation_error("features for type '" + node_type_names[t] + "': " +
                             std::to_string(features[t].rows()) + " rows, expected " +
                             std::to_string(node_counts[t]));
    if (!features[t].all_finite())
      throw validation_error("features for type '" + node_type_names[t] +
                             "' contain non-finite values");
  }
  for (const Relation& r : relations) {
    if (r.src_type >= node_type_names.size() || r.dst_type >= node_type_names.size())
      throw validation_error("relation '" + r.name + "' references unknown node type");
    for (std::size_t e = 0; e < r.edges.size(); ++e) {
      if (r.edges[e].first >= node_counts[r.src_type])
        throw validation_error("relation '" + r.name + "' edge row " + std::to_string(e) +
                               ": src index " + std::to_string(r.edges[e].first) +
                               " out of range for type '" + node_type_names[r.src_type] + "'");
      if (r.edges[e].second >= node_counts[r.dst_type])
        throw validation_error("relation '" + r.name + "' edge row " + std::to_string(e) +
                               ": dst index " + std::to_string(r.edges[e].second) +
                               " out of range for type '" + node_type_names[r.dst_type] + "'");
    }
  }
  if (target_type >= node_type_names.size())
    throw validation_error("target type id out of range");
  if (labels.rows() != node_counts[target_type])
    throw validation_error("label matrix has " + std::to_string(labels.rows()) +
                           " rows, expected " + std::to_string(node_counts[target_type]));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != 0.0 && labels[i] != 1.0)
      throw validation_error("label matrix entry " + std::to_string(i) + " is not in {0,1}");

  std::set<std::uint32_t> seen;
  auto check_split = [&](const std::vector<std::uint32_t>& s, const char* name) {
    for (std::uint32_t i : s) {
      if (i >= num_targets())
        throw validation_error(std::string("split '") + name + "' index " + std::to_string(i) +
                               " out of range");
      if (!seen.insert(i).second)
        throw validation_error(std::string("split '") + name + "' overlaps another split at index " +
                               std::to_string(i));
    }
  };
  check_split(splits.train, "train");
  check_split(splits.val, "val");
  check_split(splits.test, "test");
}

std::vector<CoverageEntry> coverage_neighborhood(const HetGraph& g, std::uint32_t t) {
  if (t >= g.num_targets())
    throw validation_error("coverage_neighborhood: target index " + std::to_string(t) +
                           " out of range");
  std::vector<CoverageEntry> out;
  for (RelationTypeId r = 0; r < g.num_relations(); ++r) {
    const Relation& rel = g.relations[r];
    if (rel.dst_type != g.target_type) continue;
    for (const auto& e : rel.edges)
      if (e.second == t) out.push_back({r, e.first});
  }
  return out;
}

bool MetaPath::primary(const HetGraph& g) const {
  for (RelationTypeId r : relation_ids)
    if (!g.relations[r].primary) return false;
  return true;
}

MetaPath make_metapath(const HetGraph& g, const std::vector<std::string>& relation_names) {
  if (relation_names.empty()) throw validation_error("meta-path must be non-empty");
  MetaPath p;
  for (const std::string& name : relation_names) {
    if (!p.name.empty()) p.name += ".";
    p.name += name;
    p.relation_ids.push_back(g.relation_id(name));
  }
  NodeTypeId expect = g.target_type;
  for (RelationTypeId r : p.relation_ids) {
    const Relation& rel = g.relations[r];
    if (rel.src_type != expect)
      throw validation_error("meta-path '" + p.name + "': relation '" + rel.name +
                             "' starts at type '" + g.node_type_names[rel.src_type] +
                             "', expected '" + g.node_type_names[expect] + "'");
    expect = rel.dst_type;
  }
  return p;
}

std::vector<std::uint32_t> metapath_neighborhood(const HetGraph& g, const MetaPath& p,
                                                 std::uint32_t t) {
  if (p.relation_ids.empty()) throw validation_error("meta-path must be non-empty");
  if (g.relations[p.relation_ids.front()].src_type != g.target_type)
    throw validation_error("meta-path '" + p.name + "' does not start at the target type");
  if (t >= g.num_targets())
    throw validation_error("metapath_neighborhood: target index out of range");

  std::vector<std::uint32_t> frontier{t};
  for (RelationTypeId r : p.relation_ids) {
    const Relation& rel = g.relations[r];
    std::vector<std::vector<std::uint32_t>> adj(g.node_counts[rel.src_type]);
    for (const auto& e : rel.edges) adj[e.first].push_back(e.second);
    std::set<std::uint32_t> next;
    for (std::uint32_t u : frontier)
      for (std::uint32_t v : adj[u]) next.insert(v);
    frontier.assign(next.begin(), next.end());
    if (frontier.empty()) break;
  }
  return frontier;
}

GraphSummary describe(const HetGraph& g) {
  GraphSummary s;
  for (std::size_t t = 0; t < g.node_type_names.size(); ++t)
    s.nodes_per_type.emplace_back(g.node_type_names[t], g.node_counts[t]);
  for (const Relation& r : g.relations) s.edges_per_relation.emplace_back(r.name, r.edges.size());
  s.num_classes = g.num_classes();
  double ones = 0.0;
  for (std::size_t i = 0; i < g.labels.size(); ++i) ones += g.labels[i];
  s.label_density = g.labels.size() ? ones / static_cast<double>(g.labels.size()) : 0.0;
  s.mean_label_cardinality =
      g.labels.rows() ? ones / static_cast<double>(g.labels.rows()) : 0.0;
  s.train_size = g.splits.train.size();
  s.val_size = g.splits.val.size();
  s.test_size = g.splits.test.size();
  return s;
}

std::string GraphSummary::to_text() const {
  std::ostringstream os;
  for (const auto& [name, count] : nodes_per_type) os << "nodes." << name << " = " << count << "\n";
  for (const auto& [name, count] : edges_per_relation)
    os << "edges." << name << " = " << count << "\n";
  os << "classes = " << num_classes << "\n";
  os << "label_density = " << label_density << "\n";
  os << "mean_label_cardinality = " << mean_label_cardinality << "\n";
  os << "split.train = " << train_size << "\n";
  os << "split.val = " << val_size << "\n";
  os << "split.test = " << test_size << "\n";
  return os.str();
}

}  // namespace focal
