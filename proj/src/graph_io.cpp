#include "focal/graph_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "focal/errors.hpp"

namespace focal {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw parse_error("bad float literal: '" + s + "'");
  return v;
}

namespace {

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

long parse_int(const std::string& s, const std::string& where) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw parse_error(where + ": bad integer '" + s + "'");
  return v;
}

void check_name(const std::string& name) {
  if (name.empty()) throw io_error("empty name in graph document");
  for (char c : name)
    if (c == ' ' || c == '\t' || c == ':')
      throw io_error("name '" + name + "' contains whitespace or ':'");
}

// Line reader tracking position for error messages.
struct Reader {
  std::istream& in;
  std::size_t line_no = 0;
  std::string line;
  bool next() {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw parse_error("graph document line " + std::to_string(line_no) + ": " + msg);
  }
};

std::vector<std::uint32_t> parse_index_list(Reader& rd, const std::vector<std::string>& toks,
                                            std::size_t from) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = from; i < toks.size(); ++i) {
    long v = parse_int(toks[i], "line " + std::to_string(rd.line_no));
    if (v < 0) rd.fail("negative index");
    out.push_back(static_cast<std::uint32_t>(v));
  }
  return out;
}

}  // namespace

void save_graph(const HetGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << "format_version: 1\n";
  out << "[schema]\n";
  for (const std::string& name : g.node_type_names) {
    check_name(name);
    out << "node_type: " << name << "\n";
  }
  for (const Relation& r : g.relations) {
    check_name(r.name);
    out << "relation: " << r.name << " " << g.node_type_names[r.src_type] << " "
        << g.node_type_names[r.dst_type] << " " << (r.primary ? "primary" : "secondary") << "\n";
  }
  out << "[counts]\n";
  for (std::size_t t = 0; t < g.node_type_names.size(); ++t)
    out << g.node_type_names[t] << ": " << g.node_counts[t] << "\n";
  out << "[features]\n";
  for (std::size_t t = 0; t < g.node_type_names.size(); ++t) {
    const Tensor& f = g.features[t];
    out << "type: " << g.node_type_names[t] << " dim: " << f.cols() << "\n";
    for (std::size_t r = 0; r < f.rows(); ++r) {
      for (std::size_t c = 0; c < f.cols(); ++c) {
        if (c) out << " ";
        out << format_double(f.at(r, c));
      }
      out << "\n";
    }
  }
  out << "[edges]\n";
  for (const Relation& r : g.relations) {
    out << "relation: " << r.name << " count: " << r.edges.size() << "\n";
    for (const auto& e : r.edges) out << e.first << " " << e.second << "\n";
  }
  out << "[labels]\n";
  out << "target: " << g.node_type_names[g.target_type] << " classes: " << g.num_classes()
      << "\n";
  for (std::size_t r = 0; r < g.labels.rows(); ++r) {
    for (std::size_t c = 0; c < g.labels.cols(); ++c) {
      if (c) out << " ";
      out << static_cast<int>(g.labels.at(r, c));
    }
    out << "\n";
  }
  out << "[splits]\n";
  auto dump_split = [&](const char* name, const std::vector<std::uint32_t>& s) {
    out << name << ":";
    for (std::uint32_t i : s) out << " " << i;
    out << "\n";
  };
  dump_split("train", g.splits.train);
  dump_split("val", g.splits.val);
  dump_split("test", g.splits.test);
  if (!out) throw io_error("write failed: " + path);
}

HetGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open for reading: " + path);
  Reader rd{in, 0, {}};
  HetGraph g;

  if (!rd.next()) rd.fail("empty document");
  if (rd.line != "format_version: 1") rd.fail("expected 'format_version: 1'");
  if (!rd.next() || rd.line != "[schema]") rd.fail("expected '[schema]'");

  struct RelDecl {
    std::string name, src, dst;
    bool primary;
  };
  std::vector<RelDecl> rel_decls;
  while (rd.next() && rd.line != "[counts]") {
    auto toks = tokens(rd.line);
    if (toks.size() == 2 && toks[0] == "node_type:") {
      g.node_type_names.push_back(toks[1]);
    } else if (toks.size() == 5 && toks[0] == "relation:") {
      if (toks[4] != "primary" && toks[4] != "secondary")
        rd.fail("relation flag must be 'primary' or 'secondary'");
      rel_decls.push_back({toks[1], toks[2], toks[3], toks[4] == "primary"});
    } else {
      rd.fail("unrecognized schema entry");
    }
  }
  if (rd.line != "[counts]") rd.fail("expected '[counts]'");
  if (g.node_type_names.empty()) rd.fail("no node types declared");

  g.node_counts.assign(g.node_type_names.size(), 0);
  std::vector<bool> have_count(g.node_type_names.size(), false);
  while (rd.next() && rd.line != "[features]") {
    auto toks = tokens(rd.line);
    if (toks.size() != 2 || toks[0].back() != ':') rd.fail("expected '<type>: <count>'");
    std::string name = toks[0].substr(0, toks[0].size() - 1);
    NodeTypeId t;
    try {
      t = g.node_type_id(name);
    } catch (const validation_error& e) {
      rd.fail(e.what());
    }
    long c = parse_int(toks[1], "counts");
    if (c < 0) rd.fail("negative node count");
    g.node_counts[t] = static_cast<std::uint32_t>(c);
    have_count[t] = true;
  }
  if (rd.line != "[features]") rd.fail("expected '[features]'");
  for (std::size_t t = 0; t < have_count.size(); ++t)
    if (!have_count[t]) rd.fail("missing count for node type '" + g.node_type_names[t] + "'");

  for (const RelDecl& d : rel_decls) {
    Relation r;
    r.name = d.name;
    try {
      r.src_type = g.node_type_id(d.src);
      r.dst_type = g.node_type_id(d.dst);
    } catch (const validation_error& e) {
      throw parse_error(std::string("relation '") + d.name + "': " + e.what());
    }
    r.primary = d.primary;
    g.relations.push_back(std::move(r));
  }

  g.features.assign(g.node_type_names.size(), Tensor());
  std::vector<bool> have_features(g.node_type_names.size(), false);
  while (true) {
    if (!rd.next()) rd.fail("unexpected end of document in [features]");
    if (rd.line == "[edges]") break;
    auto toks = tokens(rd.line);
    if (toks.size() != 4 || toks[0] != "type:" || toks[2] != "dim:")
      rd.fail("expected 'type: <name> dim: <d>'");
    NodeTypeId t;
    try {
      t = g.node_type_id(toks[1]);
    } catch (const validation_error& e) {
      rd.fail(e.what());
    }
    long dim = parse_int(toks[3], "feature dim");
    if (dim < 0) rd.fail("negative feature dim");
    Tensor f(g.node_counts[t], static_cast<std::size_t>(dim));
    for (std::size_t r = 0; r < f.rows(); ++r) {
      if (!rd.next()) rd.fail("unexpected end of document in feature rows");
      auto row = tokens(rd.line);
      if (row.size() != f.cols())
        rd.fail("feature row has " + std::to_string(row.size()) + " values, expected " +
                std::to_string(f.cols()));
      for (std::size_t c = 0; c < f.cols(); ++c) {
        try {
          f.at(r, c) = parse_double(row[c]);
        } catch (const parse_error& e) {
          rd.fail(e.what());
        }
      }
    }
    g.features[t] = std::move(f);
    have_features[t] = true;
  }
  for (std::size_t t = 0; t < have_features.size(); ++t)
    if (!have_features[t]) rd.fail("missing features for node type '" + g.node_type_names[t] + "'");

  std::size_t rel_seen = 0;
  while (true) {
    if (!rd.next()) rd.fail("unexpected end of document in [edges]");
    if (rd.line == "[labels]") break;
    auto toks = tokens(rd.line);
    if (toks.size() != 4 || toks[0] != "relation:" || toks[2] != "count:")
      rd.fail("expected 'relation: <name> count: <n>'");
    RelationTypeId rid;
    try {
      rid = g.relation_id(toks[1]);
    } catch (const validation_error& e) {
      rd.fail(e.what());
    }
    long count = parse_int(toks[3], "edge count");
    if (count < 0) rd.fail("negative edge count");
    Relation& rel = g.relations[rid];
    rel.edges.reserve(static_cast<std::size_t>(count));
    for (long e = 0; e < count; ++e) {
      if (!rd.next()) rd.fail("unexpected end of document in edge rows");
      auto pair = tokens(rd.line);
      if (pair.size() != 2) rd.fail("edge row must have two indices");
      long s = parse_int(pair[0], "edge src");
      long d = parse_int(pair[1], "edge dst");
      if (s < 0 || d < 0) rd.fail("negative edge index");
      rel.edges.emplace_back(static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(d));
    }
    ++rel_seen;
  }
  if (rel_seen != g.relations.size()) rd.fail("edge section missing for some relation");

  if (!rd.next()) rd.fail("unexpected end of document in [labels]");
  {
    auto toks = tokens(rd.line);
    if (toks.size() != 4 || toks[0] != "target:" || toks[2] != "classes:")
      rd.fail("expected 'target: <type> classes: <C>'");
    try {
      g.target_type = g.node_type_id(toks[1]);
    } catch (const validation_error& e) {
      rd.fail(e.what());
    }
    long classes = parse_int(toks[3], "classes");
    if (classes < 0) rd.fail("negative class count");
    g.labels = Tensor(g.node_counts[g.target_type], static_cast<std::size_t>(classes));
    for (std::size_t r = 0; r < g.labels.rows(); ++r) {
      if (!rd.next()) rd.fail("unexpected end of document in label rows");
      auto row = tokens(rd.line);
      if (row.size() != g.labels.cols())
        rd.fail("label row has " + std::to_string(row.size()) + " values, expected " +
                std::to_string(g.labels.cols()));
      for (std::size_t c = 0; c < g.labels.cols(); ++c) {
        long v = parse_int(row[c], "label entry");
        if (v != 0 && v != 1) rd.fail("label entries must be 0 or 1");
        g.labels.at(r, c) = static_cast<double>(v);
      }
    }
  }

  if (!rd.next() || rd.line != "[splits]") rd.fail("expected '[splits]'");
  for (const char* name : {"train", "val", "test"}) {
    if (!rd.next()) rd.fail("unexpected end of document in [splits]");
    auto toks = tokens(rd.line);
    if (toks.empty() || toks[0] != std::string(name) + ":")
      rd.fail(std::string("expected '") + name + ":' split line");
    auto list = parse_index_list(rd, toks, 1);
    if (std::string(name) == "train") g.splits.train = std::move(list);
    else if (std::string(name) == "val") g.splits.val = std::move(list);
    else g.splits.test = std::move(list);
  }
  if (rd.next()) rd.fail("trailing content after [splits]");

  g.validate();
  return g;
}

}  // namespace focal
