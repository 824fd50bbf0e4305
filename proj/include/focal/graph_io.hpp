#pragma once

#include <string>

#include "focal/hetgraph.hpp"

namespace focal {

// Text document format, version 1. Sections in order: [schema], [counts],
// [features], [edges], [labels], [splits]. Exact key names are documented
// in the README. Floats are written in shortest round-trip decimal form,
// so save followed by load reproduces every f64 bit-exactly.
void save_graph(const HetGraph& g, const std::string& path);

// Parses, validates, and returns the graph. parse_error for malformed
// documents, validation_error when an invariant fails.
HetGraph load_graph(const std::string& path);

// Shared float formatting used by every text artifact in the project.
std::string format_double(double v);
double parse_double(const std::string& s);  // throws parse_error

}  // namespace focal
