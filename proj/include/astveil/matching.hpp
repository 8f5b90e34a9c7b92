#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "astveil/code_graph.hpp"
#include "astveil/pattern.hpp"

namespace astveil {

struct PatternInstance {
  std::string pattern_id;
  // mapping[local_id] = host node id.
  std::vector<NodeId> mapping;
  Span root_span;

  friend bool operator==(const PatternInstance&, const PatternInstance&) = default;
};

// Injective, label- and edge-label-preserving embedding of the pattern's
// parent/child edges into the graph. Child order is ignored.
bool contains_pattern(const AstGraph& graph, const Pattern& pattern);

// Up to `limit` embeddings in lexicographic order of their mapping vectors.
std::vector<PatternInstance> find_instances(const AstGraph& graph, const Pattern& pattern,
                                            std::size_t limit);

}  // namespace astveil
