#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace astveil {

struct PatternNode {
  int local_id = 0;
  std::string kind;

  friend bool operator==(const PatternNode&, const PatternNode&) = default;
};

struct PatternEdge {
  int parent = 0;
  int child = 0;
  std::string label;

  friend bool operator==(const PatternEdge&, const PatternEdge&) = default;
};

// Connected labeled subtree. Local ids are 0..n-1; patterns built through
// make_pattern are stored in canonical preorder (root = 0).
struct Pattern {
  std::string id;
  std::vector<PatternNode> nodes;
  std::vector<PatternEdge> edges;
  std::string canonical_code;

  std::size_t edge_count() const { return edges.size(); }
  int root() const;
  const std::string& root_kind() const;

  friend bool operator==(const Pattern&, const Pattern&) = default;
};

// Minimum DFS code: equal strings iff the patterns are isomorphic as labeled
// unordered rooted trees. Throws Disconnected when the edges do not form a
// single tree over all nodes.
std::string canonical_dfs_code(const Pattern& pattern);

// Reorders nodes into canonical preorder and fills canonical_code.
Pattern make_pattern(std::string id, std::vector<PatternNode> nodes, std::vector<PatternEdge> edges);
Pattern single_node_pattern(std::string id, std::string kind);

}  // namespace astveil
