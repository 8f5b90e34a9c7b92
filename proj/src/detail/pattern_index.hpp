#pragma once

#include <string>
#include <vector>

#include "astveil/pattern.hpp"

namespace astveil::detail {

// Pattern nodes indexed by position in Pattern::nodes.
struct PatternIndex {
  std::vector<std::vector<int>> children;
  std::vector<int> parent;
  std::vector<std::string> in_label;
  int root = -1;
};

// Throws Disconnected unless the pattern is a single rooted tree.
PatternIndex index_pattern(const Pattern& p);

}  // namespace astveil::detail
