#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "astveil/code_graph.hpp"
#include "astveil/pattern.hpp"

namespace astveil {

using GraphRefs = std::vector<const AstGraph*>;

GraphRefs graph_refs(const std::vector<AstGraph>& graphs);

struct PatternSet {
  std::vector<Pattern> patterns;  // greedy selection order
  int target_class = 0;
  std::int64_t quality = 0;

  friend bool operator==(const PatternSet&, const PatternSet&) = default;
};

struct ProbeRecord {
  SourceUnit unit;
  AstGraph graph;
  int predicted_class = 0;
};

struct ProbeCorpus {
  std::vector<ProbeRecord> records;
  int num_classes = 2;
};

// Every connected pattern with at most max_edges edges that embeds in at least
// min_support graphs, once each, sorted by canonical code. Patterns grow by
// rightmost extension over the canonical preorder; a candidate survives only
// if its extended order is still canonical, so no pattern is visited twice.
std::vector<Pattern> enumerate_frequent(const GraphRefs& graphs, std::size_t min_support,
                                        std::size_t max_edges, unsigned threads = 1);
std::vector<Pattern> enumerate_frequent(const std::vector<AstGraph>& graphs, std::size_t min_support,
                                        std::size_t max_edges, unsigned threads = 1);

// Containment counts of one pattern over the two classes.
struct Correspondence {
  std::int64_t negatives_with = 0;
  std::int64_t negatives_without = 0;
  std::int64_t positives_with = 0;
  std::int64_t positives_without = 0;

  // |T0,¬P|·|T1,¬P| + |T0,P|·|T1,P|
  std::int64_t term() const {
    return negatives_without * positives_without + negatives_with * positives_with;
  }
};

Correspondence correspondence(const Pattern& pattern, const GraphRefs& positives,
                              const GraphRefs& negatives);

// q = -Σ_P term(P), class 0 = negatives, class 1 = positives.
std::int64_t cork_quality(const std::vector<Pattern>& patterns, const GraphRefs& positives,
                          const GraphRefs& negatives);

struct GreedyStep {
  std::size_t chosen = 0;                    // index into candidates
  std::vector<std::int64_t> candidate_terms; // term of every candidate still available
  std::vector<std::size_t> available;        // candidate indices still available
};

// Picks up to k candidates, each step adding the one that maximizes
// q(selected ∪ {P}); ties go to the smaller canonical code.
PatternSet greedy_select(const std::vector<Pattern>& candidates, const GraphRefs& positives,
                         const GraphRefs& negatives, std::size_t k,
                         std::vector<GreedyStep>* trace = nullptr);

struct OvaDataset {
  int target_class = 0;
  GraphRefs positives;
  GraphRefs negatives;
};

struct OvaResult {
  std::vector<OvaDataset> datasets;
  std::vector<std::string> warnings;  // one per skipped (empty) class
};

// One positive-vs-rest dataset per class; classes without members are
// skipped with a warning. Throws DegenerateClass when num_classes < 2.
OvaResult build_ova_datasets(const ProbeCorpus& corpus);

// Anonymous tokens made only of operator characters (`+`, `==`, `&&`, ...).
bool is_operator_token(std::string_view kind);

// Graph used for mining: named nodes plus operator tokens (comments, keywords
// and punctuation dropped), truncated to the first max_nodes nodes in preorder.
AstGraph mining_view(const AstGraph& graph, Language language, std::size_t max_nodes = 400);

struct MiningParams {
  std::optional<std::size_t> min_support;  // default: max(2, ceil(0.05 * |class graphs|))
  std::size_t max_edges = 5;
  std::size_t k = 20;
  std::size_t max_nodes = 400;
  unsigned threads = 1;
};

std::size_t default_min_support(std::size_t class_graphs);

// Enumerates on the positives' mining views, keeps admissible candidates and
// greedily selects against the full graphs.
PatternSet mine_class(const OvaDataset& dataset, Language language, const MiningParams& params,
                      const std::function<bool(const Pattern&)>& admissible = {});

}  // namespace astveil
