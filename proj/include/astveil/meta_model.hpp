#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "astveil/code_graph.hpp"
#include "astveil/pattern.hpp"

namespace astveil {

struct FeatureVector {
  std::vector<std::uint8_t> bits;

  std::size_t size() const { return bits.size(); }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// bit j = contains_pattern(graph, patterns[j])
FeatureVector featurize(const AstGraph& graph, const std::vector<Pattern>& patterns);

struct MetaNode {
  int split = -1;  // feature index; -1 marks a leaf
  int absent = -1;
  int present = -1;
  int leaf_class = 0;
  std::int64_t support = 0;
  std::vector<std::int64_t> counts;

  bool is_leaf() const { return split < 0; }
  friend bool operator==(const MetaNode&, const MetaNode&) = default;
};

struct TreeParams {
  int max_depth = 12;
  std::int64_t min_leaf = 2;
  double min_gain = 1e-9;
};

struct MetaModel {
  std::vector<MetaNode> nodes;  // nodes[0] is the root
  std::int64_t n = 0;
  std::string pattern_set_id;
  std::size_t num_features = 0;
  int num_classes = 0;
  // presence_by_class[c][j]: training samples of class c whose bit j is set.
  std::vector<std::vector<std::int64_t>> presence_by_class;

  int route(const FeatureVector& f) const;  // leaf index
  int predict(const FeatureVector& f) const { return nodes.at(route(f)).leaf_class; }

  friend bool operator==(const MetaModel&, const MetaModel&) = default;
};

// Gini CART. Throws EmptyTrainingSet or LengthMismatch.
MetaModel train_meta(const std::vector<FeatureVector>& features, const std::vector<int>& labels,
                     const TreeParams& params = {}, int num_classes = 0);

std::vector<std::size_t> missing_patterns(const FeatureVector& f);

enum class PathSet {
  routed,          // the single leaf reached by f with the candidate bit set
  positive_tests,  // every leaf whose path takes the "present" branch on the candidate
};

// Σ_{π∈Π} SP_π · 1[c_π ≠ y] / n. Throws LengthMismatch.
double prob_change(const MetaModel& meta, const FeatureVector& f, std::size_t candidate, int y,
                   PathSet paths = PathSet::routed);

struct ChooseOptions {
  bool fallback = true;
  double temperature = 0.0;  // > 0 samples from softmax(p / temperature)
  PathSet paths = PathSet::routed;
};

// Argmax of prob_change over `missing`, lower index on ties. With fallback,
// an all-zero ranking picks the missing pattern seen most often in training
// samples whose class differs from y.
std::optional<std::size_t> choose_pattern(const MetaModel& meta, const FeatureVector& f,
                                          const std::vector<std::size_t>& missing, int y,
                                          const ChooseOptions& options = {}, std::mt19937_64* rng = nullptr);

}  // namespace astveil
