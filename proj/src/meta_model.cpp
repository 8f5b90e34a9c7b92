#include "astveil/meta_model.hpp"

#include <algorithm>
#include <cmath>

#include "astveil/errors.hpp"
#include "astveil/matching.hpp"

namespace astveil {

FeatureVector featurize(const AstGraph& graph, const std::vector<Pattern>& patterns) {
  FeatureVector f;
  f.bits.reserve(patterns.size());
  for (const auto& p : patterns) f.bits.push_back(contains_pattern(graph, p) ? 1 : 0);
  return f;
}

int MetaModel::route(const FeatureVector& f) const {
  if (f.size() != num_features) throw LengthMismatch("feature vector length differs from the pattern set");
  int at = 0;
  while (!nodes.at(at).is_leaf()) {
    const auto& nd = nodes[at];
    at = f.bits[nd.split] ? nd.present : nd.absent;
  }
  return at;
}

namespace {

double gini(const std::vector<std::int64_t>& counts, std::int64_t total) {
  if (total == 0) return 0.0;
  double s = 1.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    s -= p * p;
  }
  return s;
}

class Builder {
 public:
  Builder(const std::vector<FeatureVector>& x, const std::vector<int>& y, const TreeParams& params, int classes,
          MetaModel& out)
      : x_(x), y_(y), params_(params), classes_(classes), out_(out) {}

  int build(const std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(out_.nodes.size());
    out_.nodes.emplace_back();
    std::vector<std::int64_t> counts(classes_, 0);
    for (auto r : rows) ++counts[y_[r]];
    const auto total = static_cast<std::int64_t>(rows.size());

    int best_j = -1;
    double best_gain = params_.min_gain;
    if (depth < params_.max_depth) {
      const double parent = gini(counts, total);
      for (std::size_t j = 0; j < out_.num_features; ++j) {
        std::vector<std::int64_t> on(classes_, 0);
        std::int64_t n_on = 0;
        for (auto r : rows)
          if (x_[r].bits[j]) {
            ++on[y_[r]];
            ++n_on;
          }
        const std::int64_t n_off = total - n_on;
        if (n_on < params_.min_leaf || n_off < params_.min_leaf) continue;
        std::vector<std::int64_t> off(classes_);
        for (int c = 0; c < classes_; ++c) off[c] = counts[c] - on[c];
        const double child = (static_cast<double>(n_on) * gini(on, n_on) +
                              static_cast<double>(n_off) * gini(off, n_off)) /
                             static_cast<double>(total);
        const double gain = parent - child;
        if (gain > best_gain) {
          best_gain = gain;
          best_j = static_cast<int>(j);
        }
      }
    }

    if (best_j < 0) {
      auto& leaf = out_.nodes[id];
      leaf.support = total;
      leaf.leaf_class = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      leaf.counts = std::move(counts);
      return id;
    }
    std::vector<std::size_t> absent, present;
    for (auto r : rows) (x_[r].bits[best_j] ? present : absent).push_back(r);
    const int a = build(absent, depth + 1);
    const int p = build(present, depth + 1);
    auto& nd = out_.nodes[id];
    nd.split = best_j;
    nd.absent = a;
    nd.present = p;
    return id;
  }

 private:
  const std::vector<FeatureVector>& x_;
  const std::vector<int>& y_;
  const TreeParams& params_;
  int classes_;
  MetaModel& out_;
};

}  // namespace

MetaModel train_meta(const std::vector<FeatureVector>& features, const std::vector<int>& labels,
                     const TreeParams& params, int num_classes) {
  if (features.empty()) throw EmptyTrainingSet("meta-model needs at least one sample");
  if (features.size() != labels.size()) throw LengthMismatch("features and labels differ in length");
  MetaModel m;
  m.num_features = features[0].size();
  for (const auto& f : features)
    if (f.size() != m.num_features) throw LengthMismatch("feature vectors differ in length");
  int classes = num_classes;
  for (int y : labels) {
    if (y < 0) throw LengthMismatch("negative class label");
    classes = std::max(classes, y + 1);
  }
  m.num_classes = classes;
  m.n = static_cast<std::int64_t>(features.size());
  m.presence_by_class.assign(classes, std::vector<std::int64_t>(m.num_features, 0));
  for (std::size_t i = 0; i < features.size(); ++i)
    for (std::size_t j = 0; j < m.num_features; ++j) m.presence_by_class[labels[i]][j] += features[i].bits[j];

  std::vector<std::size_t> rows(features.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  Builder(features, labels, params, classes, m).build(rows, 0);
  return m;
}

std::vector<std::size_t> missing_patterns(const FeatureVector& f) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < f.size(); ++j)
    if (!f.bits[j]) out.push_back(j);
  return out;
}

double prob_change(const MetaModel& meta, const FeatureVector& f, std::size_t candidate, int y, PathSet paths) {
  if (f.size() != meta.num_features || candidate >= f.size())
    throw LengthMismatch("candidate or feature vector outside the pattern set");
  if (meta.n == 0) return 0.0;
  std::int64_t disagreeing = 0;
  if (paths == PathSet::routed) {
    FeatureVector g = f;
    g.bits[candidate] = 1;
    const auto& leaf = meta.nodes[meta.route(g)];
    if (leaf.leaf_class != y) disagreeing = leaf.support;
  } else {
    // Leaves below a present-branch test on the candidate.
    std::vector<std::pair<int, bool>> stack{{0, false}};
    while (!stack.empty()) {
      auto [at, tested] = stack.back();
      stack.pop_back();
      const auto& nd = meta.nodes[at];
      if (nd.is_leaf()) {
        if (tested && nd.leaf_class != y) disagreeing += nd.support;
        continue;
      }
      stack.emplace_back(nd.absent, tested);
      stack.emplace_back(nd.present, tested || nd.split == static_cast<int>(candidate));
    }
  }
  return static_cast<double>(disagreeing) / static_cast<double>(meta.n);
}

std::optional<std::size_t> choose_pattern(const MetaModel& meta, const FeatureVector& f,
                                          const std::vector<std::size_t>& missing, int y,
                                          const ChooseOptions& options, std::mt19937_64* rng) {
  if (missing.empty()) return std::nullopt;
  std::vector<double> p;
  p.reserve(missing.size());
  for (auto j : missing) p.push_back(prob_change(meta, f, j, y, options.paths));

  const bool all_zero = std::all_of(p.begin(), p.end(), [](double v) { return v == 0.0; });
  if (all_zero) {
    if (!options.fallback) return std::nullopt;
    std::size_t best = missing[0];
    std::int64_t best_count = -1;
    for (auto j : missing) {
      std::int64_t count = 0;
      for (int c = 0; c < meta.num_classes; ++c)
        if (c != y) count += meta.presence_by_class[c][j];
      if (count > best_count || (count == best_count && j < best)) {
        best = j;
        best_count = count;
      }
    }
    return best;
  }

  if (options.temperature > 0.0 && rng) {
    const double top = *std::max_element(p.begin(), p.end());
    std::vector<double> w;
    for (double v : p) w.push_back(std::exp((v - top) / options.temperature));
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    return missing[pick(*rng)];
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[best] || (p[i] == p[best] && missing[i] < missing[best])) best = i;
  return missing[best];
}

}  // namespace astveil
