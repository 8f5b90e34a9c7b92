#include "astveil/miner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <thread>
#include <tuple>

#include "astveil/errors.hpp"
#include "astveil/matching.hpp"

namespace astveil {

GraphRefs graph_refs(const std::vector<AstGraph>& graphs) {
  GraphRefs out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(&g);
  return out;
}

namespace {

// Graph with interned labels. Node and edge labels live in separate
// alphabets; both are interned in sorted string order so integer order
// matches the order used by the canonical code.
struct ITree {
  std::vector<int> label;
  std::vector<int> elabel;
  std::vector<std::vector<int>> kids;
  std::map<int, std::vector<int>> by_label;
};

// Pattern under construction, nodes in canonical preorder.
struct IPattern {
  std::vector<int> label;
  std::vector<int> elabel;  // -1 for the root
  std::vector<int> parent;
  std::vector<std::vector<int>> kids;

  std::size_t size() const { return label.size(); }

  void push(int par, int el, int lab) {
    label.push_back(lab);
    elabel.push_back(el);
    parent.push_back(par);
    kids.emplace_back();
    if (par >= 0) kids[par].push_back(static_cast<int>(label.size()) - 1);
  }
  void pop() {
    const int par = parent.back();
    if (par >= 0) kids[par].pop_back();
    label.pop_back();
    elabel.pop_back();
    parent.pop_back();
    kids.pop_back();
  }
};

constexpr int kOpen = std::numeric_limits<int>::min();
constexpr int kClose = std::numeric_limits<int>::max();

// Same token order as the string canonical form: OPEN < labels < CLOSE. The
// root's edge label is -1, matching the empty string sorting first.
void encode(const IPattern& p, int u, std::vector<int>& out) {
  out.push_back(kOpen);
  out.push_back(p.elabel[u]);
  out.push_back(p.label[u]);
  for (int c : p.kids[u]) encode(p, c, out);
  out.push_back(kClose);
}

std::vector<int> code_of(const IPattern& p, int u) {
  std::vector<int> out;
  encode(p, u, out);
  return out;
}

// The parent pattern was canonical, so only sibling pairs that end on the
// rightmost path can be out of order after appending a node there.
bool still_canonical(const IPattern& p) {
  int v = static_cast<int>(p.size()) - 1;
  while (v > 0) {
    const int par = p.parent[v];
    const auto& ks = p.kids[par];
    if (ks.size() >= 2 && code_of(p, ks[ks.size() - 2]) > code_of(p, ks.back())) return false;
    v = par;
  }
  return true;
}

class TreeMatcher {
 public:
  TreeMatcher(const ITree& g, const IPattern& p) : g_(g), p_(p) {}

  bool contains() const {
    auto it = g_.by_label.find(p_.label[0]);
    if (it == g_.by_label.end()) return false;
    for (int h : it->second)
      if (matches(0, h)) return true;
    return false;
  }

 private:
  bool matches(int pp, int h) const {
    if (g_.label[h] != p_.label[pp]) return false;
    const auto& pk = p_.kids[pp];
    if (pk.empty()) return true;
    const auto& hk = g_.kids[h];
    if (hk.size() < pk.size()) return false;
    std::vector<std::vector<int>> adj(pk.size());
    for (std::size_t i = 0; i < pk.size(); ++i) {
      for (std::size_t j = 0; j < hk.size(); ++j)
        if (g_.elabel[hk[j]] == p_.elabel[pk[i]] && matches(pk[i], hk[j]))
          adj[i].push_back(static_cast<int>(j));
      if (adj[i].empty()) return false;
    }
    std::vector<int> owner(hk.size(), -1);
    for (std::size_t u = 0; u < adj.size(); ++u) {
      std::vector<char> seen(hk.size(), 0);
      if (!augment(adj, static_cast<int>(u), seen, owner)) return false;
    }
    return true;
  }

  static bool augment(const std::vector<std::vector<int>>& adj, int u, std::vector<char>& seen,
                      std::vector<int>& owner) {
    for (int v : adj[u]) {
      if (seen[v]) continue;
      seen[v] = 1;
      if (owner[v] == -1 || augment(adj, owner[v], seen, owner)) {
        owner[v] = u;
        return true;
      }
    }
    return false;
  }

  const ITree& g_;
  const IPattern& p_;
};

struct Triple {
  int el;
  int child;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct Miner {
  std::vector<std::string> labels;
  std::vector<std::string> elabels;
  std::vector<ITree> trees;
  // parent label -> frequent (edge label, child label) extensions
  std::map<int, std::vector<Triple>> ext;
  std::size_t min_support = 1;
  std::size_t max_edges = 0;

  Pattern to_pattern(const IPattern& p) const {
    std::vector<PatternNode> nodes;
    std::vector<PatternEdge> edges;
    for (std::size_t i = 0; i < p.size(); ++i) {
      nodes.push_back({static_cast<int>(i), labels[p.label[i]]});
      if (p.parent[i] >= 0) edges.push_back({p.parent[i], static_cast<int>(i), elabels[p.elabel[i]]});
    }
    return make_pattern({}, std::move(nodes), std::move(edges));
  }

  void grow(IPattern& p, const std::vector<int>& support, std::vector<Pattern>& out) const {
    out.push_back(to_pattern(p));
    if (p.size() - 1 >= max_edges) return;
    // Rightmost path, deepest node first.
    std::vector<int> path;
    for (int v = static_cast<int>(p.size()) - 1; v >= 0; v = p.parent[v]) path.push_back(v);
    for (int u : path) {
      auto it = ext.find(p.label[u]);
      if (it == ext.end()) continue;
      for (const auto& t : it->second) {
        p.push(u, t.el, t.child);
        if (still_canonical(p)) {
          std::vector<int> sub;
          for (int gi : support)
            if (TreeMatcher(trees[gi], p).contains()) sub.push_back(gi);
          if (sub.size() >= min_support) grow(p, sub, out);
        }
        p.pop();
      }
    }
  }
};

}  // namespace

std::vector<Pattern> enumerate_frequent(const GraphRefs& graphs, std::size_t min_support,
                                        std::size_t max_edges, unsigned threads) {
  if (min_support == 0) min_support = 1;
  Miner m;
  m.min_support = min_support;
  m.max_edges = max_edges;

  std::set<std::string> lab_set, elab_set;
  for (const auto* g : graphs) {
    for (NodeId v = 0; v < g->size(); ++v) {
      lab_set.insert(g->node(v).kind);
      if (v != g->root()) elab_set.insert(g->edge_label(v));
    }
  }
  m.labels.assign(lab_set.begin(), lab_set.end());
  m.elabels.assign(elab_set.begin(), elab_set.end());
  auto lab_id = [&](const std::string& s) {
    return static_cast<int>(std::lower_bound(m.labels.begin(), m.labels.end(), s) - m.labels.begin());
  };
  auto elab_id = [&](const std::string& s) {
    return static_cast<int>(std::lower_bound(m.elabels.begin(), m.elabels.end(), s) - m.elabels.begin());
  };

  std::map<int, std::vector<int>> label_support;
  std::map<std::tuple<int, int, int>, std::size_t> triple_support;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const auto& g = *graphs[gi];
    ITree t;
    const auto n = g.size();
    t.label.resize(n);
    t.elabel.assign(n, -1);
    t.kids.resize(n);
    for (NodeId v = 0; v < n; ++v) {
      t.label[v] = lab_id(g.node(v).kind);
      if (v != g.root()) t.elabel[v] = elab_id(g.edge_label(v));
      for (auto c : g.children(v)) t.kids[v].push_back(static_cast<int>(c));
      t.by_label[t.label[v]].push_back(static_cast<int>(v));
    }
    std::set<std::tuple<int, int, int>> seen;
    for (NodeId v = 0; v < n; ++v)
      if (v != g.root()) seen.insert({t.label[g.parent(v)], t.elabel[v], t.label[v]});
    for (const auto& tr : seen) ++triple_support[tr];
    for (const auto& [lab, _] : t.by_label) label_support[lab].push_back(static_cast<int>(gi));
    m.trees.push_back(std::move(t));
  }
  for (const auto& [tr, count] : triple_support)
    if (count >= min_support) m.ext[std::get<0>(tr)].push_back({std::get<1>(tr), std::get<2>(tr)});

  std::vector<std::pair<int, std::vector<int>>> roots;
  for (auto& [lab, sup] : label_support)
    if (sup.size() >= min_support) roots.emplace_back(lab, sup);

  // One branch per frequent root label; branches never share a pattern.
  std::vector<std::vector<Pattern>> results(roots.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < roots.size();) {
      IPattern p;
      p.push(-1, -1, roots[i].first);
      m.grow(p, roots[i].second, results[i]);
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(roots.size())));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<Pattern> out;
  for (auto& r : results)
    for (auto& p : r) out.push_back(std::move(p));
  std::sort(out.begin(), out.end(),
            [](const Pattern& a, const Pattern& b) { return a.canonical_code < b.canonical_code; });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = "p" + std::to_string(i);
  return out;
}

std::vector<Pattern> enumerate_frequent(const std::vector<AstGraph>& graphs, std::size_t min_support,
                                        std::size_t max_edges, unsigned threads) {
  return enumerate_frequent(graph_refs(graphs), min_support, max_edges, threads);
}

Correspondence correspondence(const Pattern& pattern, const GraphRefs& positives,
                              const GraphRefs& negatives) {
  Correspondence c;
  for (const auto* g : positives) {
    if (contains_pattern(*g, pattern)) ++c.positives_with;
    else ++c.positives_without;
  }
  for (const auto* g : negatives) {
    if (contains_pattern(*g, pattern)) ++c.negatives_with;
    else ++c.negatives_without;
  }
  return c;
}

std::int64_t cork_quality(const std::vector<Pattern>& patterns, const GraphRefs& positives,
                          const GraphRefs& negatives) {
  std::int64_t q = 0;
  for (const auto& p : patterns) q -= correspondence(p, positives, negatives).term();
  return q;
}

PatternSet greedy_select(const std::vector<Pattern>& candidates, const GraphRefs& positives,
                         const GraphRefs& negatives, std::size_t k, std::vector<GreedyStep>* trace) {
  PatternSet out;
  std::vector<std::int64_t> terms(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    terms[i] = correspondence(candidates[i], positives, negatives).term();

  // q(S ∪ {P}) from cached per-pattern terms; replace this to plug in a
  // non-additive criterion.
  auto quality_with = [&](std::int64_t q_selected, std::size_t cand) { return q_selected - terms[cand]; };

  std::vector<std::size_t> available(candidates.size());
  for (std::size_t i = 0; i < available.size(); ++i) available[i] = i;
  while (out.patterns.size() < k && !available.empty()) {
    std::size_t best_pos = 0;
    std::int64_t best_q = quality_with(out.quality, available[0]);
    for (std::size_t pos = 1; pos < available.size(); ++pos) {
      const std::size_t c = available[pos];
      const std::int64_t q = quality_with(out.quality, c);
      if (q > best_q ||
          (q == best_q && candidates[c].canonical_code < candidates[available[best_pos]].canonical_code)) {
        best_q = q;
        best_pos = pos;
      }
    }
    const std::size_t chosen = available[best_pos];
    if (trace) {
      GreedyStep step;
      step.chosen = chosen;
      step.available = available;
      for (auto c : available) step.candidate_terms.push_back(terms[c]);
      trace->push_back(std::move(step));
    }
    out.patterns.push_back(candidates[chosen]);
    out.quality = best_q;
    available.erase(available.begin() + static_cast<std::ptrdiff_t>(best_pos));
  }
  return out;
}

OvaResult build_ova_datasets(const ProbeCorpus& corpus) {
  if (corpus.num_classes < 2) throw DegenerateClass("one-vs-all needs at least two classes");
  OvaResult out;
  for (int c = 0; c < corpus.num_classes; ++c) {
    OvaDataset d;
    d.target_class = c;
    for (const auto& r : corpus.records) {
      if (r.predicted_class < 0 || r.predicted_class >= corpus.num_classes)
        throw DegenerateClass("predicted class " + std::to_string(r.predicted_class) + " out of range");
      (r.predicted_class == c ? d.positives : d.negatives).push_back(&r.graph);
    }
    if (d.positives.empty()) {
      out.warnings.push_back("class " + std::to_string(c) + " has no members; skipped");
      continue;
    }
    out.datasets.push_back(std::move(d));
  }
  return out;
}

bool is_operator_token(std::string_view kind) {
  if (kind.empty()) return false;
  return std::all_of(kind.begin(), kind.end(), [](char ch) {
    return std::string_view("+-*/%<>=!&|^~?").find(ch) != std::string_view::npos;
  });
}

AstGraph mining_view(const AstGraph& graph, Language language, std::size_t max_nodes) {
  if (graph.empty()) return graph;
  const auto& prof = profile(language);
  std::vector<AstNode> nodes;
  std::vector<AstEdge> edges;
  std::vector<NodeId> new_id(graph.size(), kNoNode);
  // Preorder ids: a dropped node drops its whole subtree, and truncation
  // keeps a prefix, so every kept node's parent is kept too.
  for (NodeId v = 0; v < graph.size() && nodes.size() < max_nodes; ++v) {
    const auto& n = graph.node(v);
    const bool keep = v == graph.root() ||
                      ((n.named || is_operator_token(n.kind)) && !prof.is_comment(n.kind) &&
                       new_id[graph.parent(v)] != kNoNode);
    if (!keep) continue;
    new_id[v] = static_cast<NodeId>(nodes.size());
    nodes.push_back(n);
    if (v != graph.root()) edges.push_back({new_id[graph.parent(v)], new_id[v], graph.edge_label(v)});
  }
  return AstGraph(std::move(nodes), std::move(edges), 0);
}

std::size_t default_min_support(std::size_t class_graphs) {
  const auto five_percent = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(class_graphs)));
  return std::max<std::size_t>(2, five_percent);
}

namespace {

bool leaf_token_kind(const std::string& kind) {
  // identifiers and literals carry no structure worth inserting on their own
  static const std::vector<std::string> kinds = {
      "identifier", "field_identifier", "type_identifier", "number_literal", "string_literal",
      "char_literal", "true", "false", "null", "none", "integer", "float", "string",
      "decimal_integer_literal", "hex_integer_literal", "decimal_floating_point_literal",
      "character_literal", "null_literal", "string_content", "string_fragment"};
  return contains_kind(kinds, kind);
}

}  // namespace

PatternSet mine_class(const OvaDataset& dataset, Language language, const MiningParams& params,
                      const std::function<bool(const Pattern&)>& admissible) {
  std::vector<AstGraph> views;
  views.reserve(dataset.positives.size());
  for (const auto* g : dataset.positives) views.push_back(mining_view(*g, language, params.max_nodes));
  const std::size_t support = params.min_support.value_or(default_min_support(views.size()));
  auto frequent = enumerate_frequent(views, support, params.max_edges, params.threads);
  std::vector<Pattern> candidates;
  for (auto& p : frequent) {
    if (p.nodes.size() == 1 && leaf_token_kind(p.nodes[0].kind)) continue;
    if (admissible && !admissible(p)) continue;
    candidates.push_back(std::move(p));
  }
  PatternSet out = greedy_select(candidates, dataset.positives, dataset.negatives, params.k);
  out.target_class = dataset.target_class;
  for (std::size_t i = 0; i < out.patterns.size(); ++i)
    out.patterns[i].id = "c" + std::to_string(dataset.target_class) + "_p" + std::to_string(i);
  return out;
}

}  // namespace astveil
