#include "astveil/matching.hpp"

#include <algorithm>
#include <functional>

#include "detail/pattern_index.hpp"

namespace astveil {

namespace {

class Matcher {
 public:
  Matcher(const AstGraph& g, const Pattern& p) : g_(g), p_(p), idx_(detail::index_pattern(p)) {}

  const detail::PatternIndex& index() const { return idx_; }

  // Pattern subtree at position `pp` embeds with its root on host node `h`.
  bool subtree_matches(int pp, NodeId h) const {
    if (g_.node(h).kind != p_.nodes[pp].kind) return false;
    const auto& pk = idx_.children[pp];
    if (pk.empty()) return true;
    const auto hk = g_.children(h);
    if (hk.size() < pk.size()) return false;
    std::vector<std::vector<int>> adj(pk.size());
    for (std::size_t i = 0; i < pk.size(); ++i) {
      for (std::size_t j = 0; j < hk.size(); ++j) {
        if (g_.edge_label(hk[j]) == idx_.in_label[pk[i]] && subtree_matches(pk[i], hk[j]))
          adj[i].push_back(static_cast<int>(j));
      }
      if (adj[i].empty()) return false;
    }
    return perfect_matching(adj, hk.size());
  }

 private:
  // Kuhn's augmenting paths: every pattern child gets a distinct host child.
  static bool perfect_matching(const std::vector<std::vector<int>>& adj, std::size_t right) {
    std::vector<int> owner(right, -1);
    std::function<bool(int, std::vector<char>&)> augment = [&](int u, std::vector<char>& seen) {
      for (int v : adj[u]) {
        if (seen[v]) continue;
        seen[v] = 1;
        if (owner[v] == -1 || augment(owner[v], seen)) {
          owner[v] = u;
          return true;
        }
      }
      return false;
    };
    for (std::size_t u = 0; u < adj.size(); ++u) {
      std::vector<char> seen(right, 0);
      if (!augment(static_cast<int>(u), seen)) return false;
    }
    return true;
  }

  const AstGraph& g_;
  const Pattern& p_;
  detail::PatternIndex idx_;
};

}  // namespace

bool contains_pattern(const AstGraph& graph, const Pattern& pattern) {
  if (graph.empty()) return false;
  Matcher m(graph, pattern);
  const int root = m.index().root;
  for (NodeId h = 0; h < graph.size(); ++h)
    if (m.subtree_matches(root, h)) return true;
  return false;
}

std::vector<PatternInstance> find_instances(const AstGraph& graph, const Pattern& pattern,
                                            std::size_t limit) {
  std::vector<PatternInstance> out;
  if (graph.empty() || limit == 0) return out;
  Matcher m(graph, pattern);
  const auto& idx = m.index();
  const int n = static_cast<int>(pattern.nodes.size());
  std::vector<NodeId> mapping(n, kNoNode);
  std::vector<char> used(graph.size(), 0);

  auto consistent = [&](int pp, NodeId h) {
    if (used[h] || !m.subtree_matches(pp, h)) return false;
    const int par = idx.parent[pp];
    if (par != -1 && mapping[par] != kNoNode) {
      if (graph.parent(h) != mapping[par] || graph.edge_label(h) != idx.in_label[pp]) return false;
    }
    for (int c : idx.children[pp]) {
      if (mapping[c] == kNoNode) continue;
      if (graph.parent(mapping[c]) != h || graph.edge_label(mapping[c]) != idx.in_label[c]) return false;
    }
    return true;
  };

  // Assigning positions in order while trying host ids ascending yields the
  // embeddings in lexicographic order of the mapping vector.
  std::function<void(int)> assign = [&](int pp) {
    if (out.size() >= limit) return;
    if (pp == n) {
      PatternInstance inst;
      inst.pattern_id = pattern.id;
      inst.mapping = mapping;
      inst.root_span = graph.node(mapping[idx.root]).span;
      out.push_back(std::move(inst));
      return;
    }
    auto try_host = [&](NodeId h) {
      if (!consistent(pp, h)) return;
      mapping[pp] = h;
      used[h] = 1;
      assign(pp + 1);
      used[h] = 0;
      mapping[pp] = kNoNode;
    };
    const int par = idx.parent[pp];
    if (par != -1 && mapping[par] != kNoNode) {
      const auto kids = graph.children(mapping[par]);
      std::vector<NodeId> sorted(kids.begin(), kids.end());
      std::sort(sorted.begin(), sorted.end());
      for (NodeId h : sorted) {
        try_host(h);
        if (out.size() >= limit) return;
      }
    } else {
      for (NodeId h = 0; h < graph.size(); ++h) {
        try_host(h);
        if (out.size() >= limit) return;
      }
    }
  };
  assign(0);
  return out;
}

}  // namespace astveil
