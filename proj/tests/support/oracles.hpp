#pragma once

// Deliberately naive reference implementations. They share no code with the
// library beyond the AstGraph/Pattern data types.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "astveil/code_graph.hpp"
#include "astveil/pattern.hpp"

namespace oracle {

using astveil::AstEdge;
using astveil::AstGraph;
using astveil::AstNode;
using astveil::NodeId;
using astveil::Pattern;
using astveil::PatternEdge;
using astveil::PatternNode;

// Plain adjacency form of a labeled rooted tree.
struct Tree {
  std::vector<std::string> labels;
  std::vector<int> parent;                                   // -1 for the root
  std::vector<std::vector<std::pair<std::string, int>>> kids;  // (edge label, child)
  int root = 0;
};

inline Tree from_graph(const AstGraph& g) {
  Tree t;
  const auto n = g.size();
  t.labels.resize(n);
  t.parent.assign(n, -1);
  t.kids.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.labels[i] = g.node(static_cast<NodeId>(i)).kind;
  for (const auto& e : g.edges()) {
    t.parent[e.child] = static_cast<int>(e.parent);
    t.kids[e.parent].push_back({e.label, static_cast<int>(e.child)});
  }
  t.root = static_cast<int>(g.root());
  return t;
}

inline Tree from_pattern(const Pattern& p) {
  Tree t;
  const auto n = p.nodes.size();
  std::map<int, int> index;
  for (std::size_t i = 0; i < n; ++i) index[p.nodes[i].local_id] = static_cast<int>(i);
  t.labels.resize(n);
  t.parent.assign(n, -1);
  t.kids.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.labels[i] = p.nodes[i].kind;
  for (const auto& e : p.edges) {
    const int a = index.at(e.parent), b = index.at(e.child);
    t.parent[b] = a;
    t.kids[a].push_back({e.label, b});
  }
  for (std::size_t i = 0; i < n; ++i)
    if (t.parent[i] < 0) t.root = static_cast<int>(i);
  return t;
}

// AHU-style encoding restricted to the node set `keep` (all nodes if empty).
inline std::string ahu(const Tree& t, int v, const std::vector<bool>& keep = {}) {
  std::vector<std::string> parts;
  for (const auto& [label, c] : t.kids[v])
    if (keep.empty() || keep[c]) parts.push_back(label + ":" + ahu(t, c, keep));
  std::sort(parts.begin(), parts.end());
  std::string s = "[" + t.labels[v];
  for (const auto& p : parts) s += " " + p;
  return s + "]";
}

inline std::string ahu(const Pattern& p) {
  const auto t = from_pattern(p);
  return ahu(t, t.root);
}

// Every connected subtree with at most max_edges edges, by AHU code.
inline std::set<std::string> all_subtrees(const AstGraph& g, std::size_t max_edges) {
  const Tree t = from_graph(g);
  const int n = static_cast<int>(t.labels.size());
  std::set<std::string> out;
  // Connected subtrees of a rooted tree are exactly the upward-closed node
  // sets below some top node; enumerate them as bitmasks.
  for (int top = 0; top < n; ++top) {
    std::vector<int> below;
    std::function<void(int)> collect = [&](int v) {
      below.push_back(v);
      for (const auto& kc : t.kids[v]) collect(kc.second);
    };
    collect(top);
    const int m = static_cast<int>(below.size());
    for (std::uint32_t mask = 1; mask < (1u << m); mask += 2) {  // bit 0 = top, always in
      std::vector<bool> keep(n, false);
      std::size_t count = 0;
      for (int i = 0; i < m; ++i)
        if (mask >> i & 1) keep[below[i]] = true, ++count;
      bool closed = true;
      for (int i = 1; i < m && closed; ++i)
        if (keep[below[i]] && !keep[t.parent[below[i]]]) closed = false;
      if (!closed || count - 1 > max_edges) continue;
      out.insert(ahu(t, top, keep));
    }
  }
  return out;
}

// Frequent connected subtrees by brute force: AHU code -> support.
inline std::map<std::string, std::size_t> frequent_subtrees(const std::vector<AstGraph>& graphs,
                                                            std::size_t min_support, std::size_t max_edges) {
  std::map<std::string, std::size_t> support;
  for (const auto& g : graphs)
    for (const auto& code : all_subtrees(g, max_edges)) ++support[code];
  for (auto it = support.begin(); it != support.end();)
    it = it->second < min_support ? support.erase(it) : std::next(it);
  return support;
}

// Backtracking embedding search, pattern nodes assigned in BFS order.
inline bool embeds(const AstGraph& g, const Pattern& p) {
  const Tree host = from_graph(g);
  const Tree pat = from_pattern(p);
  std::vector<int> order{pat.root};
  for (std::size_t i = 0; i < order.size(); ++i)
    for (const auto& kc : pat.kids[order[i]]) order.push_back(kc.second);
  std::vector<int> image(pat.labels.size(), -1);
  std::vector<bool> used(host.labels.size(), false);
  std::function<bool(std::size_t)> place = [&](std::size_t i) {
    if (i == order.size()) return true;
    const int v = order[i];
    for (int h = 0; h < static_cast<int>(host.labels.size()); ++h) {
      if (used[h] || host.labels[h] != pat.labels[v]) continue;
      if (pat.parent[v] >= 0) {
        const int hp = image[pat.parent[v]];
        if (host.parent[h] != hp) continue;
        std::string want;
        for (const auto& [label, c] : pat.kids[pat.parent[v]])
          if (c == v) want = label;
        bool ok = false;
        for (const auto& [label, c] : host.kids[hp])
          if (c == h && label == want) ok = true;
        if (!ok) continue;
      }
      image[v] = h;
      used[h] = true;
      if (place(i + 1)) return true;
      used[h] = false;
      image[v] = -1;
    }
    return false;
  };
  return place(0);
}

// Exhaustive isomorphism test of two small patterns.
inline bool isomorphic(const Pattern& a, const Pattern& b) {
  if (a.nodes.size() != b.nodes.size() || a.edges.size() != b.edges.size()) return false;
  const Tree ta = from_pattern(a), tb = from_pattern(b);
  std::vector<int> perm(ta.labels.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  do {
    bool ok = true;
    for (std::size_t i = 0; i < perm.size() && ok; ++i) {
      if (ta.labels[i] != tb.labels[perm[i]]) ok = false;
      else if ((ta.parent[i] < 0) != (tb.parent[perm[i]] < 0)) ok = false;
      else if (ta.parent[i] >= 0 && tb.parent[perm[i]] != perm[ta.parent[i]]) ok = false;
    }
    if (!ok) continue;
    for (std::size_t i = 0; i < perm.size() && ok; ++i) {
      if (ta.parent[i] < 0) continue;
      std::string la, lb;
      for (const auto& [l, c] : ta.kids[ta.parent[i]])
        if (c == static_cast<int>(i)) la = l;
      for (const auto& [l, c] : tb.kids[tb.parent[perm[i]]])
        if (c == perm[i]) lb = l;
      ok = la == lb;
    }
    if (ok) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

inline const std::vector<std::string>& alphabet() {
  static const std::vector<std::string> a{"a", "b", "c", "d"};
  return a;
}

// Random rooted tree in preorder ids, labels from `labels`, edge labels from `edge_labels`.
inline AstGraph random_tree(std::mt19937_64& rng, std::size_t nodes, const std::vector<std::string>& labels,
                            const std::vector<std::string>& edge_labels = {"child"}) {
  std::vector<int> parent(nodes, -1);
  for (std::size_t i = 1; i < nodes; ++i) parent[i] = std::uniform_int_distribution<int>(0, static_cast<int>(i) - 1)(rng);
  // Relabel into preorder so parents precede children in id order.
  std::vector<std::vector<int>> kids(nodes);
  for (std::size_t i = 1; i < nodes; ++i) kids[parent[i]].push_back(static_cast<int>(i));
  std::vector<int> pre;
  std::function<void(int)> walk = [&](int v) {
    pre.push_back(v);
    for (int c : kids[v]) walk(c);
  };
  walk(0);
  std::vector<int> id(nodes);
  for (std::size_t i = 0; i < nodes; ++i) id[pre[i]] = static_cast<int>(i);
  std::vector<AstNode> ns(nodes);
  std::vector<AstEdge> es;
  for (std::size_t k = 0; k < nodes; ++k) {
    const int v = pre[k];
    ns[k].kind = labels[std::uniform_int_distribution<std::size_t>(0, labels.size() - 1)(rng)];
    ns[k].span = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(nodes)};
    if (parent[v] >= 0)
      es.push_back({static_cast<NodeId>(id[parent[v]]), static_cast<NodeId>(k),
                    edge_labels[std::uniform_int_distribution<std::size_t>(0, edge_labels.size() - 1)(rng)]});
  }
  return AstGraph(std::move(ns), std::move(es), 0);
}

// Random connected pattern with nodes in arbitrary (non-canonical) order.
inline Pattern random_pattern(std::mt19937_64& rng, std::size_t nodes, const std::vector<std::string>& labels,
                              const std::vector<std::string>& edge_labels = {"child"}) {
  Pattern p;
  std::vector<int> ids(nodes);
  for (std::size_t i = 0; i < nodes; ++i) ids[i] = static_cast<int>(i);
  std::shuffle(ids.begin(), ids.end(), rng);
  for (std::size_t i = 0; i < nodes; ++i)
    p.nodes.push_back({ids[i], labels[std::uniform_int_distribution<std::size_t>(0, labels.size() - 1)(rng)]});
  for (std::size_t i = 1; i < nodes; ++i) {
    const auto par = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    p.edges.push_back({ids[par], ids[i],
                       edge_labels[std::uniform_int_distribution<std::size_t>(0, edge_labels.size() - 1)(rng)]});
  }
  return p;
}

inline std::int64_t cork_term(const Pattern& p, const std::vector<AstGraph>& pos, const std::vector<AstGraph>& neg) {
  std::int64_t pw = 0, nw = 0;
  for (const auto& g : pos) pw += embeds(g, p);
  for (const auto& g : neg) nw += embeds(g, p);
  const std::int64_t pwo = static_cast<std::int64_t>(pos.size()) - pw;
  const std::int64_t nwo = static_cast<std::int64_t>(neg.size()) - nw;
  return nwo * pwo + nw * pw;
}

}  // namespace oracle
