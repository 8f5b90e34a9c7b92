#include "astveil/pattern.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include "astveil/errors.hpp"
#include "detail/pattern_index.hpp"

namespace astveil {

namespace {

// Subtree encoding: OPEN edge label CHILDREN... CLOSE. CLOSE sorts after OPEN,
// which keeps the canonical form stable when the last preorder leaf is removed.
struct Tok {
  int kind;  // 0 = open, 1 = label, 2 = close
  std::string text;
  friend auto operator<=>(const Tok&, const Tok&) = default;
};
using Code = std::vector<Tok>;

struct Canon {
  Code code;
  std::vector<int> preorder;
};

Canon canonicalize(const Pattern& p, const detail::PatternIndex& t) {
  std::function<Canon(int)> rec = [&](int u) -> Canon {
    std::vector<Canon> kids;
    kids.reserve(t.children[u].size());
    for (int c : t.children[u]) kids.push_back(rec(c));
    std::stable_sort(kids.begin(), kids.end(),
                     [](const Canon& a, const Canon& b) { return a.code < b.code; });
    Canon out;
    out.code.push_back({0, {}});
    out.code.push_back({1, t.in_label[u]});
    out.code.push_back({1, p.nodes[u].kind});
    out.preorder.push_back(u);
    for (auto& k : kids) {
      out.code.insert(out.code.end(), k.code.begin(), k.code.end());
      out.preorder.insert(out.preorder.end(), k.preorder.begin(), k.preorder.end());
    }
    out.code.push_back({2, {}});
    return out;
  };
  return rec(t.root);
}

std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '%': out += "%25"; break;
      case '(': out += "%28"; break;
      case ')': out += "%29"; break;
      case ',': out += "%2C"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render(const Pattern& p, const detail::PatternIndex& t, const std::vector<int>& preorder) {
  std::vector<int> rank(preorder.size());
  for (std::size_t i = 0; i < preorder.size(); ++i) rank[preorder[i]] = static_cast<int>(i);
  if (preorder.size() == 1) return "(0," + escape(p.nodes[preorder[0]].kind) + ")";
  // gSpan forward-edge tuples (i, j, l_i, l_e, l_j) in DFS discovery order.
  std::string out;
  for (std::size_t j = 1; j < preorder.size(); ++j) {
    const int v = preorder[j];
    const int u = t.parent[v];
    out += '(';
    out += std::to_string(rank[u]);
    out += ',';
    out += std::to_string(j);
    out += ',';
    out += escape(p.nodes[u].kind);
    out += ',';
    out += escape(t.in_label[v]);
    out += ',';
    out += escape(p.nodes[v].kind);
    out += ')';
  }
  return out;
}

}  // namespace

int Pattern::root() const {
  std::vector<bool> has_parent(nodes.size(), false);
  for (const auto& e : edges)
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].local_id == e.child) has_parent[i] = true;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (!has_parent[i]) return nodes[i].local_id;
  throw Disconnected("pattern has no root");
}

const std::string& Pattern::root_kind() const {
  const int r = root();
  for (const auto& n : nodes)
    if (n.local_id == r) return n.kind;
  throw Disconnected("pattern has no root");
}

std::string canonical_dfs_code(const Pattern& pattern) {
  const auto t = detail::index_pattern(pattern);
  const Canon c = canonicalize(pattern, t);
  return render(pattern, t, c.preorder);
}

Pattern make_pattern(std::string id, std::vector<PatternNode> nodes, std::vector<PatternEdge> edges) {
  Pattern raw{std::move(id), std::move(nodes), std::move(edges), {}};
  const auto t = detail::index_pattern(raw);
  const Canon c = canonicalize(raw, t);
  Pattern out;
  out.id = raw.id;
  std::vector<int> rank(c.preorder.size());
  for (std::size_t i = 0; i < c.preorder.size(); ++i) {
    rank[c.preorder[i]] = static_cast<int>(i);
    out.nodes.push_back({static_cast<int>(i), raw.nodes[c.preorder[i]].kind});
  }
  for (std::size_t i = 1; i < c.preorder.size(); ++i) {
    const int v = c.preorder[i];
    out.edges.push_back({rank[t.parent[v]], static_cast<int>(i), t.in_label[v]});
  }
  out.canonical_code = render(raw, t, c.preorder);
  return out;
}

Pattern single_node_pattern(std::string id, std::string kind) {
  return make_pattern(std::move(id), {{0, std::move(kind)}}, {});
}

namespace detail {

PatternIndex index_pattern(const Pattern& p) {
  const int n = static_cast<int>(p.nodes.size());
  if (n == 0) throw Disconnected("pattern has no nodes");
  std::map<int, int> pos;
  for (int i = 0; i < n; ++i) {
    if (!pos.emplace(p.nodes[i].local_id, i).second) throw Disconnected("duplicate local id");
  }
  PatternIndex t;
  t.children.assign(n, {});
  t.parent.assign(n, -1);
  t.in_label.assign(n, std::string());
  if (p.edges.size() != static_cast<std::size_t>(n - 1))
    throw Disconnected("pattern edges do not form a single tree");
  for (const auto& e : p.edges) {
    auto pi = pos.find(e.parent);
    auto ci = pos.find(e.child);
    if (pi == pos.end() || ci == pos.end()) throw Disconnected("edge references unknown node");
    if (t.parent[ci->second] != -1 || ci->second == pi->second)
      throw Disconnected("node with two parents");
    t.parent[ci->second] = pi->second;
    t.in_label[ci->second] = e.label;
    t.children[pi->second].push_back(ci->second);
  }
  for (int i = 0; i < n; ++i) {
    if (t.parent[i] == -1) {
      if (t.root != -1) throw Disconnected("pattern has more than one root");
      t.root = i;
    }
  }
  if (t.root == -1) throw Disconnected("pattern has a cycle");
  int seen = 0;
  std::vector<int> stack{t.root};
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    ++seen;
    for (int c : t.children[u]) stack.push_back(c);
  }
  if (seen != n) throw Disconnected("pattern is not connected");
  return t;
}

}  // namespace detail

}  // namespace astveil
