#include "astveil/code_graph.hpp"

#include <tree_sitter/api.h>

#include <algorithm>
#include <memory>

#include "astveil/errors.hpp"

extern "C" {
const TSLanguage* tree_sitter_c(void);
const TSLanguage* tree_sitter_java(void);
const TSLanguage* tree_sitter_python(void);
}

namespace astveil {

AstGraph::AstGraph(std::vector<AstNode> nodes, std::vector<AstEdge> edges, NodeId root)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), root_(root) {
  const auto n = nodes_.size();
  if (n == 0) {
    if (!edges_.empty()) throw MalformedGraph("edges without nodes");
    return;
  }
  if (root_ >= n) throw MalformedGraph("root out of range");
  if (edges_.size() != n - 1) throw MalformedGraph("a tree over n nodes needs n-1 edges");
  parent_.assign(n, kNoNode);
  edge_label_.assign(n, std::string());
  std::vector<std::uint32_t> degree(n, 0);
  for (const auto& e : edges_) {
    if (e.parent >= n || e.child >= n) throw MalformedGraph("edge endpoint out of range");
    if (e.child == root_ || parent_[e.child] != kNoNode)
      throw MalformedGraph("node has more than one parent");
    parent_[e.child] = e.parent;
    edge_label_[e.child] = e.label;
    ++degree[e.parent];
  }
  child_offset_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) child_offset_[i + 1] = child_offset_[i] + degree[i];
  child_ids_.assign(n - 1, 0);
  std::vector<std::uint32_t> fill(child_offset_.begin(), child_offset_.end() - 1);
  // Edge order within a parent is source order when builders emit edges in preorder.
  for (const auto& e : edges_) child_ids_[fill[e.parent]++] = e.child;
  // Reachability from the root (rules out cycles among non-root nodes).
  std::vector<NodeId> stack{root_};
  std::size_t seen = 0;
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    ++seen;
    for (auto c : children(id)) stack.push_back(c);
  }
  if (seen != n) throw MalformedGraph("edges do not connect every node to the root");
}

std::span<const NodeId> AstGraph::children(NodeId id) const {
  if (nodes_.empty()) return {};
  const auto begin = child_offset_.at(id);
  const auto end = child_offset_.at(id + 1);
  return std::span<const NodeId>(child_ids_.data() + begin, end - begin);
}

std::optional<NodeId> AstGraph::field_child(NodeId id, std::string_view field) const {
  for (auto c : children(id))
    if (edge_label_[c] == field) return c;
  return std::nullopt;
}

namespace {

const TSLanguage* grammar(Language language) {
  switch (language) {
    case Language::c: return tree_sitter_c();
    case Language::java: return tree_sitter_java();
    case Language::python: return tree_sitter_python();
  }
  throw UnsupportedLanguage("no grammar");
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  const auto n = s.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates and out-of-range code points.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += len;
  }
  return true;
}

struct ParserDeleter {
  void operator()(TSParser* p) const { ts_parser_delete(p); }
};
struct TreeDeleter {
  void operator()(TSTree* t) const { ts_tree_delete(t); }
};

}  // namespace

AstGraph parse_text(std::string_view text, Language language) {
  if (!valid_utf8(text)) throw NonUtf8Input("source text is not valid UTF-8");
  std::unique_ptr<TSParser, ParserDeleter> parser(ts_parser_new());
  if (!ts_parser_set_language(parser.get(), grammar(language)))
    throw UnsupportedLanguage("grammar ABI mismatch for " + std::string(to_string(language)));
  std::unique_ptr<TSTree, TreeDeleter> tree(
      ts_parser_parse_string(parser.get(), nullptr, text.data(), static_cast<std::uint32_t>(text.size())));
  if (!tree) throw UnsupportedLanguage("parser returned no tree");

  std::vector<AstNode> nodes;
  std::vector<AstEdge> edges;
  const TSNode root = ts_tree_root_node(tree.get());
  TSTreeCursor cursor = ts_tree_cursor_new(root);
  std::vector<NodeId> ancestry;

  // Preorder walk with an explicit ancestry stack.
  for (;;) {
    const TSNode node = ts_tree_cursor_current_node(&cursor);
    const NodeId id = static_cast<NodeId>(nodes.size());
    AstNode out;
    out.kind = ts_node_type(node);
    out.span = {ts_node_start_byte(node), ts_node_end_byte(node)};
    out.named = ts_node_is_named(node);
    out.error = ts_node_is_error(node) || out.kind == "ERROR";
    out.missing = ts_node_is_missing(node) || (!ancestry.empty() && out.span.start == out.span.end);
    nodes.push_back(std::move(out));
    if (!ancestry.empty()) {
      const char* field = ts_tree_cursor_current_field_name(&cursor);
      edges.push_back({ancestry.back(), id, field ? std::string(field) : std::string(kChildEdge)});
    }
    if (ts_tree_cursor_goto_first_child(&cursor)) {
      ancestry.push_back(id);
      continue;
    }
    bool advanced = false;
    while (!advanced) {
      if (ts_tree_cursor_goto_next_sibling(&cursor)) {
        advanced = true;
      } else if (ts_tree_cursor_goto_parent(&cursor)) {
        ancestry.pop_back();
      } else {
        break;
      }
    }
    if (!advanced) break;
  }
  ts_tree_cursor_delete(&cursor);
  return AstGraph(std::move(nodes), std::move(edges), 0);
}

AstGraph parse_source(const SourceUnit& unit) { return parse_text(unit.text, unit.language); }

bool has_parse_error(const AstGraph& graph) {
  if (graph.empty()) throw EmptyGraph("graph has no nodes");
  return std::any_of(graph.nodes().begin(), graph.nodes().end(),
                     [](const AstNode& n) { return n.error || n.missing; });
}

std::vector<Statement> extract_statements(const AstGraph& graph, const SourceUnit& unit) {
  std::vector<Statement> out;
  const auto& prof = profile(unit.language);
  // Node ids are preorder, so id order is source order with parents first.
  for (NodeId id = 0; id < graph.size(); ++id) {
    const auto& n = graph.node(id);
    if (n.named && prof.is_statement(n.kind)) out.push_back({unit.id, n.span, id});
  }
  return out;
}

std::uint32_t line_start(std::string_view text, std::uint32_t pos) {
  pos = std::min<std::uint32_t>(pos, static_cast<std::uint32_t>(text.size()));
  while (pos > 0 && text[pos - 1] != '\n') --pos;
  return pos;
}

std::uint32_t line_end(std::string_view text, std::uint32_t pos) {
  const auto n = static_cast<std::uint32_t>(text.size());
  while (pos < n && text[pos] != '\n') ++pos;
  return pos;
}

std::string_view line_indent(std::string_view text, std::uint32_t pos) {
  const auto start = line_start(text, pos);
  auto end = start;
  while (end < text.size() && (text[end] == ' ' || text[end] == '\t')) ++end;
  return text.substr(start, end - start);
}

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

}  // namespace

std::optional<SourceUnit> remove_statement(const SourceUnit& unit, const Statement& stmt) {
  const std::string_view text = unit.text;
  if (stmt.span.start > stmt.span.end || stmt.span.end > text.size())
    throw SpanOutOfBounds("statement span outside the unit text");

  auto del_start = stmt.span.start;
  auto del_end = stmt.span.end;
  const auto ls = line_start(text, del_start);
  const auto le = line_end(text, del_end);
  const bool alone_on_lines =
      blank(text.substr(ls, del_start - ls)) && blank(text.substr(del_end, le - del_end));
  if (alone_on_lines) {
    // Drop whole lines so no dangling indentation is left behind.
    del_start = ls;
    del_end = le < text.size() ? le + 1 : le;
  } else if (unit.language == Language::python) {
    // `a = 1; b = 2`: also drop the separator next to the statement.
    auto j = del_end;
    while (j < le && (text[j] == ' ' || text[j] == '\t')) ++j;
    if (j < le && text[j] == ';') {
      del_end = j + 1;
      while (del_end < le && (text[del_end] == ' ' || text[del_end] == '\t')) ++del_end;
    } else {
      auto k = del_start;
      while (k > ls && (text[k - 1] == ' ' || text[k - 1] == '\t')) --k;
      if (k > ls && text[k - 1] == ';') del_start = k - 1;
    }
  }

  SourceUnit out = unit;
  out.text.erase(del_start, del_end - del_start);
  if (out.text.find_first_not_of(" \t\r\n") == std::string::npos) {
    // Nothing left: an empty unit is trivially well-formed.
    return out;
  }
  if (has_parse_error(parse_source(out))) return std::nullopt;
  return out;
}

std::vector<Token> tokenize(const AstGraph& graph, std::string_view text, Language language) {
  std::vector<Token> out;
  if (graph.empty()) return out;
  const auto& prof = profile(language);
  for (NodeId id = 0; id < graph.size(); ++id) {
    const auto& n = graph.node(id);
    if (!graph.is_leaf(id) || n.span.size() == 0 || prof.is_comment(n.kind)) continue;
    if (id == graph.root()) continue;
    out.push_back({n.kind, n.span, std::string(text.substr(n.span.start, n.span.size()))});
  }
  return out;
}

std::vector<Token> tokenize(const SourceUnit& unit) {
  if (unit.text.empty()) return {};
  return tokenize(parse_source(unit), unit.text, unit.language);
}

std::size_t count_tokens(const AstGraph& graph, Language language, std::optional<Span> within) {
  if (graph.empty()) return 0;
  const auto& prof = profile(language);
  std::size_t count = 0;
  for (NodeId id = 0; id < graph.size(); ++id) {
    const auto& n = graph.node(id);
    if (id == graph.root() || !graph.is_leaf(id) || n.span.size() == 0 || prof.is_comment(n.kind))
      continue;
    if (within && !within->contains(n.span)) continue;
    ++count;
  }
  return count;
}

namespace {

void sexp(const AstGraph& g, NodeId id, std::string& out) {
  out += '(';
  out += g.node(id).missing && g.node(id).span.size() == 0 && !g.node(id).named ? "MISSING " : "";
  out += g.node(id).kind;
  for (auto c : g.children(id)) {
    if (!g.node(c).named) continue;
    out += ' ';
    if (g.edge_label(c) != kChildEdge) {
      out += g.edge_label(c);
      out += ": ";
    }
    sexp(g, c, out);
  }
  out += ')';
}

}  // namespace

std::string to_sexp(const AstGraph& graph) {
  std::string out;
  if (!graph.empty()) sexp(graph, graph.root(), out);
  return out;
}

}  // namespace astveil
