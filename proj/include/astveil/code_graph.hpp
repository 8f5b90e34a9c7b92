#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "astveil/language.hpp"

namespace astveil {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = static_cast<NodeId>(-1);

// Half-open byte range [start, end) into a source text.
struct Span {
  std::uint32_t start = 0;
  std::uint32_t end = 0;

  std::uint32_t size() const { return end - start; }
  bool contains(const Span& other) const { return start <= other.start && other.end <= end; }
  bool overlaps(const Span& other) const { return start < other.end && other.start < end; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct SourceUnit {
  std::string id;
  Language language = Language::c;
  std::string text;
  // Only populated for augmentation; the attack never reads it.
  std::optional<int> label_hint;

  friend bool operator==(const SourceUnit&, const SourceUnit&) = default;
};

struct AstNode {
  std::string kind;
  Span span;
  bool named = true;
  bool error = false;    // kind == "ERROR"
  bool missing = false;  // inserted by error recovery, or a zero-width placeholder

  friend bool operator==(const AstNode&, const AstNode&) = default;
};

struct AstEdge {
  NodeId parent = 0;
  NodeId child = 0;
  std::string label;  // grammar field name, or "child"

  friend bool operator==(const AstEdge&, const AstEdge&) = default;
};

inline constexpr std::string_view kChildEdge = "child";

// Rooted labeled tree. Node ids are dense; builders emit them in preorder so
// a parent always has a smaller id than its children.
class AstGraph {
 public:
  AstGraph() = default;
  // Validates that edges form a tree rooted at `root`; throws MalformedGraph.
  AstGraph(std::vector<AstNode> nodes, std::vector<AstEdge> edges, NodeId root = 0);

  const std::vector<AstNode>& nodes() const { return nodes_; }
  const std::vector<AstEdge>& edges() const { return edges_; }
  NodeId root() const { return root_; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  const AstNode& node(NodeId id) const { return nodes_.at(id); }
  NodeId parent(NodeId id) const { return parent_.at(id); }
  // Label of the edge from parent(id) to id; empty for the root.
  const std::string& edge_label(NodeId id) const { return edge_label_.at(id); }
  // Children in source order.
  std::span<const NodeId> children(NodeId id) const;
  bool is_leaf(NodeId id) const { return children(id).empty(); }

  // Child reached through the given field label, if any.
  std::optional<NodeId> field_child(NodeId id, std::string_view field) const;

  friend bool operator==(const AstGraph& a, const AstGraph& b) {
    return a.root_ == b.root_ && a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
  }

 private:
  std::vector<AstNode> nodes_;
  std::vector<AstEdge> edges_;
  NodeId root_ = 0;
  std::vector<NodeId> parent_;
  std::vector<std::string> edge_label_;
  std::vector<std::uint32_t> child_offset_;
  std::vector<NodeId> child_ids_;
};

struct Statement {
  std::string owner;
  Span span;
  NodeId node = 0;

  friend bool operator==(const Statement&, const Statement&) = default;
};

struct Token {
  std::string kind;
  Span span;
  std::string text;
};

// Full concrete syntax tree. Throws UnsupportedLanguage or NonUtf8Input.
AstGraph parse_source(const SourceUnit& unit);
AstGraph parse_text(std::string_view text, Language language);

// True iff any node is an ERROR node or a missing node. Throws EmptyGraph.
bool has_parse_error(const AstGraph& graph);

// Statement-kind nodes in source order, nested statements included.
std::vector<Statement> extract_statements(const AstGraph& graph, const SourceUnit& unit);

// Deletes the statement; nullopt ("Skip") when the remainder no longer parses.
// Throws SpanOutOfBounds.
std::optional<SourceUnit> remove_statement(const SourceUnit& unit, const Statement& stmt);

// Leaf tokens (comments and zero-width leaves excluded).
std::vector<Token> tokenize(const SourceUnit& unit);
std::vector<Token> tokenize(const AstGraph& graph, std::string_view text, Language language);
std::size_t count_tokens(const AstGraph& graph, Language language, std::optional<Span> within = {});

// Tree-sitter style S-expression of named nodes, handy for debugging and tests.
std::string to_sexp(const AstGraph& graph);

// Byte offsets of line boundaries.
std::uint32_t line_start(std::string_view text, std::uint32_t pos);
std::uint32_t line_end(std::string_view text, std::uint32_t pos);
std::string_view line_indent(std::string_view text, std::uint32_t pos);

}  // namespace astveil
