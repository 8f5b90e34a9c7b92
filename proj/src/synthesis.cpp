#include "astveil/synthesis.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <json.hpp>

#include "astveil/embedded_data.hpp"
#include "astveil/errors.hpp"

namespace astveil {

std::string_view to_string(GuardKind kind) {
  return kind == GuardKind::conditional ? "conditional" : "plain";
}

GuardKind guard_kind_from_string(std::string_view name) {
  if (name == "conditional") return GuardKind::conditional;
  if (name == "plain") return GuardKind::plain;
  throw FormatError("unknown guard kind: " + std::string(name));
}

std::string GuardTable::guard_prefix() const {
  const auto at = condition_guard.find("<COND>");
  return at == std::string::npos ? condition_guard : condition_guard.substr(0, at);
}

GuardTable load_guard_table(std::string_view json_text, Language language) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("guards.json: ") + e.what());
  }
  const auto key = std::string(to_string(language));
  if (!doc.contains("languages") || !doc["languages"].contains(key))
    throw UnsupportedLanguage("no guard table for language " + key);
  const auto& e = doc["languages"][key];
  GuardTable t;
  t.language = language;
  t.conditional_kinds = e.at("conditional_kinds").get<std::vector<std::string>>();
  t.condition_guard = e.at("condition_guard").get<std::string>();
  if (t.condition_guard.find("<COND>") == std::string::npos)
    throw FormatError("condition_guard for " + key + " lacks <COND>");
  t.false_literal = e.at("false_literal").get<std::string>();
  t.dead_block_open = e.at("dead_block_open").get<std::string>();
  t.dead_block_close = e.value("dead_block_close", std::string());
  t.statement_terminator = e.value("statement_terminator", std::string());
  t.mask_leaf_kinds = e.at("mask_leaf_kinds").get<std::vector<std::string>>();
  t.verbatim_kinds = e.value("verbatim_kinds", std::vector<std::string>{});
  t.paren_wrapper_kinds = e.value("paren_wrapper_kinds", std::vector<std::string>{});
  return t;
}

const GuardTable& guard_table(Language language) {
  static const std::array<GuardTable, 3> tables = {
      load_guard_table(embedded::kGuardsJson, Language::python),
      load_guard_table(embedded::kGuardsJson, Language::java),
      load_guard_table(embedded::kGuardsJson, Language::c),
  };
  return tables[static_cast<std::size_t>(language)];
}

std::size_t count_masks(std::string_view text) {
  std::size_t n = 0;
  for (auto at = text.find(kMask); at != std::string_view::npos; at = text.find(kMask, at + kMask.size()))
    ++n;
  return n;
}

std::string replace_masks(std::string_view text, const std::vector<std::string>& fills) {
  if (count_masks(text) != fills.size())
    throw LengthMismatch("expected " + std::to_string(count_masks(text)) + " fills, got " +
                         std::to_string(fills.size()));
  std::string out;
  std::size_t pos = 0;
  for (const auto& f : fills) {
    const auto at = text.find(kMask, pos);
    out.append(text.substr(pos, at - pos));
    out += f;
    pos = at + kMask.size();
  }
  out.append(text.substr(pos));
  return out;
}

namespace {

constexpr char kCondOpen = '\x01';
constexpr char kCondClose = '\x02';

class TemplateWriter {
 public:
  TemplateWriter(const AstGraph& g, std::string_view text, const GuardTable& gt, const LanguageProfile& prof)
      : g_(g), text_(text), gt_(gt), prof_(prof), mapped_(g.size(), 0) {}

  void map(NodeId v) { mapped_[v] = 1; }
  void set_condition(NodeId v) { cond_ = v; }
  bool alternative_kept() const { return alternative_kept_; }

  std::string write(NodeId root) {
    out_.clear();
    emit_mapped(root);
    return out_;
  }

 private:
  std::string_view slice(Span s) const { return text_.substr(s.start, s.size()); }

  void emit_mapped(NodeId v) {
    const auto& n = g_.node(v);
    if (g_.is_leaf(v)) {
      if (contains_kind(gt_.verbatim_kinds, n.kind) || !contains_kind(gt_.mask_leaf_kinds, n.kind))
        out_ += slice(n.span);
      else
        out_ += kMask;
      return;
    }
    const auto kids = g_.children(v);
    // Unmapped else branches are dropped: a dead condition would run them.
    std::vector<char> omit(kids.size(), 0);
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const NodeId c = kids[i];
      if (prof_.is_comment(g_.node(c).kind)) omit[i] = 1;
      if (g_.edge_label(c) == "alternative") {
        if (mapped_[c]) {
          alternative_kept_ = true;
        } else {
          omit[i] = 1;
          if (i > 0 && g_.node(kids[i - 1]).kind == "else" && !g_.node(kids[i - 1]).named) omit[i - 1] = 1;
        }
      }
    }
    auto pos = n.span.start;
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const NodeId c = kids[i];
      const auto& cn = g_.node(c);
      if (omit[i]) {
        pos = cn.span.end;
        continue;
      }
      out_ += text_.substr(pos, cn.span.start - pos);
      if (c == cond_) out_ += kCondOpen;
      if (mapped_[c]) emit_mapped(c);
      else emit_unmapped(c);
      if (c == cond_) out_ += kCondClose;
      pos = cn.span.end;
    }
    if (pos < n.span.end) out_ += text_.substr(pos, n.span.end - pos);
  }

  void emit_unmapped(NodeId c) {
    const auto& n = g_.node(c);
    if (contains_kind(gt_.verbatim_kinds, n.kind)) {
      out_ += slice(n.span);
    } else if (!n.named) {
      if (is_operator_token(n.kind)) out_ += kMask;
      else out_ += slice(n.span);
    } else if (contains_kind(gt_.paren_wrapper_kinds, n.kind)) {
      out_ += '(';
      out_ += kMask;
      out_ += ')';
    } else {
      out_ += kMask;
      const auto kids = g_.children(c);
      if (!kids.empty() && !g_.node(kids.back()).named && g_.node(kids.back()).kind == ";") out_ += ';';
    }
  }

  const AstGraph& g_;
  std::string_view text_;
  const GuardTable& gt_;
  const LanguageProfile& prof_;
  std::vector<char> mapped_;
  NodeId cond_ = kNoNode;
  bool alternative_kept_ = false;
  std::string out_;
};

// Continuation lines lose up to `column` leading blanks so the template
// starts at column zero as a whole.
std::string dedent(const std::string& s, std::size_t column) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  bool first = true;
  while (i <= s.size()) {
    const auto nl = s.find('\n', i);
    const auto end = nl == std::string::npos ? s.size() : nl;
    std::size_t skip = 0;
    if (!first)
      while (skip < column && i + skip < end && (s[i + skip] == ' ' || s[i + skip] == '\t')) ++skip;
    out.append(s, i + skip, end - i - skip);
    if (nl == std::string::npos) break;
    out += '\n';
    i = nl + 1;
    first = false;
  }
  return out;
}

bool has_initializer(const AstGraph& g, NodeId v) {
  return g.field_child(v, "initializer").has_value() || g.field_child(v, "init").has_value();
}

}  // namespace

MaskedTemplate instance_template(const Pattern& pattern, const SourceUnit& unit, const AstGraph& graph,
                                 const PatternInstance& instance) {
  const auto& gt = guard_table(unit.language);
  TemplateWriter w(graph, unit.text, gt, profile(unit.language));
  for (NodeId h : instance.mapping) w.map(h);
  const int root_id = pattern.root();
  const auto root_pos = std::find_if(pattern.nodes.begin(), pattern.nodes.end(),
                                     [&](const PatternNode& n) { return n.local_id == root_id; }) -
                        pattern.nodes.begin();
  const NodeId root = instance.mapping.at(static_cast<std::size_t>(root_pos));
  const auto& root_node = graph.node(root);

  // A loop initializer runs even under a false condition, so such loops
  // are wrapped whole instead of having their condition rewritten.
  std::optional<NodeId> cond;
  if (contains_kind(gt.conditional_kinds, root_node.kind) && !has_initializer(graph, root))
    cond = graph.field_child(root, "condition");
  if (cond) w.set_condition(*cond);

  std::string raw = w.write(root);
  const auto column = root_node.span.start - line_start(unit.text, root_node.span.start);
  raw = dedent(raw, column);

  MaskedTemplate t;
  t.pattern_id = pattern.id;
  t.language = unit.language;
  const auto open = raw.find(kCondOpen);
  const auto close = raw.find(kCondClose);
  if (open != std::string::npos && close != std::string::npos) {
    raw.erase(close, 1);
    raw.erase(open, 1);
    Span span{static_cast<std::uint32_t>(open), static_cast<std::uint32_t>(close - 1)};
    const std::string_view c = std::string_view(raw).substr(span.start, span.size());
    if (contains_kind(gt.paren_wrapper_kinds, graph.node(*cond).kind) && c.size() >= 2 && c.front() == '(' &&
        c.back() == ')') {
      ++span.start;
      --span.end;
    }
    if (!w.alternative_kept()) {
      t.guard_kind = GuardKind::conditional;
      t.condition_span = span;
    }
  }
  t.text = std::move(raw);
  return t;
}

MaskedTemplate pattern_to_template(const Pattern& pattern, const ProbeCorpus& corpus, std::size_t instance_index) {
  std::size_t seen = 0;
  for (const auto& r : corpus.records) {
    auto found = find_instances(r.graph, pattern, instance_index - seen + 1);
    if (seen + found.size() > instance_index)
      return instance_template(pattern, r.unit, r.graph, found[instance_index - seen]);
    seen += found.size();
  }
  throw NoInstanceFound("pattern " + pattern.id + " has no instance in the corpus");
}

namespace {

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t i = 0;
  for (;;) {
    const auto nl = s.find('\n', i);
    if (nl == std::string_view::npos) {
      lines.emplace_back(s.substr(i));
      break;
    }
    lines.emplace_back(s.substr(i, nl - i));
    i = nl + 1;
  }
  return lines;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string_view rtrim(std::string_view s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

MaskedTemplate apply_semantics_guard(const MaskedTemplate& tmpl) {
  if (tmpl.guarded) return tmpl;
  const auto& gt = guard_table(tmpl.language);
  MaskedTemplate out = tmpl;
  out.guarded = true;
  if (tmpl.guard_kind == GuardKind::conditional && tmpl.condition_span) {
    const auto span = *tmpl.condition_span;
    const std::string cond = tmpl.text.substr(span.start, span.size());
    std::string guard = gt.condition_guard;
    guard.replace(guard.find("<COND>"), 6, cond);
    out.text = tmpl.text.substr(0, span.start) + guard + tmpl.text.substr(span.end);
    out.condition_span = Span{span.start, static_cast<std::uint32_t>(span.start + guard.size())};
    return out;
  }

  out.guard_kind = GuardKind::plain;
  out.condition_span.reset();
  std::string body(rtrim(tmpl.text));
  if (tmpl.language == Language::python) {
    std::string s = gt.dead_block_open;
    for (const auto& line : split_lines(body)) {
      s += '\n';
      if (!line.empty()) s += "    " + line;
    }
    out.text = std::move(s);
    return out;
  }
  if (!gt.statement_terminator.empty() && !ends_with(body, gt.statement_terminator) && !ends_with(body, "}"))
    body += gt.statement_terminator;
  if (body.find('\n') == std::string::npos) {
    out.text = gt.dead_block_open + " " + body + " " + gt.dead_block_close;
  } else {
    std::string s = gt.dead_block_open;
    for (const auto& line : split_lines(body)) {
      s += '\n';
      if (!line.empty()) s += "    " + line;
    }
    s += '\n' + gt.dead_block_close;
    out.text = std::move(s);
  }
  return out;
}

MaskedSource render_insertion(const SourceUnit& unit, const AstGraph& graph, const Statement& stmt,
                              const MaskedTemplate& tmpl) {
  const std::string_view text = unit.text;
  if (stmt.span.end > text.size() || stmt.node >= graph.size())
    throw SpanOutOfBounds("statement outside the unit");
  const auto& prof = profile(unit.language);
  const NodeId host = graph.parent(stmt.node);
  if (host == kNoNode || !prof.is_host(graph.node(host).kind))
    throw IndentationUnresolvable("statement is not in a block that can take a sibling");

  const auto indent = std::string(line_indent(text, stmt.span.start));
  std::uint32_t at = stmt.span.end;
  if (unit.language == Language::python) {
    const auto hs = graph.node(host).span.start;
    const auto ls = line_start(text, hs);
    const bool suite_on_header_line =
        graph.node(host).kind != "module" &&
        text.substr(ls, hs - ls).find_first_not_of(" \t") != std::string_view::npos;
    if (suite_on_header_line) throw IndentationUnresolvable("one-line suite");
    at = line_end(text, stmt.span.end);
  }

  std::string inserted;
  for (const auto& line : split_lines(tmpl.text)) {
    inserted += '\n';
    if (!line.empty()) inserted += indent + line;
  }
  MaskedSource out;
  out.base_unit_id = unit.id;
  out.text.reserve(text.size() + inserted.size());
  out.text.append(text.substr(0, at));
  out.text += inserted;
  out.text.append(text.substr(at));
  out.insertion_span = {at, static_cast<std::uint32_t>(at + inserted.size())};
  return out;
}

MaskedSource render_insertion(const SourceUnit& unit, const Statement& stmt, const MaskedTemplate& tmpl) {
  return render_insertion(unit, parse_source(unit), stmt, tmpl);
}

namespace {

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

const std::vector<std::string>& slot_keywords() {
  // Words after which a mask starts an expression, or before which one ends.
  static const std::vector<std::string> kw = {
      "if", "while", "for", "in", "return", "not", "and", "or", "else", "elif", "case", "new",
      "throw", "yield", "assert", "del", "print", "import", "from", "as", "with", "lambda",
      "await", "sizeof", "goto", "do", "is", "raise", "instanceof"};
  return kw;
}

std::string_view last_word(std::string_view s) {
  auto e = s.size();
  auto b = e;
  while (b > 0 && ident_char(s[b - 1])) --b;
  return s.substr(b, e - b);
}

std::string_view first_word(std::string_view s) {
  std::size_t e = 0;
  while (e < s.size() && ident_char(s[e])) ++e;
  return s.substr(0, e);
}

}  // namespace

std::vector<SlotKind> classify_slots(std::string_view text, Language language) {
  std::vector<SlotKind> out;
  const auto prefix = guard_table(language).guard_prefix();
  const auto& kw = slot_keywords();
  for (auto at = text.find(kMask); at != std::string_view::npos; at = text.find(kMask, at + kMask.size())) {
    const auto end = at + kMask.size();
    const std::string_view raw_before = text.substr(0, at);
    std::string_view before = raw_before;
    while (!before.empty() && (before.back() == ' ' || before.back() == '\t')) before.remove_suffix(1);
    std::string_view after = text.substr(end);
    while (!after.empty() && (after.front() == ' ' || after.front() == '\t')) after.remove_prefix(1);

    const bool quoted_before = at > 0 && (text[at - 1] == '"' || text[at - 1] == '\'');
    const bool quoted_after = end < text.size() && (text[end] == '"' || text[end] == '\'');
    if (quoted_before && quoted_after) {
      out.push_back(SlotKind::string);
      continue;
    }
    if (ends_with(raw_before, prefix)) {
      out.push_back(SlotKind::condition);
      continue;
    }

    bool operand_before = false;
    if (ends_with(before, kMask)) {
      operand_before = !out.empty() && out.back() != SlotKind::op && out.back() != SlotKind::statement;
    } else if (!before.empty()) {
      const char c = before.back();
      if (ident_char(c)) operand_before = !contains_kind(kw, last_word(before));
      else operand_before = c == ')' || c == ']' || c == '"' || c == '\'';
    }
    bool operand_after = false;
    if (after.substr(0, kMask.size()) == kMask) {
      operand_after = true;
    } else if (!after.empty()) {
      const char c = after.front();
      if (ident_char(c)) operand_after = !contains_kind(kw, first_word(after));
      else operand_after = c == '(' || c == '"' || c == '\'';
    }
    if (operand_before && operand_after) {
      out.push_back(SlotKind::op);
      continue;
    }

    if (language != Language::python) {
      const bool ends_line = after.empty() || after.front() == '\n' || after.front() == '\r' || after.front() == '}';
      bool starts_stmt = before.empty() || before.back() == '\n';
      if (!before.empty()) {
        const char c = before.back();
        starts_stmt = starts_stmt || c == '{' || c == ';' || c == ')' || c == '}' || c == ':';
        const auto w = last_word(before);
        starts_stmt = starts_stmt || w == "else" || w == "do";
      }
      if (ends_line && starts_stmt) {
        out.push_back(SlotKind::statement);
        continue;
      }
    }
    out.push_back(SlotKind::expression);
  }
  return out;
}

std::string placeholder_fill(std::string_view text, Language language) {
  std::vector<std::string> fills;
  for (auto k : classify_slots(text, language)) {
    switch (k) {
      case SlotKind::op: fills.emplace_back("=="); break;
      case SlotKind::statement: fills.emplace_back("m0;"); break;
      default: fills.emplace_back("m0"); break;
    }
  }
  return replace_masks(text, fills);
}

namespace {

struct StubHost {
  std::string text;
  std::string anchor;  // statement after which templates go
};

const StubHost& stub_host(Language language) {
  static const std::array<StubHost, 3> hosts = {
      StubHost{"def f(m0):\n    m0 = 0\n", "m0 = 0"},
      StubHost{"class A {\n    void f(int m0) {\n        m0 = 0;\n    }\n}\n", "m0 = 0;"},
      StubHost{"void f(int m0) {\n    m0 = 0;\n}\n", "m0 = 0;"},
  };
  return hosts[static_cast<std::size_t>(language)];
}

}  // namespace

bool insertable(const MaskedTemplate& guarded) {
  const auto& host = stub_host(guarded.language);
  SourceUnit unit{"stub", guarded.language, host.text, std::nullopt};
  const AstGraph g = parse_source(unit);
  const auto stmts = extract_statements(g, unit);
  const auto anchor = std::find_if(stmts.begin(), stmts.end(), [&](const Statement& s) {
    return std::string_view(unit.text).substr(s.span.start, s.span.size()) == host.anchor;
  });
  if (anchor == stmts.end()) return false;
  try {
    const MaskedSource ms = render_insertion(unit, g, *anchor, guarded);
    const std::string filled = placeholder_fill(ms.text, guarded.language);
    const AstGraph after = parse_text(filled, guarded.language);
    if (has_parse_error(after)) return false;
    const Span region{ms.insertion_span.start,
                      static_cast<std::uint32_t>(ms.insertion_span.end + filled.size() - ms.text.size())};
    return region_is_dead(after, filled, region, guarded.language);
  } catch (const Error&) {
    return false;
  }
}

bool region_is_dead(const AstGraph& graph, std::string_view text, Span region, Language language) {
  if (graph.empty()) return false;
  const auto& gt = guard_table(language);
  const auto& prof = profile(language);
  bool any = false;
  for (NodeId v = 0; v < graph.size(); ++v) {
    const auto& n = graph.node(v);
    if (!n.named || n.span.size() == 0 || !region.contains(n.span) || prof.is_comment(n.kind)) continue;
    if (v != graph.root() && region.contains(graph.node(graph.parent(v)).span)) continue;
    any = true;
    if (!contains_kind(gt.conditional_kinds, n.kind) && n.kind != "for_statement") return false;
    if (graph.field_child(v, "alternative")) return false;
    const auto cond = graph.field_child(v, "condition");
    if (!cond) return false;
    std::string_view c = text.substr(graph.node(*cond).span.start, graph.node(*cond).span.size());
    while (!c.empty() && (c.front() == '(' || c.front() == ' ' || c.front() == '\t')) c.remove_prefix(1);
    if (c.substr(0, gt.false_literal.size()) != gt.false_literal) return false;
    if (c.size() > gt.false_literal.size() && ident_char(c[gt.false_literal.size()])) return false;
    // A loop initializer would still run.
    if (has_initializer(graph, v)) return false;
  }
  return any;
}

}  // namespace astveil
