#include <doctest.h>

#include "astveil/errors.hpp"
#include "astveil/matching.hpp"
#include "astveil/synthesis.hpp"

using namespace astveil;

namespace {

ProbeCorpus corpus_of(const std::string& text, Language lang) {
  ProbeCorpus c;
  SourceUnit u{"u0", lang, text, {}};
  c.records.push_back({u, parse_source(u), 0});
  return c;
}

MaskedTemplate guarded_template(std::string text, Language lang) {
  return apply_semantics_guard(MaskedTemplate{"p", std::move(text), GuardKind::plain, lang, std::nullopt, false});
}

Statement statement_of(const AstGraph& g, const SourceUnit& u, std::string_view kind, std::size_t nth = 0) {
  for (const auto& s : extract_statements(g, u))
    if (g.node(s.node).kind == kind && nth-- == 0) return s;
  FAIL("statement not found");
  return {};
}

std::string erase(std::string text, Span s) { return text.erase(s.start, s.size()); }

}  // namespace

TEST_CASE("masks") {
  CHECK(count_masks("a <MASK> b <MASK>") == 2);
  CHECK(count_masks("none") == 0);
  CHECK(replace_masks("f(<MASK>, <MASK>)", {"a", "b"}) == "f(a, b)");
  CHECK_THROWS_AS(replace_masks("f(<MASK>)", {}), LengthMismatch);
}

TEST_CASE("template: string literal compared with an unmapped operand") {
  const auto corpus = corpus_of("void f() { ok = \"abc\" == count; }", Language::c);
  const auto p = make_pattern("p",
                              {{0, "binary_expression"}, {1, "string_literal"}, {2, "=="}},
                              {{0, 1, "left"}, {0, 2, "operator"}});
  const auto t = pattern_to_template(p, corpus);
  CHECK(t.text == "\"<MASK>\" == <MASK>");
  CHECK(t.guard_kind == GuardKind::plain);
  CHECK_FALSE(t.guarded);
}

TEST_CASE("template: bare if") {
  const auto corpus = corpus_of("void f() {\n    if (x > 0) { y = 1; }\n}\n", Language::c);
  const auto t = pattern_to_template(single_node_pattern("p", "if_statement"), corpus);
  CHECK(t.text == "if (<MASK>) <MASK>");
  CHECK(t.guard_kind == GuardKind::conditional);
  REQUIRE(t.condition_span);
  CHECK(t.text.substr(t.condition_span->start, t.condition_span->size()) == "<MASK>");
}

TEST_CASE("template: nothing to mask") {
  const auto corpus = corpus_of("void f() { while (1) { break; } }", Language::c);
  const auto t = pattern_to_template(single_node_pattern("p", "break_statement"), corpus);
  CHECK(t.text == "break;");
  CHECK(count_masks(t.text) == 0);
}

TEST_CASE("template: missing instance, deterministic choice") {
  const auto corpus = corpus_of("void f() { x = 1; }", Language::c);
  CHECK_THROWS_AS(pattern_to_template(single_node_pattern("p", "while_statement"), corpus), NoInstanceFound);
  const auto two = corpus_of("void f() { a = 1; b = \"s\"; }", Language::c);
  const auto p = single_node_pattern("p", "expression_statement");
  CHECK(pattern_to_template(p, two) == pattern_to_template(p, two));
  CHECK_THROWS_AS(pattern_to_template(p, two, 2), NoInstanceFound);
}

TEST_CASE("template: python keeps block layout") {
  const auto corpus = corpus_of("def f(a):\n    while a > 0:\n        a -= 1\n    return a\n", Language::python);
  const auto p = make_pattern("p", {{0, "while_statement"}, {1, "block"}}, {{0, 1, "body"}});
  const auto t = pattern_to_template(p, corpus);
  CHECK(t.text == "while <MASK>:\n    <MASK>");
  CHECK(t.guard_kind == GuardKind::conditional);
  CHECK(apply_semantics_guard(t).text == "while False and (<MASK>):\n    <MASK>");
}

TEST_CASE("apply_semantics_guard") {
  MaskedTemplate c_if{"p", "if (<MASK>) <MASK>", GuardKind::conditional, Language::c, Span{4, 10}, false};
  CHECK(apply_semantics_guard(c_if).text == "if (false && (<MASK>)) <MASK>");
  CHECK(apply_semantics_guard(c_if).guarded);

  CHECK(guarded_template("x = <MASK>;", Language::c).text == "if (false) { x = <MASK>; }");
  CHECK(guarded_template("x = <MASK>", Language::java).text == "if (false) { x = <MASK>; }");

  MaskedTemplate py_while{"p", "while <MASK>: <MASK>", GuardKind::conditional, Language::python, Span{6, 12}, false};
  CHECK(apply_semantics_guard(py_while).text == "while False and (<MASK>): <MASK>");

  CHECK(guarded_template("x = <MASK>\ny = 1", Language::python).text == "if False:\n    x = <MASK>\n    y = 1");
  CHECK(guarded_template("{\n    a();\n}", Language::c).text == "if (false) {\n    {\n        a();\n    }\n}");

  // Guarding twice is a no-op.
  const auto once = apply_semantics_guard(c_if);
  CHECK(apply_semantics_guard(once) == once);
}

TEST_CASE("for loops: condition guard, or plain when an initializer would run") {
  const auto corpus = corpus_of("void f() {\n    for (; i < n; i++) { s += i; }\n    for (int j = 0; j < n; j++) { s -= j; }\n}\n",
                                Language::c);
  const auto p = single_node_pattern("p", "for_statement");
  const auto first = apply_semantics_guard(pattern_to_template(p, corpus, 0));
  CHECK(first.text == "for (; false && (<MASK>); <MASK>) <MASK>");
  const auto second = apply_semantics_guard(pattern_to_template(p, corpus, 1));
  CHECK(second.text.rfind("if (false) {", 0) == 0);
  CHECK(insertable(first));
  CHECK(insertable(second));
}

TEST_CASE("render_insertion: python indentation") {
  const SourceUnit u{"u", Language::python, "def f(a):\n    b = a\n    c = b\n    return c\n", {}};
  const auto g = parse_source(u);
  MaskedTemplate t{"p", "if False and (<MASK>):\n    <MASK>", GuardKind::conditional, Language::python, std::nullopt, true};
  const auto m = render_insertion(u, g, statement_of(g, u, "expression_statement"), t);
  CHECK(m.text == "def f(a):\n    b = a\n    if False and (<MASK>):\n        <MASK>\n    c = b\n    return c\n");
  CHECK(erase(m.text, m.insertion_span) == u.text);
  CHECK_FALSE(has_parse_error(parse_text(placeholder_fill(m.text, Language::python), Language::python)));
}

TEST_CASE("render_insertion: c, java, brace-less suites, zero masks") {
  const SourceUnit c{"u", Language::c, "int f(int x) {\n  x = x + 1;\n  return x;\n}\n", {}};
  const auto g = parse_source(c);
  const auto t = guarded_template("<MASK>(<MASK>);", Language::c);
  const auto m = render_insertion(c, g, statement_of(g, c, "expression_statement"), t);
  CHECK(m.text == "int f(int x) {\n  x = x + 1;\n  if (false) { <MASK>(<MASK>); }\n  return x;\n}\n");
  CHECK(erase(m.text, m.insertion_span) == c.text);
  CHECK(m.base_unit_id == "u");

  const SourceUnit loop{"u", Language::c, "void f() { while(x) y++; }", {}};
  const auto lg = parse_source(loop);
  CHECK_THROWS_AS(render_insertion(loop, lg, statement_of(lg, loop, "expression_statement"), t), IndentationUnresolvable);

  const SourceUnit one{"u", Language::python, "def f(a): return a\n", {}};
  const auto og = parse_source(one);
  CHECK_THROWS_AS(render_insertion(one, og, statement_of(og, one, "return_statement"), guarded_template("pass", Language::python)),
                  IndentationUnresolvable);

  const auto zero = render_insertion(c, g, statement_of(g, c, "return_statement"), guarded_template("x++;", Language::c));
  CHECK(count_masks(zero.text) == 0);
  CHECK(erase(zero.text, zero.insertion_span) == c.text);

  const SourceUnit java{"u", Language::java, "class A {\n    int g(int v) {\n        v++;\n        return v;\n    }\n}\n", {}};
  const auto jg = parse_source(java);
  const auto jm = render_insertion(java, jg, statement_of(jg, java, "expression_statement"),
                                   guarded_template("v = <MASK>;", Language::java));
  CHECK(jm.text == "class A {\n    int g(int v) {\n        v++;\n        if (false) { v = <MASK>; }\n        return v;\n    }\n}\n");
}

TEST_CASE("slot classification and placeholders") {
  const std::string t = "if (false && (<MASK>)) { <MASK>; }";
  CHECK(classify_slots(t, Language::c) == std::vector<SlotKind>{SlotKind::condition, SlotKind::expression});
  CHECK(placeholder_fill(t, Language::c) == "if (false && (m0)) { m0; }");
  CHECK(classify_slots("\"<MASK>\" == <MASK>", Language::c) == std::vector<SlotKind>{SlotKind::string, SlotKind::expression});
  CHECK(classify_slots("a <MASK> b", Language::c) == std::vector<SlotKind>{SlotKind::op});
  CHECK(classify_slots("if (false) {\n    <MASK>\n}", Language::c) == std::vector<SlotKind>{SlotKind::statement});
  CHECK(placeholder_fill("if (false) { <MASK> }", Language::java) == "if (false) { m0; }");
}

TEST_CASE("insertable and region_is_dead") {
  CHECK(insertable(guarded_template("x = <MASK>;", Language::c)));
  CHECK_FALSE(insertable(guarded_template("x = <MASK> )", Language::c)));
  CHECK(insertable(guarded_template("return <MASK>", Language::python)));

  const std::string dead = "void f() {\n    if (false) { x = 1; }\n}\n";
  const auto dg = parse_text(dead, Language::c);
  const auto at = static_cast<std::uint32_t>(dead.find("if"));
  const auto end = static_cast<std::uint32_t>(dead.find("}\n}") + 1);
  CHECK(region_is_dead(dg, dead, {at, end}, Language::c));
  CHECK(region_is_dead(dg, dead, {at - 5, end}, Language::c));  // leading whitespace is fine

  const std::string live = "void f() {\n    if (x) { x = 1; }\n}\n";
  CHECK_FALSE(region_is_dead(parse_text(live, Language::c), live, {at, at + 17}, Language::c));

  const std::string with_else = "void f() {\n    if (false) { x = 1; } else { y = 2; }\n}\n";
  CHECK_FALSE(region_is_dead(parse_text(with_else, Language::c), with_else,
                             {at, static_cast<std::uint32_t>(with_else.rfind("}\n}") + 1)}, Language::c));

  const std::string false_name = "void f() {\n    if (falsehood) { x = 1; }\n}\n";
  CHECK_FALSE(region_is_dead(parse_text(false_name, Language::c), false_name,
                             {at, static_cast<std::uint32_t>(false_name.rfind("}\n}") + 1)}, Language::c));

  const std::string py = "def f():\n    while False and (x):\n        x = 1\n    return 0\n";
  const auto ps = static_cast<std::uint32_t>(py.find("while"));
  CHECK(region_is_dead(parse_text(py, Language::python), py, {ps, static_cast<std::uint32_t>(py.find("\n    return"))},
                       Language::python));
}
