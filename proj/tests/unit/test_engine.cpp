#include <doctest.h>

#include <algorithm>

#include "astveil/engine.hpp"
#include "astveil/errors.hpp"
#include "astveil/matching.hpp"
#include "support/toy_corpus.hpp"

using namespace astveil;

namespace {

const SourceUnit kUnit{"u1", Language::c,
                       "int f(int x) {\n    int y = x;\n    y = y + 1;\n    x = x * 2;\n    return x + y;\n}\n", {}};

std::size_t count_kind(std::string_view code, std::string_view kind) {
  const auto g = parse_text(code, Language::c);
  return static_cast<std::size_t>(
      std::count_if(g.nodes().begin(), g.nodes().end(), [&](const AstNode& n) { return n.kind == kind; }));
}

class FixedFiller : public Filler {
 public:
  explicit FixedFiller(std::string word) : word_(std::move(word)) {}
  std::vector<FillResult> fill(std::string_view text, std::size_t, std::uint32_t) override {
    ++calls;
    return {FillResult{std::vector<std::string>(count_masks(text), word_)}};
  }
  int calls = 0;

 private:
  std::string word_;
};

PatternLibrary if_library() {
  PatternLibrary lib;
  lib.language = Language::c;
  lib.patterns = {single_node_pattern("if_p", "if_statement")};
  lib.patterns[0].id = "if_p";
  lib.templates = {apply_semantics_guard(
      MaskedTemplate{"if_p", "if (<MASK>) { }", GuardKind::conditional, Language::c, Span{4, 10}, false})};
  return lib;
}

MetaModel leaf_meta(int cls) {
  MetaModel m;
  m.n = 10;
  m.num_features = 1;
  m.num_classes = 2;
  m.presence_by_class = {{0}, {0}};
  m.nodes = {MetaNode{-1, -1, -1, cls, 10, cls ? std::vector<std::int64_t>{0, 10} : std::vector<std::int64_t>{10, 0}}};
  return m;
}

MaskedSource masked_after_first(const std::string& tmpl_text) {
  const auto g = parse_source(kUnit);
  const auto stmts = extract_statements(g, kUnit);
  MaskedTemplate t{"p", tmpl_text, GuardKind::plain, Language::c, std::nullopt, true};
  return render_insertion(kUnit, g, stmts[0], t);
}

}  // namespace

TEST_CASE("importance scores") {
  const auto g = parse_source(kUnit);
  const auto stmts = extract_statements(g, kUnit);

  int calls = 0;
  CallbackVictim constant([&](std::string_view) {
    ++calls;
    return std::vector<double>{0.4, 0.6};
  });
  const auto flat = importance_scores(kUnit, stmts, constant, 1);
  CHECK(!flat.empty());
  for (const auto& s : flat) CHECK(s.delta == 0.0);
  CHECK(calls == static_cast<int>(flat.size()) + 1);

  CallbackVictim drop([&](std::string_view code) {
    return code == kUnit.text ? std::vector<double>{0.1, 0.9} : std::vector<double>{0.4, 0.6};
  });
  for (const auto& s : importance_scores(kUnit, stmts, drop, 1)) CHECK(s.delta == doctest::Approx(0.3));

  const SourceUnit magic{"m", Language::c, "void f() {\n    a = 1;\n    magic = 2;\n    b = 3;\n}\n", {}};
  CallbackVictim likes_magic([](std::string_view code) {
    return code.find("magic") != std::string_view::npos ? std::vector<double>{0.0, 1.0} : std::vector<double>{1.0, 0.0};
  });
  const auto mg = parse_source(magic);
  auto scored = importance_scores(magic, extract_statements(mg, magic), likes_magic, 1);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.delta > b.delta; });
  REQUIRE(!scored.empty());
  CHECK(scored[0].delta == 1.0);
  CHECK(magic.text.substr(scored[0].statement.span.start, scored[0].statement.span.size()) == "magic = 2;");
}

TEST_CASE("fill_masks") {
  FixedFiller x("x");
  const auto masked = masked_after_first("if (false && (<MASK>)) { <MASK>; }");
  const auto cands = fill_masks(masked, x, Language::c);
  REQUIRE(cands.size() == 1);
  const auto& c = cands[0];
  CHECK(c.text.substr(c.insertion_span.start, c.insertion_span.size()) == "\n    if (false && (x)) { x; }");
  CHECK_FALSE(has_parse_error(parse_text(c.text, Language::c)));
  CHECK(c.token_count == count_tokens(parse_text(c.text, Language::c), Language::c));

  FixedFiller paren(")");
  CHECK(fill_masks(masked, paren, Language::c).empty());
  CHECK(paren.calls == 5);

  const auto zero = masked_after_first("if (false) { y = 0; }");
  FixedFiller unused("x");
  const auto same = fill_masks(zero, unused, Language::c);
  REQUIRE(same.size() == 1);
  CHECK(same[0].text == zero.text);
  CHECK(same[0].insertion_span == zero.insertion_span);
}

TEST_CASE("a fill that escapes the guard is rejected") {
  FixedFiller escape("0)) {} if (1");
  CHECK(fill_masks(masked_after_first("if (false && (<MASK>)) { }"), escape, Language::c).empty());
}

TEST_CASE("insertion points skip brace-less arms and inserted spans") {
  const SourceUnit u{"u", Language::c, "void f() {\n    if (a) b++;\n    c++;\n}\n", {}};
  const auto g = parse_source(u);
  const auto points = insertion_points(g, u);
  std::vector<std::string> texts;
  for (const auto& s : points) texts.push_back(u.text.substr(s.span.start, s.span.size()));
  CHECK(std::find(texts.begin(), texts.end(), "b++;") == texts.end());
  CHECK(std::find(texts.begin(), texts.end(), "c++;") != texts.end());
  const auto at = static_cast<std::uint32_t>(u.text.find("c++;"));
  const auto skipped = insertion_points(g, u, {Span{at, at + 4}});
  CHECK(skipped.size() + 1 == points.size());
}

TEST_CASE("attack flips a victim that counts if statements") {
  const std::size_t base = count_kind(kUnit.text, "if_statement");
  std::size_t calls = 0;
  CallbackVictim ifs([&](std::string_view code) {
    ++calls;
    return count_kind(code, "if_statement") > base ? std::vector<double>{0.1, 0.9} : std::vector<double>{0.8, 0.2};
  });
  FixedFiller filler("x");
  AttackConfig cfg;
  const auto r = attack(kUnit, ifs, filler, if_library(), leaf_meta(1), cfg);
  CHECK(r.outcome == Outcome::success);
  CHECK(r.original_class == 0);
  CHECK(r.final_class == 1);
  REQUIRE(r.edits.size() == 1);
  CHECK(r.edits[0].step == 1);
  CHECK(r.edits[0].pattern_id == "if_p");
  CHECK(r.queries_used == calls);
  CHECK(r.original_confidence == doctest::Approx(0.8));
  CHECK(r.edits[0].confidence == doctest::Approx(0.1));

  std::string back = r.adversarial_code;
  back.erase(r.edits[0].insertion_span.start, r.edits[0].insertion_span.size());
  CHECK(back == kUnit.text);
  CHECK(r.n_t == count_tokens(parse_source(kUnit), Language::c));
  CHECK(r.n_i == count_tokens(parse_text(r.adversarial_code, Language::c), Language::c) - r.n_t);
  CHECK(r.change_rate == doctest::Approx(static_cast<double>(r.n_i) / static_cast<double>(r.n_t)));
}

TEST_CASE("attack limits") {
  CallbackVictim stubborn([](std::string_view) { return std::vector<double>{0.8, 0.2}; });
  FixedFiller filler("x");

  AttackConfig none;
  none.max_queries = 0;
  auto r = attack(kUnit, stubborn, filler, if_library(), leaf_meta(1), none);
  CHECK(r.outcome == Outcome::budget_exhausted);
  CHECK(r.queries_used == 0);
  CHECK(r.edits.empty());
  CHECK(r.original_class == -1);

  AttackConfig steps;
  steps.max_steps = 4;
  r = attack(kUnit, stubborn, filler, if_library(), leaf_meta(1), steps);
  CHECK(r.outcome == Outcome::steps_exhausted);
  CHECK(r.edits.size() == 4);
  for (std::size_t i = 0; i < r.edits.size(); ++i) CHECK(r.edits[i].step == i + 1);

  // Every inserted span is dead code and removing all of them restores the input.
  const auto g = parse_text(r.adversarial_code, Language::c);
  std::vector<Span> spans;
  for (const auto& e : r.edits) {
    CHECK(region_is_dead(g, r.adversarial_code, e.insertion_span, Language::c));
    CHECK(r.adversarial_code.substr(e.insertion_span.start, e.insertion_span.size()) == e.inserted_text);
    spans.push_back(e.insertion_span);
  }
  std::sort(spans.begin(), spans.end(), [](Span a, Span b) { return a.start > b.start; });
  std::string back = r.adversarial_code;
  for (auto s : spans) back.erase(s.start, s.size());
  CHECK(back == kUnit.text);

  PatternLibrary empty;
  r = attack(kUnit, stubborn, filler, empty, leaf_meta(1), AttackConfig{});
  CHECK(r.outcome == Outcome::no_candidates);
  CHECK(r.queries_used == 1);

  AttackConfig tight;
  tight.token_limit = r.n_t;
  r = attack(kUnit, stubborn, filler, if_library(), leaf_meta(1), tight);
  CHECK(r.outcome == Outcome::token_limit);

  // An input already over the cap is attacked anyway.
  AttackConfig small;
  small.token_limit = 3;
  small.max_steps = 1;
  r = attack(kUnit, stubborn, filler, if_library(), leaf_meta(1), small);
  CHECK(r.outcome == Outcome::steps_exhausted);

  AttackConfig untimed;
  untimed.record_elapsed = false;
  untimed.max_steps = 1;
  CHECK_FALSE(attack(kUnit, stubborn, filler, if_library(), leaf_meta(1), untimed).elapsed_s);
}

TEST_CASE("attack is reproducible") {
  const auto corpus = toy::make(20, 3);
  const auto victim = SurrogateVictim::train(corpus.units, corpus.labels, Language::c);
  AttackConfig cfg;
  cfg.record_elapsed = false;
  cfg.max_steps = 3;
  for (int i = 0; i < 2; ++i) {
    SurrogateVictim v1 = victim, v2 = victim;
    SurrogateFiller f1(Language::c, 1), f2(Language::c, 1);
    CHECK(attack(corpus.units[i], v1, f1, if_library(), leaf_meta(1 - i), cfg) ==
          attack(corpus.units[i], v2, f2, if_library(), leaf_meta(1 - i), cfg));
  }
}

TEST_CASE("augment_corpus") {
  const auto corpus = toy::make(40, 8);
  SurrogateFiller filler(Language::c, 2);
  AugmentConfig zero;
  zero.p = 0.0;
  auto out = augment_corpus(corpus.units, if_library(), filler, zero);
  CHECK(out.units == corpus.units);
  for (const auto& rec : out.manifest) CHECK(rec.insertions == 0);

  AugmentConfig all;
  all.p = 1.0;
  all.seed = 3;
  out = augment_corpus(corpus.units, if_library(), filler, all);
  REQUIRE(out.units.size() == corpus.units.size());
  for (std::size_t i = 0; i < out.units.size(); ++i) {
    const auto& rec = out.manifest[i];
    CHECK(rec.selected);
    CHECK(rec.planned >= 1);
    CHECK(rec.planned <= 5);
    CHECK(rec.insertions >= 1);
    CHECK(rec.insertions <= rec.planned);
    CHECK(rec.pattern_ids.size() == rec.insertions);
    CHECK(out.units[i].label_hint == corpus.units[i].label_hint);
    CHECK(out.units[i].id == corpus.units[i].id);
    CHECK_FALSE(has_parse_error(parse_source(out.units[i])));
    CHECK(count_kind(out.units[i].text, "if_statement") ==
          count_kind(corpus.units[i].text, "if_statement") + rec.insertions);
  }
  CHECK(augment_corpus(corpus.units, if_library(), filler, all).manifest == out.manifest);
}

TEST_CASE("summarize and pattern_frequency") {
  AttackReport a, b, fail;
  a.outcome = b.outcome = Outcome::success;
  a.n_i = 50, a.n_t = 200, a.change_rate = 0.25;
  b.n_i = 150, b.n_t = 300, b.change_rate = 0.5;
  fail.outcome = Outcome::budget_exhausted;
  auto s = summarize({a, b, fail});
  CHECK(s.attempted == 3);
  CHECK(s.successes == 2);
  CHECK(*s.asr == doctest::Approx(2.0 / 3.0));
  CHECK(*s.mu_tc == 100.0);
  CHECK(*s.sigma_tc == 50.0);
  CHECK(*s.mu_tcr == 0.375);
  CHECK(*s.sigma_tcr == 0.125);

  s = summarize({fail});
  CHECK(*s.asr == 0.0);
  CHECK_FALSE(s.mu_tc);
  CHECK_FALSE(s.sigma_tcr);
  s = summarize({a});
  CHECK(*s.asr == 1.0);
  CHECK(*s.sigma_tc == 0.0);
  CHECK_FALSE(summarize({}).asr);

  std::vector<AttackReport> many(10);
  for (std::size_t i = 0; i < many.size(); ++i) {
    many[i].outcome = Outcome::success;
    if (i < 9) many[i].edits.push_back({1, {}, "A", "", {}, 0.0});
    if (i == 0) many[i].edits.push_back({2, {}, "A", "", {}, 0.0});
    if (i < 2) many[i].edits.push_back({1, {}, "B", "", {}, 0.0});
  }
  many.push_back(fail);
  many.back().edits.push_back({1, {}, "C", "", {}, 0.0});
  const auto freq = pattern_frequency(many);
  REQUIRE(freq.size() == 2);
  CHECK(freq[0] == std::pair<std::string, double>{"A", 0.9});
  CHECK(freq[1].first == "B");
  CHECK(freq[1].second == doctest::Approx(0.2));
  CHECK(pattern_frequency({fail}).empty());
}

TEST_CASE("outcome names") {
  for (auto o : {Outcome::success, Outcome::budget_exhausted, Outcome::timeout, Outcome::steps_exhausted,
                 Outcome::token_limit, Outcome::no_candidates})
    CHECK(outcome_from_string(to_string(o)) == o);
}
