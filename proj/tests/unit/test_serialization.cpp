#include <doctest.h>

#include "astveil/errors.hpp"
#include "astveil/serialization.hpp"

using namespace astveil;
using nlohmann::json;

namespace {

PatternFile sample_patterns() {
  PatternFile f;
  f.language = Language::c;
  PatternSection a;
  a.set.target_class = 0;
  a.set.quality = -3;
  a.set.patterns = {make_pattern("c0_p0", {{0, "if_statement"}, {1, "parenthesized_expression"}},
                                 {{0, 1, "condition"}}),
                    single_node_pattern("c0_p1", "for_statement")};
  a.templates = {MaskedTemplate{"c0_p0", "if (<MASK>) <MASK>", GuardKind::conditional, Language::c, Span{4, 10}, false},
                 MaskedTemplate{"c0_p1", "for (<MASK>;<MASK>;<MASK>) <MASK>", GuardKind::conditional, Language::c,
                                Span{11, 17}, false}};
  PatternSection b;
  b.set.target_class = 1;
  b.set.quality = 0;
  b.set.patterns = {make_pattern("c1_p0", {{0, "if_statement"}, {1, "parenthesized_expression"}},
                                 {{0, 1, "condition"}}),
                    single_node_pattern("c1_p1", "while_statement")};
  b.templates = {a.templates[0], MaskedTemplate{"c1_p1", "while (<MASK>) <MASK>", GuardKind::conditional,
                                                Language::c, Span{7, 13}, false}};
  b.templates[0].pattern_id = "c1_p0";
  PatternSection empty;
  empty.set.target_class = 2;
  f.sections = {a, b, empty};
  return f;
}

}  // namespace

TEST_CASE("patterns round trip") {
  const auto f = sample_patterns();
  const auto text = dump_patterns(f);
  CHECK(load_patterns(text) == f);
  CHECK(dump_patterns(load_patterns(text)) == text);
}

TEST_CASE("build_library dedupes by canonical code and guards templates") {
  const auto lib = build_library(sample_patterns());
  REQUIRE(lib.patterns.size() == 3);
  CHECK(lib.patterns[0].id == "c0_p0");
  CHECK(lib.patterns[1].id == "c0_p1");
  CHECK(lib.patterns[2].id == "c1_p1");
  REQUIRE(lib.templates.size() == 3);
  for (const auto& t : lib.templates) CHECK(t.guarded);
  CHECK(lib.templates[0].text == "if (false && (<MASK>)) <MASK>");
}

TEST_CASE("patterns validation") {
  auto doc = json::parse(dump_patterns(sample_patterns()));
  CHECK_THROWS_AS(load_patterns("{"), FormatError);
  CHECK_THROWS_AS(load_patterns("[]"), FormatError);

  auto bad = doc;
  bad["version"] = 2;
  CHECK_THROWS_AS(load_patterns(bad.dump()), FormatError);

  bad = doc;
  bad["language"] = "cobol";
  CHECK_THROWS_AS(load_patterns(bad.dump()), FormatError);

  bad = doc;
  bad["pattern_sets"][0]["patterns"][0]["canonical_code"] = "(0,1,x,y,z)";
  CHECK_THROWS_AS(load_patterns(bad.dump()), FormatError);

  bad = doc;
  bad["pattern_sets"][0]["patterns"][0]["template"] = nullptr;
  CHECK_THROWS_AS(load_patterns(bad.dump()), FormatError);

  bad = doc;
  bad["pattern_sets"][0]["patterns"][0]["nodes"][1] = "oops";
  CHECK_THROWS_AS(load_patterns(bad.dump()), FormatError);

  // A file without templates loads, but cannot become a library.
  auto bare = doc;
  for (auto& s : bare["pattern_sets"])
    for (auto& p : s["patterns"]) p["template"] = nullptr;
  const auto loaded = load_patterns(bare.dump());
  CHECK(loaded.sections[0].templates.empty());
  CHECK_THROWS_AS(build_library(loaded), FormatError);
}

TEST_CASE("meta model round trip") {
  const std::vector<FeatureVector> x{{{1, 0}}, {{1, 0}}, {{0, 1}}, {{0, 1}}, {{1, 1}}, {{0, 0}}};
  const std::vector<int> y{0, 0, 1, 1, 1, 0};
  auto m = train_meta(x, y, TreeParams{4, 1, 1e-9});
  m.pattern_set_id = "abc123";
  const auto text = dump_meta(m);
  CHECK(load_meta(text) == m);
  CHECK(dump_meta(load_meta(text)) == text);

  auto doc = json::parse(text);
  CHECK_THROWS_AS(load_meta("nope"), FormatError);
  auto bad = doc;
  bad["n"] = doc["n"].get<int>() + 1;
  CHECK_THROWS_AS(load_meta(bad.dump()), FormatError);

  bad = doc;
  bad["num_features"] = 1;
  if (m.nodes.size() > 1) CHECK_THROWS_AS(load_meta(bad.dump()), FormatError);
}

TEST_CASE("report round trip") {
  AttackReport r;
  r.unit_id = "u7";
  r.outcome = Outcome::success;
  r.original_class = 1;
  r.final_class = 0;
  r.original_confidence = 0.8125;
  r.queries_used = 17;
  r.elapsed_s = 0.5;
  r.edits = {Edit{1, Span{10, 20}, "c1_p0", "\n    if (false) { }", Span{20, 39}, 0.25}};
  r.n_i = 5;
  r.n_t = 40;
  r.change_rate = 0.125;
  r.adversarial_code = "int main() { return 0; }\n\"quoted\" \xc3\xa9";
  const auto line = report_line(r);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(report_from_json(json::parse(line)) == r);

  r.elapsed_s.reset();
  r.outcome = Outcome::budget_exhausted;
  r.original_class = r.final_class = -1;
  r.edits.clear();
  const auto j = json::parse(report_line(r));
  CHECK(j["elapsed_s"].is_null());
  CHECK(j["outcome"] == "budget_exhausted");
  CHECK(report_from_json(j) == r);

  auto bad = j;
  bad["outcome"] = "victory";
  CHECK_THROWS_AS(report_from_json(bad), FormatError);
  bad = j;
  bad.erase("queries_used");
  CHECK_THROWS_AS(report_from_json(bad), FormatError);
}

TEST_CASE("summary json uses null for undefined metrics") {
  MetricsSummary s;
  const auto j = json::parse(dump_summary(s, {}));
  CHECK(j["attempted"] == 0);
  CHECK(j["asr"].is_null());
  CHECK(j["mu_tc"].is_null());

  s.attempted = 4;
  s.successes = 1;
  s.asr = 0.25;
  s.mu_tc = 3.0;
  s.sigma_tc = 0.0;
  s.mu_tcr = 0.1;
  s.sigma_tcr = 0.0;
  const auto k = json::parse(dump_summary(s, {{"p", 1.0}}));
  CHECK(k["asr"] == 0.25);
  CHECK(k["sigma_tc"] == 0.0);
  CHECK(k.dump().find("\"p\"") != std::string::npos);
}

TEST_CASE("graph round trip") {
  const SourceUnit u{"g", Language::python, "def f(x):\n    return x +\n", {}};
  const auto g = parse_source(u);
  CHECK(has_parse_error(g));
  const auto j = graph_to_json(g);
  const auto back = graph_from_json(json::parse(j.dump()));
  CHECK(back == g);
  CHECK(has_parse_error(back));

  auto bad = json::parse(j.dump());
  bad["edges"][0][0] = 100000;
  CHECK_THROWS_AS(graph_from_json(bad), FormatError);
  bad = json::parse(j.dump());
  bad["nodes"][0] = json::array({"module"});
  CHECK_THROWS_AS(graph_from_json(bad), FormatError);
}
