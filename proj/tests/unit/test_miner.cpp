#include <doctest.h>

#include <random>
#include <set>

#include "astveil/errors.hpp"
#include "astveil/matching.hpp"
#include "astveil/miner.hpp"
#include "support/oracles.hpp"

using namespace astveil;

namespace {

AstGraph chain(std::vector<std::string> kinds) {
  std::vector<AstNode> ns;
  std::vector<AstEdge> es;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    ns.push_back({kinds[i], {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(kinds.size())}, true, false, false});
    if (i) es.push_back({static_cast<NodeId>(i - 1), static_cast<NodeId>(i), "child"});
  }
  return AstGraph(std::move(ns), std::move(es));
}

Pattern edge_pattern(std::string a, std::string b) {
  return make_pattern("p", {{0, std::move(a)}, {1, std::move(b)}}, {{0, 1, "child"}});
}

}  // namespace

TEST_CASE("canonical code: single node, permutation invariance, disconnected") {
  CHECK(single_node_pattern("p", "if_statement").canonical_code == "(0,if_statement)");
  const auto a = make_pattern("p", {{0, "a"}, {1, "b"}}, {{0, 1, "child"}});
  const auto b = make_pattern("q", {{7, "b"}, {3, "a"}}, {{3, 7, "child"}});
  CHECK(a.canonical_code == b.canonical_code);
  CHECK(a.nodes[0].kind == "a");
  CHECK_THROWS_AS(canonical_dfs_code(Pattern{"p", {{0, "a"}, {1, "b"}}, {}, ""}), Disconnected);
  // Labels with separators do not collide.
  CHECK(single_node_pattern("p", "(").canonical_code != single_node_pattern("p", ",").canonical_code);
}

TEST_CASE("canonical code equality matches isomorphism on 500 random pairs") {
  std::mt19937_64 rng(17);
  const std::vector<std::string> labels{"a", "b"};
  const std::vector<std::string> edges{"child", "x"};
  int agree = 0, iso = 0;
  for (int i = 0; i < 500; ++i) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    const auto p = oracle::random_pattern(rng, n, labels, edges);
    // Half the time compare against a relabeled copy of p.
    Pattern q;
    if (i % 2) {
      q = p;
      std::vector<int> perm(n);
      for (std::size_t k = 0; k < n; ++k) perm[k] = static_cast<int>(k) + 100;
      std::shuffle(perm.begin(), perm.end(), rng);
      for (auto& node : q.nodes) node.local_id = perm[node.local_id];
      for (auto& e : q.edges) e.parent = perm[e.parent], e.child = perm[e.child];
      std::shuffle(q.nodes.begin(), q.nodes.end(), rng);
    } else {
      q = oracle::random_pattern(rng, n, labels, edges);
    }
    const bool same = canonical_dfs_code(p) == canonical_dfs_code(q);
    const bool truth = oracle::isomorphic(p, q);
    iso += truth;
    agree += same == truth;
  }
  CHECK(agree == 500);
  CHECK(iso > 250);
}

TEST_CASE("enumerate_frequent: two a->b graphs") {
  const std::vector<AstGraph> gs{chain({"a", "b"}), chain({"a", "b"})};
  const auto out = enumerate_frequent(gs, 2, 1);
  REQUIRE(out.size() == 3);
  std::set<std::string> got;
  for (const auto& p : out) got.insert(oracle::ahu(p));
  CHECK(got == std::set<std::string>{"[a]", "[b]", "[a child:[b]]"});
  CHECK(enumerate_frequent(gs, 3, 1).empty());
  for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i - 1].canonical_code < out[i].canonical_code);
}

TEST_CASE("enumerate_frequent matches brute force on 50 random sets, threads agree") {
  std::mt19937_64 rng(99);
  const std::vector<std::string> edges{"child", "f"};
  for (int d = 0; d < 50; ++d) {
    std::vector<AstGraph> gs;
    for (int i = 0; i < 8; ++i)
      gs.push_back(oracle::random_tree(rng, std::uniform_int_distribution<std::size_t>(1, 8)(rng), oracle::alphabet(),
                                       edges));
    const auto out = enumerate_frequent(gs, 3, 3);
    std::set<std::string> got;
    for (const auto& p : out) {
      got.insert(oracle::ahu(p));
      std::size_t support = 0;
      for (const auto& g : gs) support += contains_pattern(g, p);
      CHECK(support >= 3);
    }
    std::set<std::string> want;
    for (const auto& [code, s] : oracle::frequent_subtrees(gs, 3, 3)) want.insert(code);
    CHECK(got == want);
    CHECK(got.size() == out.size());
    CHECK(enumerate_frequent(gs, 3, 3, 4) == out);
  }
}

TEST_CASE("cork_quality hand cases") {
  const std::vector<AstGraph> neg{chain({"a", "b"}), chain({"c"})};
  const std::vector<AstGraph> pos{chain({"a", "b", "d"})};
  const auto p = edge_pattern("a", "b");
  CHECK(cork_quality({p}, graph_refs(pos), graph_refs(neg)) == -1);
  CHECK(cork_quality({}, graph_refs(pos), graph_refs(neg)) == 0);

  // In every positive and no negative: no penalty.
  const auto sep = edge_pattern("b", "d");
  CHECK(cork_quality({sep}, graph_refs(pos), graph_refs(neg)) == 0);

  const auto c = correspondence(p, graph_refs(pos), graph_refs(neg));
  CHECK(c.positives_with == 1);
  CHECK(c.negatives_with == 1);
  CHECK(c.negatives_without == 1);
  CHECK(c.positives_without == 0);
}

TEST_CASE("cork_quality never increases as patterns are added") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<AstGraph> pos, neg;
    for (int i = 0; i < 4; ++i) pos.push_back(oracle::random_tree(rng, 6, oracle::alphabet()));
    for (int i = 0; i < 4; ++i) neg.push_back(oracle::random_tree(rng, 6, oracle::alphabet()));
    std::vector<Pattern> ps;
    std::int64_t prev = 0;
    for (int k = 0; k < 4; ++k) {
      const auto raw = oracle::random_pattern(rng, 2, oracle::alphabet());
      ps.push_back(make_pattern("p", raw.nodes, raw.edges));
      const auto q = cork_quality(ps, graph_refs(pos), graph_refs(neg));
      CHECK(q <= prev);
      prev = q;
    }
  }
}

TEST_CASE("greedy_select examples") {
  const std::vector<AstGraph> pos{chain({"x", "y"}), chain({"x", "y"})};
  const std::vector<AstGraph> neg{chain({"z", "y"}), chain({"z", "y"})};
  const auto sep = edge_pattern("x", "y");  // term 2·0 + 0·2 = 0
  const auto bad = single_node_pattern("b", "y");  // in every graph: 0·0 + 2·2 = 4
  auto set = greedy_select({bad, sep}, graph_refs(pos), graph_refs(neg), 1);
  REQUIRE(set.patterns.size() == 1);
  CHECK(set.patterns[0].canonical_code == sep.canonical_code);
  CHECK(set.quality == 0);

  set = greedy_select({bad, sep}, graph_refs(pos), graph_refs(neg), 0);
  CHECK(set.patterns.empty());
  CHECK(set.quality == 0);

  set = greedy_select({bad, sep}, graph_refs(pos), graph_refs(neg), 5);
  CHECK(set.patterns.size() == 2);
  CHECK(set.quality == -4);

  // Equal terms: the smaller code goes first.
  const auto pa = single_node_pattern("a", "q1");
  const auto pb = single_node_pattern("b", "q2");
  set = greedy_select({pb, pa}, graph_refs(pos), graph_refs(neg), 1);
  CHECK(set.patterns[0].canonical_code == pa.canonical_code);
}

TEST_CASE("build_ova_datasets") {
  ProbeCorpus corpus;
  corpus.num_classes = 2;
  for (int cls : {0, 0, 1}) corpus.records.push_back({{}, chain({"a"}), cls});
  auto r = build_ova_datasets(corpus);
  REQUIRE(r.datasets.size() == 2);
  CHECK(r.datasets[0].positives.size() == 2);
  CHECK(r.datasets[0].negatives.size() == 1);
  CHECK(r.datasets[0].positives[0] == &corpus.records[0].graph);
  CHECK(r.datasets[1].positives.size() == 1);
  CHECK(r.datasets[1].negatives.size() == 2);
  CHECK(r.warnings.empty());

  corpus.num_classes = 3;
  r = build_ova_datasets(corpus);
  CHECK(r.datasets.size() == 2);
  CHECK(r.warnings.size() == 1);

  corpus.records.push_back({{}, chain({"a"}), 2});
  r = build_ova_datasets(corpus);
  REQUIRE(r.datasets.size() == 3);
  for (const auto& d : r.datasets) CHECK(d.positives.size() + d.negatives.size() == 4);

  corpus.num_classes = 1;
  CHECK_THROWS_AS(build_ova_datasets(corpus), DegenerateClass);
}

TEST_CASE("mining view keeps named nodes and operators") {
  const auto g = parse_text("int f(int a) { /* note */ return a + 1; }", Language::c);
  const auto v = mining_view(g, Language::c, 400);
  bool plus = false;
  for (const auto& n : v.nodes()) {
    CHECK((n.named || is_operator_token(n.kind)));
    CHECK(n.kind != "comment");
    plus = plus || n.kind == "+";
  }
  CHECK(plus);
  CHECK(mining_view(g, Language::c, 3).size() == 3);
  CHECK(is_operator_token("&&"));
  CHECK_FALSE(is_operator_token("("));
  CHECK(default_min_support(10) == 2);
  CHECK(default_min_support(100) == 5);
  CHECK(default_min_support(101) == 6);
}

TEST_CASE("mine_class drops bare identifier patterns and names by class") {
  ProbeCorpus corpus;
  const char* texts[] = {"void f() { while (x) { x--; } }", "void g() { while (y) { y--; } }",
                         "void h() { for (;;) { z++; } }", "void k() { for (;;) { w++; } }"};
  for (int i = 0; i < 4; ++i) corpus.records.push_back({{}, parse_text(texts[i], Language::c), i < 2 ? 1 : 0});
  const auto ova = build_ova_datasets(corpus);
  MiningParams params;
  params.max_edges = 2;
  params.k = 5;
  const auto set = mine_class(ova.datasets[1], Language::c, params);
  REQUIRE_FALSE(set.patterns.empty());
  CHECK(set.target_class == 1);
  CHECK(set.patterns[0].id == "c1_p0");
  for (const auto& p : set.patterns)
    if (p.nodes.size() == 1) CHECK(p.nodes[0].kind != "identifier");
  // The best pattern separates the classes completely.
  CHECK(set.patterns[0].nodes[0].kind != "function_definition");
  const auto none = mine_class(ova.datasets[1], Language::c, params, [](const Pattern&) { return false; });
  CHECK(none.patterns.empty());
}
