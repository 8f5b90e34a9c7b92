#include <doctest.h>

#include <random>

#include "astveil/errors.hpp"
#include "astveil/matching.hpp"
#include "astveil/meta_model.hpp"
#include "support/oracles.hpp"

using namespace astveil;

namespace {

FeatureVector fv(std::vector<std::uint8_t> bits) { return FeatureVector{std::move(bits)}; }

// Root splits on feature 0: absent -> class 0 (40), present -> class 1 (60).
MetaModel two_leaf() {
  MetaModel m;
  m.n = 100;
  m.num_features = 2;
  m.num_classes = 2;
  m.presence_by_class = {{0, 0}, {60, 0}};
  m.nodes = {MetaNode{0, 1, 2, 1, 100, {40, 60}}, MetaNode{-1, -1, -1, 0, 40, {40, 0}},
             MetaNode{-1, -1, -1, 1, 60, {0, 60}}};
  return m;
}

}  // namespace

TEST_CASE("featurize") {
  const auto g = parse_text("void f() { if(x){} }", Language::c);
  CHECK(featurize(g, {}).size() == 0);
  const std::vector<Pattern> ps{single_node_pattern("a", "if_statement"), single_node_pattern("b", "while_statement")};
  CHECK(featurize(g, ps) == fv({1, 0}));

  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    const auto t = oracle::random_tree(rng, 7, oracle::alphabet());
    std::vector<Pattern> set;
    for (int k = 0; k < 4; ++k) {
      const auto raw = oracle::random_pattern(rng, 2, oracle::alphabet());
      set.push_back(make_pattern("p", raw.nodes, raw.edges));
    }
    const auto f = featurize(t, set);
    for (std::size_t j = 0; j < set.size(); ++j) CHECK(f.bits[j] == contains_pattern(t, set[j]));
  }
}

TEST_CASE("train_meta: constant labels, one clean split, errors") {
  auto m = train_meta({fv({0, 1}), fv({1, 1}), fv({1, 0})}, {1, 1, 1});
  REQUIRE(m.nodes.size() == 1);
  CHECK(m.nodes[0].leaf_class == 1);
  CHECK(m.nodes[0].support == 3);

  m = train_meta({fv({0, 1}), fv({0, 0}), fv({1, 1}), fv({1, 0})}, {0, 0, 1, 1});
  REQUIRE(m.nodes.size() == 3);
  CHECK(m.nodes[0].split == 0);
  CHECK(m.nodes[m.nodes[0].absent].leaf_class == 0);
  CHECK(m.nodes[m.nodes[0].present].leaf_class == 1);
  CHECK(m.presence_by_class == std::vector<std::vector<std::int64_t>>{{0, 1}, {2, 1}});

  CHECK_THROWS_AS(train_meta({}, {}), EmptyTrainingSet);
  CHECK_THROWS_AS(train_meta({fv({0})}, {0, 1}), LengthMismatch);
  CHECK_THROWS_AS(train_meta({fv({0}), fv({0, 1})}, {0, 1}), LengthMismatch);
}

TEST_CASE("train_meta beats the majority baseline and keeps leaf invariants") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 30; ++t) {
    std::vector<FeatureVector> xs;
    std::vector<int> ys;
    for (int i = 0; i < 60; ++i) {
      FeatureVector f;
      for (int j = 0; j < 5; ++j) f.bits.push_back(rng() & 1);
      xs.push_back(f);
      ys.push_back((f.bits[0] && f.bits[1]) || (rng() % 7 == 0) ? 1 : (f.bits[2] ? 2 : 0));
    }
    const auto m = train_meta(xs, ys);
    std::vector<int> freq(3);
    for (int y : ys) ++freq[y];
    const int majority = *std::max_element(freq.begin(), freq.end());
    int correct = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) correct += m.predict(xs[i]) == ys[i];
    CHECK(correct >= majority);
    std::int64_t total = 0;
    for (const auto& node : m.nodes) {
      if (!node.is_leaf()) {
        CHECK(node.split < 5);
        continue;
      }
      std::int64_t sum = 0;
      for (auto c : node.counts) sum += c;
      CHECK(sum == node.support);
      CHECK(node.support >= 2);
      total += node.support;
    }
    CHECK(total == m.n);
  }
}

TEST_CASE("missing_patterns") {
  CHECK(missing_patterns(fv({1, 0})) == std::vector<std::size_t>{1});
  CHECK(missing_patterns(fv({1, 1})).empty());
  CHECK(missing_patterns(fv({0, 0, 0})) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("prob_change") {
  MetaModel single;
  single.n = 100;
  single.num_features = 1;
  single.num_classes = 2;
  single.presence_by_class = {{0}, {0}};
  single.nodes = {MetaNode{-1, -1, -1, 1, 100, {0, 100}}};
  CHECK(prob_change(single, fv({0}), 0, 1) == 0.0);

  const auto m = two_leaf();
  CHECK(prob_change(m, fv({0, 0}), 0, 0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(prob_change(m, fv({0, 0}), 0, 1) == 0.0);
  // Feature 1 is never tested: the routed leaf (absent, class 0) stays put.
  CHECK(prob_change(m, fv({0, 0}), 1, 1) == doctest::Approx(0.4));
  CHECK(prob_change(m, fv({0, 0}), 1, 0) == 0.0);
  CHECK(prob_change(m, fv({0, 0}), 0, 0, PathSet::positive_tests) == doctest::Approx(0.6));
  CHECK_THROWS_AS(prob_change(m, fv({0}), 0, 0), LengthMismatch);
}

TEST_CASE("choose_pattern") {
  // Three features; leaves give probabilities 0.1 / 0.6 / 0.6 for y = 0.
  MetaModel m;
  m.n = 100;
  m.num_features = 3;
  m.num_classes = 2;
  m.presence_by_class = {{0, 0, 0}, {10, 60, 60}};
  m.nodes = {MetaNode{0, 1, 2, 1, 100, {30, 70}},  MetaNode{1, 3, 4, 1, 90, {30, 60}},
             MetaNode{-1, -1, -1, 1, 10, {0, 10}}, MetaNode{-1, -1, -1, 0, 30, {30, 0}},
             MetaNode{-1, -1, -1, 1, 60, {0, 60}}};
  // Feature 2 is untested, so it routes to leaf 3 (class 0): probability 0.
  const auto f = fv({0, 0, 0});
  CHECK(prob_change(m, f, 0, 0) == doctest::Approx(0.1));
  CHECK(prob_change(m, f, 1, 0) == doctest::Approx(0.6));
  CHECK(choose_pattern(m, f, {0, 1, 2}, 0) == std::optional<std::size_t>(1));
  CHECK_FALSE(choose_pattern(m, f, {}, 0));

  // All-zero ranking: fallback picks the most frequent missing pattern in other classes.
  ChooseOptions no_fallback;
  no_fallback.fallback = false;
  CHECK_FALSE(choose_pattern(m, f, {2}, 0, no_fallback));
  CHECK(choose_pattern(m, f, {2}, 0) == std::optional<std::size_t>(2));
  CHECK(choose_pattern(m, fv({0, 0, 0}), {0, 1, 2}, 1).has_value());

  // Sampling only ever returns members of `missing`.
  ChooseOptions hot;
  hot.temperature = 0.5;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const auto pick = choose_pattern(m, f, {0, 1}, 0, hot, &rng);
    REQUIRE(pick);
    CHECK(*pick <= 1);
  }
}

TEST_CASE("choose_pattern ties go to the lower index") {
  const auto m = two_leaf();
  // Both candidates route to the same leaf when set, so they tie.
  MetaModel flat = m;
  flat.nodes = {MetaNode{-1, -1, -1, 1, 100, {40, 60}}};
  CHECK(choose_pattern(flat, fv({0, 0}), {1, 0}, 0) == std::optional<std::size_t>(0));
}
