#include <doctest.h>

#include <set>

#include "astveil/clients.hpp"
#include "astveil/errors.hpp"
#include "astveil/synthesis.hpp"
#include "support/toy_corpus.hpp"

using namespace astveil;

TEST_CASE("VictimPrediction validates and takes the argmax") {
  CHECK(VictimPrediction::from_probs({0.2, 0.8}).predicted == 1);
  CHECK(VictimPrediction::from_probs({0.5, 0.5}).predicted == 0);
  CHECK_THROWS_AS(VictimPrediction::from_probs({0.5, 0.3}), MalformedResponse);
  CHECK_THROWS_AS(VictimPrediction::from_probs({1.2, -0.2}), MalformedResponse);
  CHECK_THROWS_AS(VictimPrediction::from_probs({}), MalformedResponse);
}

TEST_CASE("surrogate victim learns the construct") {
  const auto train = toy::make(60, 1);
  const auto held = toy::make(40, 2);
  const auto v = SurrogateVictim::train(train.units, train.labels, Language::c);
  SurrogateVictim copy = v;
  int right = 0;
  for (std::size_t i = 0; i < train.units.size(); ++i) right += copy.predict(train.units[i].text).predicted == train.labels[i];
  CHECK(right == 60);
  right = 0;
  for (std::size_t i = 0; i < held.units.size(); ++i) right += copy.predict(held.units[i].text).predicted == held.labels[i];
  CHECK(right == 40);

  CHECK(SurrogateVictim::train(train.units, train.labels, Language::c) == v);
  CHECK(SurrogateVictim::from_json(v.to_json()) == v);
  const auto p1 = copy.predict(held.units[0].text);
  const auto p2 = copy.predict(held.units[0].text);
  CHECK(p1.probs == p2.probs);

  CHECK_THROWS_AS(SurrogateVictim::train(train.units, std::vector<int>(60, 1), Language::c), DegenerateLabels);
}

TEST_CASE("surrogate filler") {
  SurrogateFiller filler(Language::c, 9);
  const auto zero = filler.fill("int x = 1;", 3);
  REQUIRE(zero.size() == 1);
  CHECK(zero[0].texts.empty());

  const std::string text = "void f(int count) {\n    count = 2;\n    if (false && (<MASK>)) { <MASK>; }\n}\n";
  const auto pool = filler.identifier_pool(text);
  CHECK(std::find(pool.begin(), pool.end(), "count") != pool.end());
  CHECK(std::find(pool.begin(), pool.end(), "void") == pool.end());
  CHECK(std::find(pool.begin(), pool.end(), "MASK") == pool.end());

  const auto fills = filler.fill(text, 3);
  CHECK(!fills.empty());
  CHECK(fills.size() <= 3);
  const std::set<std::string> allowed{"count", "f", "0", "1", "\"\""};
  for (const auto& r : fills) {
    REQUIRE(r.texts.size() == 2);
    for (const auto& t : r.texts) {
      CHECK(allowed.count(t));
      CHECK(t.find("<MASK>") == std::string::npos);
    }
  }
  CHECK(filler.fill(text, 3) == fills);

  // With `count` the only identifier in view, the condition slot must take it.
  const std::string narrow = "int count = 2;\nif (false && (<MASK>)) { <MASK>; }\n";
  for (const auto& r : filler.fill(narrow, 3)) {
    CHECK(r.texts[0] == "count");
    CHECK(std::set<std::string>{"count", "0", "1", "\"\""}.count(r.texts[1]));
  }
  CHECK(SurrogateFiller(Language::c, 9).fill(text, 3, 1) != fills);
}

TEST_CASE("seed mixing") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}
