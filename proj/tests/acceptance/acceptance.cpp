// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>

#include "astveil/engine.hpp"
#include "astveil/errors.hpp"
#include "astveil/miner.hpp"
#include "astveil/orchestrator.hpp"
#include "astveil/serialization.hpp"
#include "support/oracles.hpp"
#include "support/toy_corpus.hpp"

using namespace astveil;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(const char* name, bool pass, const std::string& detail) {
  std::printf("%s %-28s %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<AttackReport> read_reports(const fs::path& p) {
  std::vector<AttackReport> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(report_from_json(nlohmann::json::parse(line)));
  return out;
}

// Counts every call and answers with a fixed distribution.
class CountingVictim : public Victim {
 public:
  explicit CountingVictim(std::chrono::milliseconds delay = {}) : delay_(delay) {}
  VictimPrediction predict(std::string_view, const std::optional<std::string>& = {}) override {
    ++calls;
    if (delay_.count()) std::this_thread::sleep_for(delay_);
    return VictimPrediction::from_probs({0.3, 0.7});
  }
  std::atomic<std::size_t> calls{0};

 private:
  std::chrono::milliseconds delay_;
};

void mining_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  int agree = 0;
  std::string first_bad;
  for (int d = 0; d < 200; ++d) {
    std::vector<AstGraph> graphs;
    const auto n = std::uniform_int_distribution<int>(1, 10)(rng);
    for (int i = 0; i < n; ++i)
      graphs.push_back(oracle::random_tree(rng, std::uniform_int_distribution<std::size_t>(1, 8)(rng), oracle::alphabet()));
    const std::size_t min_support = std::uniform_int_distribution<int>(2, 3)(rng);
    const std::size_t max_edges = std::uniform_int_distribution<int>(0, 3)(rng);

    const auto mined = enumerate_frequent(graphs, min_support, max_edges);
    const auto truth = oracle::frequent_subtrees(graphs, min_support, max_edges);
    std::set<std::string> got, codes;
    for (const auto& p : mined) {
      got.insert(oracle::ahu(p));
      codes.insert(p.canonical_code);
    }
    std::set<std::string> want;
    for (const auto& [code, s] : truth) want.insert(code);
    const bool ok = got == want && codes.size() == mined.size() && mined.size() == want.size();
    agree += ok;
    if (!ok && first_bad.empty()) first_bad = fmt(" (first mismatch: dataset %d)", d);
  }
  const double secs = seconds_since(t0);
  verdict("mining_oracle", agree == 200 && secs < 60.0,
          fmt("%d/200 datasets set-equal to brute force, %.2f s", agree, secs) + first_bad);
}

void cork_quality_exactness() {
  std::mt19937_64 rng(77);
  int exact = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<AstGraph> pos, neg;
    const auto np = std::uniform_int_distribution<int>(1, 6)(rng), nn = std::uniform_int_distribution<int>(1, 6)(rng);
    for (int i = 0; i < np; ++i)
      pos.push_back(oracle::random_tree(rng, std::uniform_int_distribution<std::size_t>(1, 8)(rng), oracle::alphabet()));
    for (int i = 0; i < nn; ++i)
      neg.push_back(oracle::random_tree(rng, std::uniform_int_distribution<std::size_t>(1, 8)(rng), oracle::alphabet()));
    std::vector<Pattern> patterns;
    const auto k = std::uniform_int_distribution<int>(0, 5)(rng);
    for (int i = 0; i < k; ++i) {
      auto raw = oracle::random_pattern(rng, std::uniform_int_distribution<std::size_t>(1, 3)(rng), oracle::alphabet());
      patterns.push_back(make_pattern("p" + std::to_string(i), raw.nodes, raw.edges));
    }
    std::int64_t want = 0;
    for (const auto& p : patterns) want -= oracle::cork_term(p, pos, neg);
    exact += cork_quality(patterns, graph_refs(pos), graph_refs(neg)) == want;
  }

  // positives={C}, negatives={A,B}, P in A and C only.
  auto tree = [](std::vector<std::string> kinds) {
    std::vector<AstNode> ns;
    std::vector<AstEdge> es;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      ns.push_back({kinds[i], {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(kinds.size())}, true, false, false});
      if (i) es.push_back({static_cast<NodeId>(i - 1), static_cast<NodeId>(i), "child"});
    }
    return AstGraph(std::move(ns), std::move(es));
  };
  const std::vector<AstGraph> a_b{tree({"if_statement", "block"}), tree({"while_statement"})};
  const std::vector<AstGraph> c{tree({"if_statement", "block", "return_statement"})};
  const auto p = make_pattern("p", {{0, "if_statement"}, {1, "block"}}, {{0, 1, "child"}});
  const auto hand = cork_quality({p}, graph_refs(c), graph_refs(a_b));
  const auto empty = cork_quality({}, graph_refs(c), graph_refs(a_b));
  verdict("cork_quality_exactness", exact == 100 && hand == -1 && empty == 0,
          fmt("%d/100 equal to direct count; hand case q=%lld; q(empty)=%lld", exact, static_cast<long long>(hand),
              static_cast<long long>(empty)));
}

void greedy_property() {
  std::mt19937_64 rng(31337);
  int good = 0;
  for (int run = 0; run < 100; ++run) {
    std::vector<AstGraph> pos, neg;
    for (int i = 0, n = std::uniform_int_distribution<int>(1, 6)(rng); i < n; ++i)
      pos.push_back(oracle::random_tree(rng, std::uniform_int_distribution<std::size_t>(1, 8)(rng), oracle::alphabet()));
    for (int i = 0, n = std::uniform_int_distribution<int>(1, 6)(rng); i < n; ++i)
      neg.push_back(oracle::random_tree(rng, std::uniform_int_distribution<std::size_t>(1, 8)(rng), oracle::alphabet()));
    std::vector<Pattern> cands;
    std::set<std::string> seen;
    for (int i = 0, n = std::uniform_int_distribution<int>(1, 12)(rng); i < n; ++i) {
      auto raw = oracle::random_pattern(rng, std::uniform_int_distribution<std::size_t>(1, 3)(rng), oracle::alphabet());
      auto p = make_pattern("c" + std::to_string(i), raw.nodes, raw.edges);
      if (seen.insert(p.canonical_code).second) cands.push_back(std::move(p));
    }
    const std::size_t k = std::uniform_int_distribution<std::size_t>(0, cands.size() + 1)(rng);
    std::vector<GreedyStep> trace;
    const auto set = greedy_select(cands, graph_refs(pos), graph_refs(neg), k, &trace);

    bool ok = set.patterns.size() == std::min(k, cands.size()) && trace.size() == set.patterns.size();
    std::vector<bool> taken(cands.size(), false);
    std::int64_t q = 0;
    for (std::size_t s = 0; ok && s < trace.size(); ++s) {
      const auto& chosen = cands[trace[s].chosen];
      ok = chosen.canonical_code == set.patterns[s].canonical_code && !taken[trace[s].chosen];
      const auto t_chosen = oracle::cork_term(chosen, pos, neg);
      for (std::size_t u = 0; ok && u < cands.size(); ++u) {
        if (taken[u] || u == trace[s].chosen) continue;
        const auto t_other = oracle::cork_term(cands[u], pos, neg);
        ok = t_chosen < t_other || (t_chosen == t_other && chosen.canonical_code < cands[u].canonical_code);
      }
      taken[trace[s].chosen] = true;
      q -= t_chosen;
    }
    good += ok && q == set.quality;
  }
  verdict("greedy_selection", good == 100, fmt("%d/100 runs: every pick has the least term among the rest", good));
}

void importance_and_flip_hand_cases() {
  CallbackVictim constant([](std::string_view) { return std::vector<double>{0.25, 0.75}; });
  const SourceUnit unit{"u", Language::c, "int f(int a) {\n    a = a + 1;\n    a = a * 2;\n    return a;\n}\n", {}};
  const auto graph = parse_source(unit);
  const auto scores = importance_scores(unit, extract_statements(graph, unit), constant, 1);
  bool zero = !scores.empty();
  for (const auto& s : scores) zero = zero && s.delta == 0.0;

  MetaModel meta;
  meta.n = 100;
  meta.num_features = 1;
  meta.num_classes = 2;
  meta.presence_by_class = {{0}, {60}};
  meta.nodes.resize(3);
  meta.nodes[0].split = 0;
  meta.nodes[0].absent = 1;
  meta.nodes[0].present = 2;
  meta.nodes[0].support = 100;
  meta.nodes[0].counts = {40, 60};
  meta.nodes[1].leaf_class = 0;
  meta.nodes[1].support = 40;
  meta.nodes[1].counts = {40, 0};
  meta.nodes[2].leaf_class = 1;
  meta.nodes[2].support = 60;
  meta.nodes[2].counts = {0, 60};
  FeatureVector f{{0}};
  const double y0 = prob_change(meta, f, 0, 0), y1 = prob_change(meta, f, 0, 1);
  verdict("importance_and_flip_hand_cases", zero && std::abs(y0 - 0.6) < 1e-12 && std::abs(y1) < 1e-12,
          fmt("%zu constant-victim deltas all zero: %s; prob_change y=0 -> %.12f, y=1 -> %.12f", scores.size(),
              zero ? "yes" : "no", y0, y1));
}

struct E2E {
  fs::path out;
  PatternLibrary library;
  MetaModel meta;
  std::vector<AttackReport> reports;
  std::vector<SourceUnit> units;
  bool ok = false;
};

E2E end_to_end() {
  E2E e;
  const fs::path root = fs::temp_directory_path() / fmt("astveil_acceptance_%d", static_cast<int>(::getpid()));
  fs::remove_all(root);
  const auto corpus = toy::make(200, 4242);
  toy::write(corpus, root / "corpus");
  e.units = corpus.units;
  e.out = root / "out";

  nlohmann::json cfg = {
      {"language", "c"},
      {"corpus", (root / "corpus").string()},
      {"output_dir", e.out.string()},
      {"seed", 11},
      {"workers", std::max(1u, std::thread::hardware_concurrency())},
      {"attack", {{"max_queries", 300}, {"record_elapsed", false}}},
  };
  const Config config = parse_config(cfg, root);

  const auto t0 = std::chrono::steady_clock::now();
  try {
    cmd_probe(config);
    cmd_mine(config);
    cmd_attack(config);
  } catch (const std::exception& ex) {
    verdict("end_to_end_surrogate", false, std::string("pipeline threw: ") + ex.what());
    return e;
  }
  const double secs = seconds_since(t0);

  // The victim has to be driven by the construct for the fixture to mean anything.
  std::size_t agree = 0;
  for (const auto& line : load_probe(e.out / "probe.jsonl"))
    agree += line.predicted_class == corpus.labels[std::stoul(line.unit_id.substr(1))];

  e.reports = read_reports(e.out / "reports.jsonl");
  const auto summary = summarize(e.reports);
  std::size_t max_q = 0;
  for (const auto& r : e.reports) max_q = std::max(max_q, r.queries_used);
  const double asr = summary.asr.value_or(0.0);
  verdict("end_to_end_surrogate",
          e.reports.size() == 200 && asr >= 0.9 && max_q <= 300 && secs < 300.0 && agree == 200,
          fmt("ASR %.3f over %zu units, max %zu queries/unit, %.1f s, victim agrees with construct on %zu/200",
              asr, e.reports.size(), max_q, secs, agree));

  e.library = build_library(load_patterns(slurp(e.out / "patterns.json")));
  e.meta = load_meta(slurp(e.out / "meta_model.json"));
  e.ok = true;
  return e;
}

void semantics_preservation(const E2E& e) {
  if (!e.ok) {
    verdict("semantics_preservation", false, "end-to-end run unavailable");
    return;
  }
  // Replays the attacks through the library with a hook on every candidate
  // sent to the victim.
  const auto victim = SurrogateVictim::from_json(slurp(e.out / "surrogate_victim.json"));
  std::atomic<std::size_t> candidates{0}, clean{0}, dead{0}, restored{0};
  std::atomic<std::size_t> same_reports{0}, finals_restored{0};
  std::vector<std::uint8_t> replay_ok(e.units.size(), 0);
  parallel_for(e.units.size(), std::max(1u, std::thread::hardware_concurrency()), [&](std::size_t i) {
    const auto& unit = e.units[i];
    SurrogateVictim v = victim;
    SurrogateFiller filler(Language::c, 11);
    AttackConfig cfg;
    cfg.max_queries = 300;
    cfg.record_elapsed = false;
    cfg.seed = 11;
    cfg.on_candidate = [&](std::string_view base, const CandidateSource& c) {
      ++candidates;
      const auto g = parse_text(c.text, Language::c);
      clean += !has_parse_error(g);
      dead += region_is_dead(g, c.text, c.insertion_span, Language::c);
      std::string back = c.text;
      back.erase(c.insertion_span.start, c.insertion_span.size());
      restored += back == base;
    };
    const auto report = attack(unit, v, filler, e.library, e.meta, cfg);
    auto it = std::find_if(e.reports.begin(), e.reports.end(), [&](const AttackReport& r) { return r.unit_id == unit.id; });
    same_reports += it != e.reports.end() && *it == report;

    std::vector<Span> spans;
    for (const auto& ed : report.edits) spans.push_back(ed.insertion_span);
    std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.start > b.start; });
    std::string text = report.adversarial_code;
    for (const auto& s : spans) text.erase(s.start, s.size());
    finals_restored += text == unit.text;
  });
  const std::size_t n = candidates;
  verdict("semantics_preservation",
          n > 0 && clean == n && dead == n && restored == n && finals_restored == e.units.size(),
          fmt("%zu candidates: %zu parse clean, %zu under a false guard, %zu byte-restore; %zu/%zu final files "
              "restore; replay matches cmd_attack on %zu/%zu units",
              n, clean.load(), dead.load(), restored.load(), finals_restored.load(), e.units.size(),
              same_reports.load(), e.units.size()));
}

void budget_exactness(const E2E& e) {
  if (!e.ok) {
    verdict("budget_limits", false, "end-to-end run unavailable");
    return;
  }
  const AttackConfig defaults;
  const bool default_limits = defaults.max_queries == 2000 && defaults.timeout_s == 100.0 &&
                              defaults.max_steps == 10 && defaults.fill_retries == 5;
  const SourceUnit unit = e.units[0];
  SurrogateFiller filler(Language::c, 3);
  std::string detail;
  bool ok = default_limits;

  auto run = [&](CountingVictim& v, AttackConfig cfg) {
    const auto r = attack(unit, v, filler, e.library, e.meta, cfg);
    ok = ok && r.queries_used == v.calls.load() && r.queries_used <= cfg.max_queries;
    return r;
  };
  {
    CountingVictim v;
    AttackConfig cfg;
    cfg.max_queries = 0;
    const auto r = run(v, cfg);
    ok = ok && r.outcome == Outcome::budget_exhausted && r.queries_used == 0 && r.edits.empty();
    detail += fmt("budget 0: %s/%zu; ", std::string(to_string(r.outcome)).c_str(), r.queries_used);
  }
  {
    CountingVictim v;
    AttackConfig cfg;
    cfg.max_queries = 25;
    const auto r = run(v, cfg);
    ok = ok && r.outcome == Outcome::budget_exhausted && r.queries_used == 25;
    detail += fmt("budget 25: %s/%zu calls=%zu; ", std::string(to_string(r.outcome)).c_str(), r.queries_used,
                  v.calls.load());
  }
  {
    // Defaults except the token cap, which this small unit would hit first.
    CountingVictim v;
    AttackConfig cfg;
    cfg.token_limit = 1u << 20;
    const auto r = run(v, cfg);
    ok = ok && r.outcome == Outcome::steps_exhausted && r.edits.size() == 10;
    detail += fmt("never flips: %s with %zu edits, %zu queries=%zu calls; ", std::string(to_string(r.outcome)).c_str(),
                  r.edits.size(), r.queries_used, v.calls.load());
  }
  {
    CountingVictim v;
    AttackConfig cfg;
    const auto n_t = count_tokens(parse_source(unit), unit.language);
    cfg.token_limit = n_t + 1;
    const auto r = run(v, cfg);
    ok = ok && r.outcome == Outcome::token_limit && r.edits.empty();
    detail += fmt("token cap n_t+1: %s, %zu queries=%zu calls; ", std::string(to_string(r.outcome)).c_str(),
                  r.queries_used, v.calls.load());
  }
  {
    CountingVictim v(std::chrono::milliseconds(20));
    AttackConfig cfg;
    cfg.timeout_s = 0.25;
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run(v, cfg);
    const double secs = seconds_since(t0);
    ok = ok && r.outcome == Outcome::timeout && secs < 1.0;
    detail += fmt("slow stub: %s after %.2f s, %zu queries=%zu calls", std::string(to_string(r.outcome)).c_str(), secs,
                  r.queries_used, v.calls.load());
  }
  verdict("budget_limits", ok, detail);
}

void metrics_arithmetic() {
  AttackReport a, b;
  a.outcome = b.outcome = Outcome::success;
  a.n_i = 50, a.n_t = 200, a.change_rate = 0.25;
  b.n_i = 150, b.n_t = 300, b.change_rate = 0.5;
  const auto s = summarize({a, b});
  const bool ok = s.mu_tc == 100.0 && s.sigma_tc == 50.0 && s.mu_tcr == 0.375 && s.asr == 1.0;
  verdict("metrics_arithmetic", ok,
          fmt("mu_tc=%g sigma_tc=%g mu_tcr=%g", s.mu_tc.value_or(-1), s.sigma_tc.value_or(-1), s.mu_tcr.value_or(-1)));
}

void augmentation_protocol(const E2E& e) {
  if (!e.ok) {
    verdict("augmentation_protocol", false, "end-to-end run unavailable");
    return;
  }
  const auto corpus = toy::make(10000, 99);
  AugmentConfig cfg;
  cfg.seed = 5;
  std::vector<AugmentResult> results(corpus.units.size());
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(corpus.units.size(), std::max(1u, std::thread::hardware_concurrency()), [&](std::size_t i) {
    SurrogateFiller filler(Language::c, 5);
    results[i] = augment_corpus({corpus.units[i]}, e.library, filler, cfg);
  });
  std::size_t perturbed = 0, in_range = 0, clean = 0, labels_kept = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& rec = results[i].manifest[0];
    const auto& unit = results[i].units[0];
    labels_kept += unit.label_hint == corpus.units[i].label_hint;
    clean += !has_parse_error(parse_source(unit));
    if (rec.insertions == 0) continue;
    ++perturbed;
    in_range += rec.insertions >= 1 && rec.insertions <= 5;
  }
  const double frac = static_cast<double>(perturbed) / static_cast<double>(results.size());
  verdict("augmentation_protocol",
          frac >= 0.48 && frac <= 0.52 && in_range == perturbed && clean == results.size() &&
              labels_kept == results.size(),
          fmt("perturbed %.4f of 10000; %zu/%zu with 1..5 insertions; %zu parse clean; %.1f s", frac, in_range,
              perturbed, clean, seconds_since(t0)));
}

}  // namespace

int main() {
  mining_oracle();
  cork_quality_exactness();
  greedy_property();
  importance_and_flip_hand_cases();
  const E2E e = end_to_end();
  semantics_preservation(e);
  budget_exactness(e);
  metrics_arithmetic();
  augmentation_protocol(e);
  verdict("full_scale_scope", true,
          "published transformer ASRs are out of scope (need the released fine-tuned models); every criterion above "
          "ran on surrogates with no bridge process");
  if (e.ok) fs::remove_all(e.out.parent_path());
  std::printf("%s: %d failing\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
