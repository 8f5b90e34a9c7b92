#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "astveil/clients.hpp"
#include "astveil/code_graph.hpp"
#include "astveil/meta_model.hpp"
#include "astveil/pattern.hpp"
#include "astveil/synthesis.hpp"

namespace astveil {

struct CandidateSource;

struct AttackConfig {
  std::size_t max_queries = 2000;
  double timeout_s = 100.0;
  std::size_t max_steps = 10;
  std::size_t fill_retries = 5;
  std::size_t token_limit = 512;
  std::size_t fills_per_step = 3;
  bool record_elapsed = true;
  ChooseOptions choose;
  std::uint64_t seed = 0;
  // Sees every candidate, with the text it was built from, before it is queried.
  std::function<void(std::string_view base, const CandidateSource&)> on_candidate;
};

enum class Outcome { success, budget_exhausted, timeout, steps_exhausted, token_limit, no_candidates };

std::string_view to_string(Outcome outcome);
Outcome outcome_from_string(std::string_view name);

struct Edit {
  std::size_t step = 0;
  Span statement_span;   // in the text the step started from
  std::string pattern_id;
  std::string inserted_text;
  Span insertion_span;   // in the final adversarial text
  double confidence = 0.0;  // P(c_t) after the edit

  friend bool operator==(const Edit&, const Edit&) = default;
};

struct AttackReport {
  std::string unit_id;
  Outcome outcome = Outcome::no_candidates;
  int original_class = -1;  // -1 when the budget allowed no query at all
  int final_class = -1;
  double original_confidence = 0.0;
  std::size_t queries_used = 0;
  std::optional<double> elapsed_s;
  std::vector<Edit> edits;
  std::size_t n_i = 0;
  std::size_t n_t = 0;
  double change_rate = 0.0;
  std::string adversarial_code;

  friend bool operator==(const AttackReport&, const AttackReport&) = default;
};

struct MetricsSummary {
  std::size_t attempted = 0;
  std::size_t successes = 0;
  std::optional<double> asr;
  std::optional<double> mu_tc, sigma_tc, mu_tcr, sigma_tcr;

  friend bool operator==(const MetricsSummary&, const MetricsSummary&) = default;
};

// Patterns as features for the meta-model, each with its guarded template.
struct PatternLibrary {
  Language language = Language::c;
  std::vector<Pattern> patterns;
  std::vector<MaskedTemplate> templates;  // guarded, aligned with patterns
};

// Counts and caps victim calls. Every call goes through here, so the count
// is exact whatever the outcome.
class BudgetedVictim : public Victim {
 public:
  struct Exhausted {
    Outcome outcome;
  };

  BudgetedVictim(Victim& inner, std::size_t max_queries, double timeout_s);
  // Throws Exhausted{budget_exhausted | timeout} instead of querying.
  VictimPrediction predict(std::string_view code, const std::optional<std::string>& context = {}) override;

  std::size_t used() const { return used_; }
  double elapsed_s() const;

 private:
  Victim& inner_;
  std::size_t max_queries_;
  double timeout_s_;
  std::size_t used_ = 0;
  std::chrono::steady_clock::time_point start_;
};

struct ScoredStatement {
  Statement statement;
  double delta = 0.0;
};

// Δ(a) = P(s, c_t) − P(s∖a, c_t). Statements whose removal breaks the parse
// are left out. Uses 1 + |scored| victim calls.
std::vector<ScoredStatement> importance_scores(const SourceUnit& unit, const std::vector<Statement>& statements,
                                               Victim& victim, int c_t);

struct CandidateSource {
  std::string text;
  Span insertion_span;
  std::size_t token_count = 0;
};

// Each retry asks the filler for up to n fills; fills that do not reparse
// cleanly or escape the dead guard are dropped. Gives up (empty) after
// `retries` rounds without a usable candidate.
std::vector<CandidateSource> fill_masks(const MaskedSource& masked, Filler& filler, Language language,
                                        std::size_t retries = 5, std::size_t n = 1);

// Statements that can receive an inserted sibling and lie outside `skip`.
std::vector<Statement> insertion_points(const AstGraph& graph, const SourceUnit& unit,
                                        const std::vector<Span>& skip = {});

AttackReport attack(const SourceUnit& unit, Victim& victim, Filler& filler, const PatternLibrary& library,
                    const MetaModel& meta, const AttackConfig& config);

struct AugmentConfig {
  double p = 0.5;
  std::size_t max_perturb = 5;
  std::size_t attempts_per_insertion = 10;
  std::size_t fill_retries = 5;
  std::uint64_t seed = 0;
};

struct AugmentRecord {
  std::string unit_id;
  bool selected = false;       // the Bernoulli draw came up
  std::size_t planned = 0;     // m drawn from U{1..max_perturb}
  std::size_t insertions = 0;  // actually made
  std::vector<std::string> pattern_ids;

  friend bool operator==(const AugmentRecord&, const AugmentRecord&) = default;
};

struct AugmentResult {
  std::vector<SourceUnit> units;
  std::vector<AugmentRecord> manifest;
};

AugmentResult augment_corpus(const std::vector<SourceUnit>& units, const PatternLibrary& library, Filler& filler,
                             const AugmentConfig& config);

// Population standard deviation; token statistics only over successes.
MetricsSummary summarize(const std::vector<AttackReport>& reports);

// Share of successful reports whose edits use each pattern, descending,
// ties by pattern id.
std::vector<std::pair<std::string, double>> pattern_frequency(const std::vector<AttackReport>& reports);

}  // namespace astveil
