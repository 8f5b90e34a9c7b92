#include "astveil/engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "astveil/errors.hpp"

namespace astveil {

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::success: return "success";
    case Outcome::budget_exhausted: return "budget_exhausted";
    case Outcome::timeout: return "timeout";
    case Outcome::steps_exhausted: return "steps_exhausted";
    case Outcome::token_limit: return "token_limit";
    case Outcome::no_candidates: return "no_candidates";
  }
  return "no_candidates";
}

Outcome outcome_from_string(std::string_view name) {
  for (auto o : {Outcome::success, Outcome::budget_exhausted, Outcome::timeout, Outcome::steps_exhausted,
                 Outcome::token_limit, Outcome::no_candidates})
    if (to_string(o) == name) return o;
  throw FormatError("unknown outcome: " + std::string(name));
}

BudgetedVictim::BudgetedVictim(Victim& inner, std::size_t max_queries, double timeout_s)
    : inner_(inner), max_queries_(max_queries), timeout_s_(timeout_s), start_(std::chrono::steady_clock::now()) {}

double BudgetedVictim::elapsed_s() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

VictimPrediction BudgetedVictim::predict(std::string_view code, const std::optional<std::string>& context) {
  if (used_ >= max_queries_) throw Exhausted{Outcome::budget_exhausted};
  if (elapsed_s() >= timeout_s_) throw Exhausted{Outcome::timeout};
  ++used_;
  return inner_.predict(code, context);
}

std::vector<ScoredStatement> importance_scores(const SourceUnit& unit, const std::vector<Statement>& statements,
                                               Victim& victim, int c_t) {
  const double base = victim.predict(unit.text).probs.at(c_t);
  std::vector<ScoredStatement> out;
  for (const auto& s : statements) {
    const auto without = remove_statement(unit, s);
    if (!without) continue;
    const double p = victim.predict(without->text).probs.at(c_t);
    out.push_back({s, base - p});
  }
  return out;
}

std::vector<CandidateSource> fill_masks(const MaskedSource& masked, Filler& filler, Language language,
                                        std::size_t retries, std::size_t n) {
  const Span span = masked.insertion_span;
  const std::string_view text = masked.text;
  const std::string_view region = text.substr(span.start, span.size());
  const std::size_t masks = count_masks(region);
  if (masks == 0) {
    const AstGraph g = parse_text(text, language);
    return {CandidateSource{masked.text, span, count_tokens(g, language)}};
  }
  for (std::size_t attempt = 0; attempt < retries; ++attempt) {
    std::vector<CandidateSource> out;
    for (const auto& r : filler.fill(text, std::max<std::size_t>(n, 1), static_cast<std::uint32_t>(attempt))) {
      if (r.texts.size() != masks) continue;
      const std::string filled = replace_masks(region, r.texts);
      std::string cand;
      cand.reserve(text.size() - region.size() + filled.size());
      cand.append(text.substr(0, span.start));
      cand += filled;
      cand.append(text.substr(span.end));
      const AstGraph g = parse_text(cand, language);
      if (has_parse_error(g)) continue;
      const Span new_span{span.start, static_cast<std::uint32_t>(span.start + filled.size())};
      if (!region_is_dead(g, cand, new_span, language)) continue;
      if (std::any_of(out.begin(), out.end(), [&](const CandidateSource& c) { return c.text == cand; })) continue;
      out.push_back({std::move(cand), new_span, count_tokens(g, language)});
    }
    if (!out.empty()) return out;
  }
  return {};
}

std::vector<Statement> insertion_points(const AstGraph& graph, const SourceUnit& unit, const std::vector<Span>& skip) {
  std::vector<Statement> out;
  if (graph.empty()) return out;
  const auto& prof = profile(unit.language);
  for (const auto& s : extract_statements(graph, unit)) {
    const NodeId host = graph.parent(s.node);
    if (host == kNoNode || !prof.is_host(graph.node(host).kind)) continue;
    if (std::any_of(skip.begin(), skip.end(), [&](const Span& r) { return r.overlaps(s.span) || r.contains(s.span); }))
      continue;
    if (unit.language == Language::python && graph.node(host).kind != "module") {
      const auto hs = graph.node(host).span.start;
      const auto ls = line_start(unit.text, hs);
      if (std::string_view(unit.text).substr(ls, hs - ls).find_first_not_of(" \t") != std::string_view::npos)
        continue;
    }
    out.push_back(s);
  }
  return out;
}

namespace {

// Position in the unmodified text, given the insertion spans made so far.
std::uint32_t original_position(std::uint32_t pos, const std::vector<Span>& inserted) {
  std::uint32_t shift = 0;
  for (const auto& s : inserted)
    if (s.end <= pos) shift += s.size();
  return pos - shift;
}

}  // namespace

AttackReport attack(const SourceUnit& unit, Victim& victim, Filler& filler, const PatternLibrary& library,
                    const MetaModel& meta, const AttackConfig& config) {
  AttackReport report;
  report.unit_id = unit.id;
  report.adversarial_code = unit.text;
  const AstGraph original_graph = parse_source(unit);
  report.n_t = count_tokens(original_graph, unit.language);

  BudgetedVictim bv(victim, config.max_queries, config.timeout_s);
  std::mt19937_64 rng(mix_seed(config.seed, fnv1a(unit.id)));
  // Only enforce the cap when the untouched input fits under it.
  const bool enforce_token_limit = report.n_t <= config.token_limit;

  SourceUnit current = unit;
  std::vector<Span> inserted;  // current coordinates, aligned with report.edits
  std::set<std::pair<std::uint32_t, std::size_t>> used;  // (original statement start, pattern)

  auto finish = [&](Outcome outcome) {
    report.outcome = outcome;
    report.queries_used = bv.used();
    if (config.record_elapsed) report.elapsed_s = bv.elapsed_s();
    report.adversarial_code = current.text;
    for (std::size_t i = 0; i < report.edits.size(); ++i) report.edits[i].insertion_span = inserted[i];
    if (!report.edits.empty()) {
      const AstGraph final_graph = parse_source(current);
      for (const auto& s : inserted) report.n_i += count_tokens(final_graph, unit.language, s);
    }
    report.change_rate = report.n_t ? static_cast<double>(report.n_i) / static_cast<double>(report.n_t) : 0.0;
    return report;
  };

  try {
    const auto first = bv.predict(unit.text);
    const int c_t = first.predicted;
    report.original_class = report.final_class = c_t;
    report.original_confidence = first.probs[c_t];

    for (std::size_t step = 1; step <= config.max_steps; ++step) {
      const AstGraph graph = parse_source(current);
      const auto points = insertion_points(graph, current, inserted);
      if (points.empty() || library.patterns.empty()) return finish(Outcome::no_candidates);

      auto scored = importance_scores(current, points, bv, c_t);
      std::stable_sort(scored.begin(), scored.end(),
                       [](const ScoredStatement& a, const ScoredStatement& b) { return a.delta > b.delta; });
      std::vector<Statement> order;
      for (const auto& s : scored) order.push_back(s.statement);
      // Statements that cannot be removed still make fine insertion points.
      for (const auto& p : points)
        if (std::none_of(order.begin(), order.end(), [&](const Statement& s) { return s.span == p.span; }))
          order.push_back(p);

      const FeatureVector f = featurize(graph, library.patterns);
      bool accepted = false;
      for (const auto& stmt : order) {
        const auto key = original_position(stmt.span.start, inserted);
        std::vector<std::size_t> missing;
        for (auto j : missing_patterns(f))
          if (!used.count({key, j})) missing.push_back(j);
        std::vector<std::size_t> present;
        for (std::size_t j = 0; j < f.size(); ++j)
          if (f.bits[j] && !used.count({key, j})) present.push_back(j);

        while (!accepted) {
          std::optional<std::size_t> pick = choose_pattern(meta, f, missing, c_t, config.choose, &rng);
          if (pick) {
            missing.erase(std::find(missing.begin(), missing.end(), *pick));
          } else if (!present.empty()) {
            // Every missing pattern failed here; adding one more instance
            // of a present pattern still raises its count.
            pick = present.front();
            present.erase(present.begin());
          } else {
            break;
          }
          used.insert({key, *pick});

          std::vector<CandidateSource> cands;
          try {
            const auto masked = render_insertion(current, graph, stmt, library.templates[*pick]);
            cands = fill_masks(masked, filler, unit.language, config.fill_retries, config.fills_per_step);
          } catch (const IndentationUnresolvable&) {
            continue;
          }
          if (cands.empty()) continue;

          const CandidateSource* best = nullptr;
          VictimPrediction best_pred;
          for (const auto& c : cands) {
            if (enforce_token_limit && c.token_count > config.token_limit) return finish(Outcome::token_limit);
            if (config.on_candidate) config.on_candidate(current.text, c);
            const auto pred = bv.predict(c.text);
            if (!best || pred.probs[c_t] < best_pred.probs[c_t] || pred.predicted != c_t) {
              best = &c;
              best_pred = pred;
            }
            if (pred.predicted != c_t) break;
          }

          for (auto& s : inserted)
            if (s.start >= best->insertion_span.start) {
              s.start += best->insertion_span.size();
              s.end += best->insertion_span.size();
            }
          Edit e;
          e.step = step;
          e.statement_span = stmt.span;
          e.pattern_id = library.patterns[*pick].id;
          e.inserted_text = best->text.substr(best->insertion_span.start, best->insertion_span.size());
          e.confidence = best_pred.probs[c_t];
          report.edits.push_back(std::move(e));
          inserted.push_back(best->insertion_span);
          current.text = best->text;
          report.final_class = best_pred.predicted;
          accepted = true;
        }
        if (accepted) break;
      }
      if (!accepted) return finish(Outcome::no_candidates);
      if (report.final_class != c_t) return finish(Outcome::success);
    }
    return finish(Outcome::steps_exhausted);
  } catch (const BudgetedVictim::Exhausted& e) {
    return finish(e.outcome);
  }
}

AugmentResult augment_corpus(const std::vector<SourceUnit>& units, const PatternLibrary& library, Filler& filler,
                             const AugmentConfig& config) {
  AugmentResult out;
  out.units.reserve(units.size());
  for (const auto& unit : units) {
    std::mt19937_64 rng(mix_seed(config.seed, fnv1a(unit.id)));
    AugmentRecord rec;
    rec.unit_id = unit.id;
    rec.selected = std::bernoulli_distribution(std::clamp(config.p, 0.0, 1.0))(rng);
    SourceUnit current = unit;
    if (rec.selected && config.max_perturb > 0 && !library.patterns.empty()) {
      rec.planned = std::uniform_int_distribution<std::size_t>(1, config.max_perturb)(rng);
      std::vector<Span> inserted;
      for (std::size_t i = 0; i < rec.planned; ++i) {
        bool done = false;
        for (std::size_t attempt = 0; attempt < config.attempts_per_insertion && !done; ++attempt) {
          AstGraph graph;
          try {
            graph = parse_source(current);
          } catch (const Error&) {
            break;
          }
          const auto points = insertion_points(graph, current, inserted);
          if (points.empty()) break;
          const auto& stmt = points[std::uniform_int_distribution<std::size_t>(0, points.size() - 1)(rng)];
          const auto j = std::uniform_int_distribution<std::size_t>(0, library.patterns.size() - 1)(rng);
          try {
            const auto masked = render_insertion(current, graph, stmt, library.templates[j]);
            const auto cands = fill_masks(masked, filler, unit.language, config.fill_retries, 1);
            if (cands.empty()) continue;
            for (auto& s : inserted)
              if (s.start >= cands[0].insertion_span.start) {
                s.start += cands[0].insertion_span.size();
                s.end += cands[0].insertion_span.size();
              }
            inserted.push_back(cands[0].insertion_span);
            current.text = cands[0].text;
            rec.pattern_ids.push_back(library.patterns[j].id);
            ++rec.insertions;
            done = true;
          } catch (const IndentationUnresolvable&) {
          }
        }
        if (!done) break;
      }
    }
    out.units.push_back(std::move(current));
    out.manifest.push_back(std::move(rec));
  }
  return out;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - m) * (x - m);
  var /= static_cast<double>(v.size());
  return {m, std::sqrt(var)};
}

}  // namespace

MetricsSummary summarize(const std::vector<AttackReport>& reports) {
  MetricsSummary s;
  s.attempted = reports.size();
  std::vector<double> tc, tcr;
  for (const auto& r : reports) {
    if (r.outcome != Outcome::success) continue;
    ++s.successes;
    tc.push_back(static_cast<double>(r.n_i));
    tcr.push_back(r.change_rate);
  }
  if (s.attempted > 0) s.asr = static_cast<double>(s.successes) / static_cast<double>(s.attempted);
  if (!tc.empty()) {
    std::tie(s.mu_tc, s.sigma_tc) = mean_std(tc);
    std::tie(s.mu_tcr, s.sigma_tcr) = mean_std(tcr);
  }
  return s;
}

std::vector<std::pair<std::string, double>> pattern_frequency(const std::vector<AttackReport>& reports) {
  std::map<std::string, std::size_t> present;
  std::size_t successes = 0;
  for (const auto& r : reports) {
    if (r.outcome != Outcome::success) continue;
    ++successes;
    std::set<std::string> ids;
    for (const auto& e : r.edits) ids.insert(e.pattern_id);
    for (const auto& id : ids) ++present[id];
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [id, count] : present)
    out.emplace_back(id, static_cast<double>(count) / static_cast<double>(successes));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

}  // namespace astveil
