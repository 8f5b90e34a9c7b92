#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "astveil/code_graph.hpp"
#include "astveil/matching.hpp"
#include "astveil/miner.hpp"
#include "astveil/pattern.hpp"

namespace astveil {

inline constexpr std::string_view kMask = "<MASK>";

enum class GuardKind { conditional, plain };

std::string_view to_string(GuardKind kind);
GuardKind guard_kind_from_string(std::string_view name);

// Per-language rewrite rules loaded from guards.json.
struct GuardTable {
  Language language = Language::c;
  std::vector<std::string> conditional_kinds;
  std::string condition_guard;  // contains <COND>
  std::string false_literal;
  std::string dead_block_open;
  std::string dead_block_close;
  std::string statement_terminator;
  std::vector<std::string> mask_leaf_kinds;
  std::vector<std::string> verbatim_kinds;
  std::vector<std::string> paren_wrapper_kinds;

  // Text of condition_guard in front of <COND>, e.g. "false && (".
  std::string guard_prefix() const;
};

const GuardTable& guard_table(Language language);
GuardTable load_guard_table(std::string_view json_text, Language language);

struct MaskedTemplate {
  std::string pattern_id;
  std::string text;
  GuardKind guard_kind = GuardKind::plain;
  Language language = Language::c;
  // Byte range of the loop/branch condition inside `text` (conditional only).
  std::optional<Span> condition_span;
  bool guarded = false;

  friend bool operator==(const MaskedTemplate&, const MaskedTemplate&) = default;
};

struct MaskedSource {
  std::string base_unit_id;
  std::string text;
  Span insertion_span;

  friend bool operator==(const MaskedSource&, const MaskedSource&) = default;
};

std::size_t count_masks(std::string_view text);

// Substitutes fills[i] for the i-th mask. Throws LengthMismatch on a count mismatch.
std::string replace_masks(std::string_view text, const std::vector<std::string>& fills);

// Template from one concrete instance: the instance root's text with every
// identifier/literal leaf and every unmapped child subtree replaced by a mask.
MaskedTemplate instance_template(const Pattern& pattern, const SourceUnit& unit, const AstGraph& graph,
                                 const PatternInstance& instance);

// Uses the instance_index-th instance in corpus order (0 = first).
// Throws NoInstanceFound.
MaskedTemplate pattern_to_template(const Pattern& pattern, const ProbeCorpus& corpus,
                                   std::size_t instance_index = 0);

MaskedTemplate apply_semantics_guard(const MaskedTemplate& tmpl);

// Inserts the guarded template on a new line after the statement, at the
// statement's indentation. Throws IndentationUnresolvable when the statement
// sits in a suite that cannot take a sibling (brace-less arm, one-line suite).
MaskedSource render_insertion(const SourceUnit& unit, const AstGraph& graph, const Statement& stmt,
                              const MaskedTemplate& tmpl);
MaskedSource render_insertion(const SourceUnit& unit, const Statement& stmt, const MaskedTemplate& tmpl);

// What kind of text fits a mask, judged from the characters around it.
enum class SlotKind { expression, condition, statement, op, string };

std::vector<SlotKind> classify_slots(std::string_view text, Language language);

// Fills every mask with a fixed placeholder of the right slot kind (`m0`,
// `m0;`, `==`). Used to probe whether a template can parse at all.
std::string placeholder_fill(std::string_view text, Language language);

// Guarded template spliced into a small host function and filled with
// placeholders parses without errors.
bool insertable(const MaskedTemplate& guarded);

// Every maximal named node inside `region` is a conditional whose condition
// starts with the false literal and which has no else branch.
bool region_is_dead(const AstGraph& graph, std::string_view text, Span region, Language language);

}  // namespace astveil
