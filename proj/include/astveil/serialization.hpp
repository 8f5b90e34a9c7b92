#pragma once

#include <json.hpp>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "astveil/code_graph.hpp"
#include "astveil/engine.hpp"
#include "astveil/meta_model.hpp"
#include "astveil/miner.hpp"
#include "astveil/synthesis.hpp"

namespace astveil {

inline constexpr int kFormatVersion = 1;

struct PatternSection {
  PatternSet set;
  std::vector<MaskedTemplate> templates;  // unguarded, aligned with set.patterns

  friend bool operator==(const PatternSection&, const PatternSection&) = default;
};

struct PatternFile {
  int version = kFormatVersion;
  Language language = Language::c;
  std::vector<PatternSection> sections;

  friend bool operator==(const PatternFile&, const PatternFile&) = default;
};

// All loaders throw FormatError on malformed input.
std::string dump_patterns(const PatternFile& file);
PatternFile load_patterns(std::string_view text);

std::string dump_meta(const MetaModel& meta);
MetaModel load_meta(std::string_view text);

nlohmann::ordered_json report_to_json(const AttackReport& report);
AttackReport report_from_json(const nlohmann::json& j);
std::string report_line(const AttackReport& report);  // one JSON line, no newline

std::string dump_summary(const MetricsSummary& summary,
                         const std::vector<std::pair<std::string, double>>& frequency);

nlohmann::ordered_json graph_to_json(const AstGraph& graph);
AstGraph graph_from_json(const nlohmann::json& j);

// Union of all sections in file order, first occurrence of each canonical
// code kept, templates guarded.
PatternLibrary build_library(const PatternFile& file);

}  // namespace astveil
