#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace astveil {

enum class Language { python, java, c };

std::string_view to_string(Language language);

// Throws UnsupportedLanguage for anything but "python", "java" or "c".
Language language_from_string(std::string_view name);

// Per-language node-kind tables loaded from statement_kinds.json.
struct LanguageProfile {
  Language language = Language::c;
  std::vector<std::string> statement_kinds;
  // Containers whose statements may receive an inserted sibling.
  std::vector<std::string> host_kinds;
  std::vector<std::string> comment_kinds;

  bool is_statement(std::string_view kind) const;
  bool is_host(std::string_view kind) const;
  bool is_comment(std::string_view kind) const;
};

// Built-in profile compiled from data/statement_kinds.json.
const LanguageProfile& profile(Language language);

// Parses a statement_kinds.json document (used for overrides and tests).
LanguageProfile load_profile(std::string_view json_text, Language language);

bool contains_kind(const std::vector<std::string>& kinds, std::string_view kind);

}  // namespace astveil
