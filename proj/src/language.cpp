#include "astveil/language.hpp"

#include <algorithm>
#include <array>
#include <json.hpp>

#include "astveil/embedded_data.hpp"
#include "astveil/errors.hpp"

namespace astveil {

std::string_view to_string(Language language) {
  switch (language) {
    case Language::python: return "python";
    case Language::java: return "java";
    case Language::c: return "c";
  }
  return "c";
}

Language language_from_string(std::string_view name) {
  if (name == "python") return Language::python;
  if (name == "java") return Language::java;
  if (name == "c") return Language::c;
  throw UnsupportedLanguage("unsupported language: " + std::string(name));
}

bool contains_kind(const std::vector<std::string>& kinds, std::string_view kind) {
  return std::find(kinds.begin(), kinds.end(), kind) != kinds.end();
}

bool LanguageProfile::is_statement(std::string_view kind) const {
  return contains_kind(statement_kinds, kind);
}
bool LanguageProfile::is_host(std::string_view kind) const { return contains_kind(host_kinds, kind); }
bool LanguageProfile::is_comment(std::string_view kind) const {
  return contains_kind(comment_kinds, kind);
}

LanguageProfile load_profile(std::string_view json_text, Language language) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("statement_kinds.json: ") + e.what());
  }
  const auto key = std::string(to_string(language));
  if (!doc.contains("languages") || !doc["languages"].contains(key))
    throw UnsupportedLanguage("no statement kinds for language " + key);
  const auto& entry = doc["languages"][key];
  LanguageProfile p;
  p.language = language;
  p.statement_kinds = entry.at("statement_kinds").get<std::vector<std::string>>();
  p.host_kinds = entry.at("host_kinds").get<std::vector<std::string>>();
  p.comment_kinds = entry.value("comment_kinds", std::vector<std::string>{"comment"});
  return p;
}

const LanguageProfile& profile(Language language) {
  static const std::array<LanguageProfile, 3> profiles = {
      load_profile(embedded::kStatementKindsJson, Language::python),
      load_profile(embedded::kStatementKindsJson, Language::java),
      load_profile(embedded::kStatementKindsJson, Language::c),
  };
  return profiles[static_cast<std::size_t>(language)];
}

}  // namespace astveil
