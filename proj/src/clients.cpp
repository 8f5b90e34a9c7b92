#include "astveil/clients.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <json.hpp>
#include <map>
#include <random>
#include <set>

#include "astveil/errors.hpp"
#include "astveil/miner.hpp"
#include "astveil/synthesis.hpp"

namespace astveil {

int argmax(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

VictimPrediction VictimPrediction::from_probs(std::vector<double> probs) {
  if (probs.empty()) throw MalformedResponse("empty probability vector");
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) throw MalformedResponse("probabilities must be finite and non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw MalformedResponse("probabilities sum to " + std::to_string(sum));
  VictimPrediction out;
  out.predicted = argmax(probs);
  out.probs = std::move(probs);
  return out;
}

VictimPrediction CallbackVictim::predict(std::string_view code, const std::optional<std::string>&) {
  return VictimPrediction::from_probs(fn_(code));
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace {

std::map<std::string, double> kind_counts(std::string_view code, Language language) {
  std::map<std::string, double> counts;
  const AstGraph g = parse_text(code, language);
  for (NodeId v = 0; v < g.size(); ++v) {
    const auto& n = g.node(v);
    if (v == g.root() || n.missing) continue;
    if (n.named || is_operator_token(n.kind)) counts[n.kind] += 1.0;
  }
  return counts;
}

std::vector<double> softmax(const std::vector<double>& z) {
  const double top = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += (p[i] = std::exp(z[i] - top));
  for (auto& v : p) v /= sum;
  return p;
}

}  // namespace

SurrogateVictim SurrogateVictim::train(const std::vector<SourceUnit>& units, const std::vector<int>& labels,
                                       Language language, const SurrogateTrainParams& params) {
  if (units.size() != labels.size()) throw LengthMismatch("units and labels differ in length");
  const std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw DegenerateLabels("surrogate victim needs at least two classes");
  if (*distinct.begin() < 0) throw DegenerateLabels("negative class label");

  SurrogateVictim m;
  m.language_ = language;
  std::vector<std::map<std::string, double>> rows;
  std::set<std::string> vocab;
  for (const auto& u : units) {
    rows.push_back(kind_counts(u.text, language));
    for (const auto& [k, _] : rows.back()) vocab.insert(k);
  }
  m.kinds_.assign(vocab.begin(), vocab.end());
  const std::size_t d = m.kinds_.size();
  m.scale_.assign(d, 1.0);
  std::vector<std::vector<double>> x(rows.size(), std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      auto it = rows[i].find(m.kinds_[j]);
      if (it != rows[i].end()) x[i][j] = it->second;
      m.scale_[j] = std::max(m.scale_[j], x[i][j]);
    }
  }
  for (auto& r : x)
    for (std::size_t j = 0; j < d; ++j) r[j] /= m.scale_[j];

  const int classes = *distinct.rbegin() + 1;
  m.weights_.assign(classes, std::vector<double>(d, 0.0));
  m.bias_.assign(classes, 0.0);
  const double inv_n = 1.0 / static_cast<double>(x.size());
  for (int it = 0; it < params.iterations; ++it) {
    std::vector<std::vector<double>> gw(classes, std::vector<double>(d, 0.0));
    std::vector<double> gb(classes, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      std::vector<double> z(m.bias_);
      for (int c = 0; c < classes; ++c)
        for (std::size_t j = 0; j < d; ++j) z[c] += m.weights_[c][j] * x[i][j];
      const auto p = softmax(z);
      for (int c = 0; c < classes; ++c) {
        const double err = p[c] - (labels[i] == c ? 1.0 : 0.0);
        gb[c] += err * inv_n;
        for (std::size_t j = 0; j < d; ++j) gw[c][j] += err * x[i][j] * inv_n;
      }
    }
    for (int c = 0; c < classes; ++c) {
      m.bias_[c] -= params.learning_rate * gb[c];
      for (std::size_t j = 0; j < d; ++j)
        m.weights_[c][j] -= params.learning_rate * (gw[c][j] + params.l2 * m.weights_[c][j]);
    }
  }
  return m;
}

std::vector<double> SurrogateVictim::features(std::string_view code) const {
  const auto counts = kind_counts(code, language_);
  std::vector<double> x(kinds_.size(), 0.0);
  for (std::size_t j = 0; j < kinds_.size(); ++j) {
    auto it = counts.find(kinds_[j]);
    if (it != counts.end()) x[j] = it->second / scale_[j];
  }
  return x;
}

VictimPrediction SurrogateVictim::predict(std::string_view code, const std::optional<std::string>&) {
  const auto x = features(code);
  std::vector<double> z(bias_);
  for (std::size_t c = 0; c < z.size(); ++c)
    for (std::size_t j = 0; j < x.size(); ++j) z[c] += weights_[c][j] * x[j];
  return VictimPrediction::from_probs(softmax(z));
}

std::string SurrogateVictim::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = "surrogate_victim";
  j["language"] = std::string(to_string(language_));
  j["kinds"] = kinds_;
  j["scale"] = scale_;
  j["weights"] = weights_;
  j["bias"] = bias_;
  return j.dump();
}

SurrogateVictim SurrogateVictim::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SurrogateVictim m;
    m.language_ = language_from_string(j.at("language").get<std::string>());
    m.kinds_ = j.at("kinds").get<std::vector<std::string>>();
    m.scale_ = j.at("scale").get<std::vector<double>>();
    m.weights_ = j.at("weights").get<std::vector<std::vector<double>>>();
    m.bias_ = j.at("bias").get<std::vector<double>>();
    if (m.scale_.size() != m.kinds_.size() || m.weights_.size() != m.bias_.size())
      throw FormatError("surrogate victim: inconsistent dimensions");
    for (const auto& w : m.weights_)
      if (w.size() != m.kinds_.size()) throw FormatError("surrogate victim: inconsistent dimensions");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("surrogate victim: ") + e.what());
  }
}

namespace {

const std::vector<std::string>& keywords(Language language) {
  static const std::vector<std::string> c = {
      "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else", "enum",
      "extern", "float", "for", "goto", "if", "inline", "int", "long", "register", "restrict", "return",
      "short", "signed", "sizeof", "static", "struct", "switch", "typedef", "union", "unsigned", "void",
      "volatile", "while", "true", "false", "NULL", "bool"};
  static const std::vector<std::string> java = {
      "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
      "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
      "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long", "native",
      "new", "package", "private", "protected", "public", "return", "short", "static", "strictfp",
      "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try", "void",
      "volatile", "while", "true", "false", "null", "var", "yield", "record"};
  static const std::vector<std::string> python = {
      "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
      "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in",
      "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while", "with",
      "yield", "print", "exec", "match", "case"};
  switch (language) {
    case Language::c: return c;
    case Language::java: return java;
    case Language::python: return python;
  }
  return c;
}

}  // namespace

std::vector<std::string> SurrogateFiller::identifier_pool(std::string_view text) const {
  const auto first = text.find(kMask);
  const std::size_t mask_line = line_start(text, static_cast<std::uint32_t>(first == std::string_view::npos ? text.size() : first));
  std::size_t from = mask_line;
  for (int lines = 0; lines < 20 && from > 0; ++lines) from = line_start(text, static_cast<std::uint32_t>(from - 1));
  const std::string_view window = text.substr(from, mask_line - from);

  std::set<std::string> pool;
  const auto& kw = keywords(language_);
  std::size_t i = 0;
  while (i < window.size()) {
    const char c = window[i];
    if (c == '"' || c == '\'') {
      // skip string and char literals
      std::size_t j = i + 1;
      while (j < window.size() && window[j] != c && window[j] != '\n') j += window[j] == '\\' ? 2 : 1;
      i = j + 1;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < window.size() && (std::isalnum(static_cast<unsigned char>(window[j])) || window[j] == '_')) ++j;
      std::string word(window.substr(i, j - i));
      if (!contains_kind(kw, word) && word != "MASK") pool.insert(std::move(word));
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      while (i < window.size() && (std::isalnum(static_cast<unsigned char>(window[i])) || window[i] == '.')) ++i;
    } else {
      ++i;
    }
  }
  return {pool.begin(), pool.end()};
}

std::vector<FillResult> SurrogateFiller::fill(std::string_view text, std::size_t n, std::uint32_t attempt) {
  const auto slots = classify_slots(text, language_);
  if (slots.empty()) return {FillResult{}};
  const auto idents = identifier_pool(text);
  static const std::vector<std::string> literals = {"0", "1", "\"\""};
  static const std::vector<std::string> ops = {"==", "!=", "<"};
  std::vector<std::string> any(idents);
  any.insert(any.end(), literals.begin(), literals.end());

  std::mt19937_64 rng(mix_seed(mix_seed(seed_, fnv1a(text)), (static_cast<std::uint64_t>(n) << 32) | attempt));
  auto pick = [&](const std::vector<std::string>& from) {
    return from[std::uniform_int_distribution<std::size_t>(0, from.size() - 1)(rng)];
  };
  std::vector<FillResult> out;
  for (std::size_t k = 0; k < n; ++k) {
    FillResult r;
    for (auto s : slots) {
      switch (s) {
        case SlotKind::op: r.texts.push_back(pick(ops)); break;
        case SlotKind::string: r.texts.push_back(idents.empty() ? std::string() : pick(idents)); break;
        case SlotKind::condition: r.texts.push_back(idents.empty() ? pick(literals) : pick(idents)); break;
        case SlotKind::statement:
          r.texts.push_back((idents.empty() ? std::string("0") : pick(idents)) + ";");
          break;
        case SlotKind::expression: r.texts.push_back(pick(any)); break;
      }
    }
    if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(std::move(r));
  }
  return out;
}

}  // namespace astveil
