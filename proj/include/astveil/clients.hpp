#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "astveil/code_graph.hpp"

namespace astveil {

struct VictimPrediction {
  std::vector<double> probs;
  int predicted = 0;

  // Validates (non-negative, sums to 1 ± 1e-6) and takes the argmax, lower
  // index on ties. Throws MalformedResponse.
  static VictimPrediction from_probs(std::vector<double> probs);
};

int argmax(const std::vector<double>& v);

class Victim {
 public:
  virtual ~Victim() = default;
  virtual VictimPrediction predict(std::string_view code, const std::optional<std::string>& context = {}) = 0;
};

struct FillResult {
  std::vector<std::string> texts;  // one per mask, in order

  friend bool operator==(const FillResult&, const FillResult&) = default;
};

class Filler {
 public:
  virtual ~Filler() = default;
  // Up to n candidates. `attempt` lets deterministic fillers vary between
  // retries of the same text; remote fillers sample and ignore it.
  virtual std::vector<FillResult> fill(std::string_view text, std::size_t n, std::uint32_t attempt = 0) = 0;
};

// Wraps a plain function; handy for stubs and bindings.
class CallbackVictim : public Victim {
 public:
  using Fn = std::function<std::vector<double>(std::string_view code)>;
  explicit CallbackVictim(Fn fn) : fn_(std::move(fn)) {}
  VictimPrediction predict(std::string_view code, const std::optional<std::string>& context = {}) override;

 private:
  Fn fn_;
};

struct SurrogateTrainParams {
  int iterations = 400;
  double learning_rate = 1.0;
  double l2 = 1e-4;
};

// Softmax regression over node-kind counts (named kinds plus operator
// tokens), each feature scaled by its training maximum.
class SurrogateVictim : public Victim {
 public:
  SurrogateVictim() = default;

  // Throws DegenerateLabels unless at least two classes appear.
  static SurrogateVictim train(const std::vector<SourceUnit>& units, const std::vector<int>& labels,
                               Language language, const SurrogateTrainParams& params = {});

  VictimPrediction predict(std::string_view code, const std::optional<std::string>& context = {}) override;
  std::vector<double> features(std::string_view code) const;

  int num_classes() const { return static_cast<int>(bias_.size()); }
  const std::vector<std::string>& kinds() const { return kinds_; }
  const std::vector<std::vector<double>>& weights() const { return weights_; }
  const std::vector<double>& bias() const { return bias_; }
  Language language() const { return language_; }

  std::string to_json() const;
  static SurrogateVictim from_json(std::string_view text);

  friend bool operator==(const SurrogateVictim& a, const SurrogateVictim& b) {
    return a.language_ == b.language_ && a.kinds_ == b.kinds_ && a.scale_ == b.scale_ && a.weights_ == b.weights_ &&
           a.bias_ == b.bias_;
  }

 private:
  Language language_ = Language::c;
  std::vector<std::string> kinds_;
  std::vector<double> scale_;
  std::vector<std::vector<double>> weights_;  // [class][feature]
  std::vector<double> bias_;
};

// Identifiers from the 20 lines above the first mask plus {0, 1, ""},
// chosen per slot kind (condition slots take identifiers first).
class SurrogateFiller : public Filler {
 public:
  SurrogateFiller(Language language, std::uint64_t seed) : language_(language), seed_(seed) {}
  std::vector<FillResult> fill(std::string_view text, std::size_t n, std::uint32_t attempt = 0) override;

  // Identifiers in the 20 lines above the first mask, keywords removed.
  std::vector<std::string> identifier_pool(std::string_view text) const;

 private:
  Language language_;
  std::uint64_t seed_;
};

std::uint64_t fnv1a(std::string_view s);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace astveil
