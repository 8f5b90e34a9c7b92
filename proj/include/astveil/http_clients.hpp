#pragma once

#include <memory>
#include <optional>
#include <semaphore>
#include <string>

#include "astveil/clients.hpp"
#include "astveil/language.hpp"

namespace astveil {

inline constexpr const char* kBearerTokenEnv = "ASTVEIL_BEARER_TOKEN";

struct HttpOptions {
  double connect_timeout_s = 5.0;
  double read_timeout_s = 120.0;
  int retries = 2;             // extra attempts after the first
  int max_in_flight = 4;       // concurrent requests per client
  std::string bearer_token_env = kBearerTokenEnv;
};

// "http://host:port/base" split into the client origin and a path prefix.
struct Endpoint {
  std::string origin;
  std::string base_path;

  static Endpoint parse(const std::string& url);  // throws ConfigError
};

// Request bodies are serialized with a fixed key order so recorded
// fixtures can be compared byte for byte.
std::string predict_request_body(std::string_view code, const std::optional<std::string>& context,
                                 Language language);
std::string fill_request_body(std::string_view text, std::size_t n, Language language);

// Response parsing with full validation. Throw MalformedResponse.
VictimPrediction parse_predict_response(std::string_view body);
std::vector<FillResult> parse_fill_response(std::string_view body, std::size_t masks, std::size_t n);

class HttpVictim : public Victim {
 public:
  HttpVictim(const std::string& url, Language language, HttpOptions options = {});
  ~HttpVictim() override;
  VictimPrediction predict(std::string_view code, const std::optional<std::string>& context = {}) override;

 private:
  Endpoint endpoint_;
  Language language_;
  HttpOptions options_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

class HttpFiller : public Filler {
 public:
  HttpFiller(const std::string& url, Language language, HttpOptions options = {});
  ~HttpFiller() override;
  std::vector<FillResult> fill(std::string_view text, std::size_t n, std::uint32_t attempt = 0) override;

 private:
  Endpoint endpoint_;
  Language language_;
  HttpOptions options_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

}  // namespace astveil
