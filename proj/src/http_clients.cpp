#include "astveil/http_clients.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <json.hpp>

#include "astveil/errors.hpp"
#include "astveil/synthesis.hpp"

namespace astveil {

Endpoint Endpoint::parse(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint needs a scheme: " + url);
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported endpoint scheme: " + scheme);
  const auto path_at = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_at);
  if (e.origin.size() <= scheme_end + 3) throw ConfigError("endpoint has no host: " + url);
  if (path_at != std::string::npos) e.base_path = url.substr(path_at);
  while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
  return e;
}

std::string predict_request_body(std::string_view code, const std::optional<std::string>& context,
                                 Language language) {
  nlohmann::ordered_json j;
  j["code"] = std::string(code);
  j["context"] = context ? nlohmann::ordered_json(*context) : nlohmann::ordered_json(nullptr);
  j["language"] = std::string(to_string(language));
  return j.dump();
}

std::string fill_request_body(std::string_view text, std::size_t n, Language language) {
  nlohmann::ordered_json j;
  j["text"] = std::string(text);
  j["n"] = n;
  j["language"] = std::string(to_string(language));
  return j.dump();
}

VictimPrediction parse_predict_response(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponse(std::string("predict response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("probs") || !j["probs"].is_array())
    throw MalformedResponse("predict response lacks a probs array");
  std::vector<double> probs;
  for (const auto& v : j["probs"]) {
    if (!v.is_number()) throw MalformedResponse("probs must be numbers");
    probs.push_back(v.get<double>());
  }
  return VictimPrediction::from_probs(std::move(probs));
}

std::vector<FillResult> parse_fill_response(std::string_view body, std::size_t masks, std::size_t n) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponse(std::string("fill response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("fills") || !j["fills"].is_array())
    throw MalformedResponse("fill response lacks a fills array");
  const auto& fills = j["fills"];
  if (fills.size() > std::max<std::size_t>(n, 1)) throw MalformedResponse("more candidates than requested");
  std::vector<FillResult> out;
  for (const auto& cand : fills) {
    if (!cand.is_array() || cand.size() != masks)
      throw MalformedResponse("each candidate needs one string per mask");
    FillResult r;
    for (const auto& s : cand) {
      if (!s.is_string()) throw MalformedResponse("fills must be strings");
      auto text = s.get<std::string>();
      if (text.find(kMask) != std::string::npos) throw MalformedResponse("fill contains a mask token");
      r.texts.push_back(std::move(text));
    }
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
  ~SlotGuard() { s_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<>& s_;
};

template <class Parse>
auto post_with_retries(const Endpoint& ep, const std::string& route, const std::string& body,
                       const HttpOptions& opt, std::counting_semaphore<>& slots, Parse parse)
    -> decltype(parse(std::string_view())) {
  httplib::Headers headers;
  if (const char* token = std::getenv(opt.bearer_token_env.c_str()); token && *token)
    headers.emplace("Authorization", std::string("Bearer ") + token);
  const std::string path = ep.base_path + route;

  std::string last_error;
  bool last_unavailable = true;
  for (int attempt = 0; attempt <= opt.retries; ++attempt) {
    httplib::Result res{nullptr, httplib::Error::Unknown};
    {
      SlotGuard hold(slots);
      httplib::Client cli(ep.origin);
      const auto ct = std::chrono::duration<double>(opt.connect_timeout_s);
      const auto rt = std::chrono::duration<double>(opt.read_timeout_s);
      cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(ct));
      cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(rt));
      res = cli.Post(path, headers, body, "application/json");
    }
    if (!res) {
      last_unavailable = true;
      last_error = "request to " + ep.origin + path + " failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 503) {
      last_unavailable = true;
      last_error = ep.origin + path + " answered 503";
      continue;
    }
    if (res->status != 200) {
      last_unavailable = false;
      last_error = ep.origin + path + " answered " + std::to_string(res->status);
      continue;
    }
    try {
      return parse(res->body);
    } catch (const MalformedResponse& e) {
      last_unavailable = false;
      last_error = e.what();
    }
  }
  if (last_unavailable) throw Unavailable(last_error);
  throw MalformedResponse(last_error);
}

}  // namespace

HttpVictim::HttpVictim(const std::string& url, Language language, HttpOptions options)
    : endpoint_(Endpoint::parse(url)),
      language_(language),
      options_(std::move(options)),
      slots_(std::make_unique<std::counting_semaphore<>>(std::max(1, options_.max_in_flight))) {}

HttpVictim::~HttpVictim() = default;

VictimPrediction HttpVictim::predict(std::string_view code, const std::optional<std::string>& context) {
  const auto body = predict_request_body(code, context, language_);
  return post_with_retries(endpoint_, "/predict", body, options_, *slots_,
                           [](std::string_view b) { return parse_predict_response(b); });
}

HttpFiller::HttpFiller(const std::string& url, Language language, HttpOptions options)
    : endpoint_(Endpoint::parse(url)),
      language_(language),
      options_(std::move(options)),
      slots_(std::make_unique<std::counting_semaphore<>>(std::max(1, options_.max_in_flight))) {}

HttpFiller::~HttpFiller() = default;

std::vector<FillResult> HttpFiller::fill(std::string_view text, std::size_t n, std::uint32_t) {
  const auto masks = count_masks(text);
  const auto body = fill_request_body(text, n, language_);
  return post_with_retries(endpoint_, "/fill", body, options_, *slots_,
                           [&](std::string_view b) { return parse_fill_response(b, masks, n); });
}

}  // namespace astveil
