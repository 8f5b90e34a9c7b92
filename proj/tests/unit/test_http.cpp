#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <thread>

#include "astveil/errors.hpp"
#include "astveil/http_clients.hpp"

using namespace astveil;

namespace {

// Replays canned answers and records what it was sent.
class StubServer {
 public:
  struct Answer {
    int status = 200;
    std::string body;
    std::chrono::milliseconds delay{0};
  };

  StubServer() {
    auto handle = [this](const httplib::Request& req, httplib::Response& res) {
      Answer a;
      {
        std::lock_guard<std::mutex> lock(mu_);
        bodies.push_back(req.body);
        paths.push_back(req.path);
        auth = req.get_header_value("Authorization");
        a = answer;
      }
      const int now = ++in_flight;
      int seen = max_in_flight.load();
      while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {
      }
      if (a.delay.count()) std::this_thread::sleep_for(a.delay);
      --in_flight;
      res.status = a.status;
      res.set_content(a.body, "application/json");
    };
    server_.Post("/v1/predict", handle);
    server_.Post("/v1/fill", handle);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  void reset(Answer a) {
    std::lock_guard<std::mutex> lock(mu_);
    answer = std::move(a);
    bodies.clear();
    paths.clear();
  }

  Answer answer;
  std::vector<std::string> bodies, paths;
  std::string auth;
  std::atomic<int> in_flight{0}, max_in_flight{0};

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mu_;
};

HttpOptions quick() {
  HttpOptions o;
  o.connect_timeout_s = 1.0;
  o.read_timeout_s = 5.0;
  return o;
}

}  // namespace

TEST_CASE("endpoint parsing") {
  const auto e = Endpoint::parse("http://localhost:8000/api/");
  CHECK(e.origin == "http://localhost:8000");
  CHECK(e.base_path == "/api");
  CHECK(Endpoint::parse("http://h:1").base_path.empty());
  CHECK_THROWS_AS(Endpoint::parse("localhost:8000"), ConfigError);
  CHECK_THROWS_AS(Endpoint::parse("ftp://h/x"), ConfigError);
}

TEST_CASE("request bodies have a fixed key order") {
  CHECK(predict_request_body("x = 1", std::nullopt, Language::python) ==
        R"({"code":"x = 1","context":null,"language":"python"})");
  CHECK(fill_request_body("a <MASK>", 2, Language::c) == R"({"text":"a <MASK>","n":2,"language":"c"})");
}

TEST_CASE("recorded protocol exchanges replay bit-exactly") {
  std::ifstream in(std::string(ASTVEIL_FIXTURES) + "/protocol_exchanges.json");
  REQUIRE(in);
  const auto doc = nlohmann::json::parse(in);
  const auto& exchanges = doc.at("exchanges");
  REQUIRE(exchanges.size() == 20);

  StubServer stub;
  for (const auto& ex : exchanges) {
    const auto name = ex.at("name").get<std::string>();
    CAPTURE(name);
    const auto request = ex.at("request").get<std::string>();
    const auto req = nlohmann::json::parse(request);
    const auto expect = ex.at("expect").get<std::string>();
    const auto route = ex.at("route").get<std::string>();
    stub.reset({ex.at("status").get<int>(), ex.at("response").get<std::string>()});

    const auto lang = language_from_string(req.at("language").get<std::string>());
    std::string outcome = "ok";
    try {
      if (route == "/predict") {
        HttpVictim victim(stub.url(), lang, quick());
        std::optional<std::string> ctx;
        if (!req.at("context").is_null()) ctx = req.at("context").get<std::string>();
        const auto p = victim.predict(req.at("code").get<std::string>(), ctx);
        CHECK(p.probs == nlohmann::json::parse(ex.at("response").get<std::string>()).at("probs").get<std::vector<double>>());
      } else {
        HttpFiller filler(stub.url(), lang, quick());
        const auto fills = filler.fill(req.at("text").get<std::string>(), req.at("n").get<std::size_t>());
        const auto want = nlohmann::json::parse(ex.at("response").get<std::string>()).at("fills");
        REQUIRE(fills.size() == want.size());
        for (std::size_t i = 0; i < fills.size(); ++i) CHECK(fills[i].texts == want[i].get<std::vector<std::string>>());
      }
    } catch (const Unavailable&) {
      outcome = "unavailable";
    } catch (const MalformedResponse&) {
      outcome = "malformed";
    }
    CHECK(outcome == expect);
    // One attempt when it worked, three (two retries) when it did not.
    REQUIRE(stub.bodies.size() == (expect == "ok" ? 1u : 3u));
    for (const auto& b : stub.bodies) CHECK(b == request);
    CHECK(stub.paths[0] == "/v1" + route);
  }
}

TEST_CASE("bearer token comes from the environment") {
  StubServer stub;
  stub.reset({200, R"({"probs":[1.0]})"});
  ::setenv(kBearerTokenEnv, "s3cret", 1);
  HttpVictim(stub.url(), Language::c, quick()).predict("x");
  CHECK(stub.auth == "Bearer s3cret");
  ::unsetenv(kBearerTokenEnv);
  HttpVictim(stub.url(), Language::c, quick()).predict("x");
  CHECK(stub.auth.empty());
}

TEST_CASE("unreachable endpoint is Unavailable") {
  HttpOptions o = quick();
  o.retries = 0;
  CHECK_THROWS_AS(HttpVictim("http://127.0.0.1:1", Language::c, o).predict("x"), Unavailable);
  CHECK_THROWS_AS(HttpFiller("http://127.0.0.1:1", Language::c, o).fill("<MASK>", 1), Unavailable);
}

TEST_CASE("at most four requests in flight per client") {
  StubServer stub;
  stub.reset({200, R"({"probs":[0.5,0.5]})", std::chrono::milliseconds(60)});
  HttpVictim victim(stub.url(), Language::c, quick());
  std::vector<std::thread> threads;
  for (int i = 0; i < 12; ++i) threads.emplace_back([&] { victim.predict("x"); });
  for (auto& t : threads) t.join();
  CHECK(stub.max_in_flight.load() <= 4);
  CHECK(stub.max_in_flight.load() >= 2);
  CHECK(stub.bodies.size() == 12);
}
