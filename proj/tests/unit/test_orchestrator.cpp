#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "astveil/errors.hpp"
#include "astveil/orchestrator.hpp"
#include "astveil/serialization.hpp"
#include "support/toy_corpus.hpp"

using namespace astveil;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("astveil_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

json base_config() {
  return json{{"language", "c"},
              {"corpus", "corpus"},
              {"output_dir", "out"},
              {"seed", 5},
              {"workers", 2},
              {"mining", {{"k", 4}, {"max_edges", 3}}},
              {"attack", {{"max_queries", 120}, {"record_elapsed", false}}}};
}

fs::path setup(const TempDir& dir, std::size_t n, const json& cfg = base_config()) {
  toy::write(toy::make(n, 21), dir.path / "corpus");
  const auto path = dir.path / "config.json";
  spit(path, cfg.dump(2));
  return path;
}

}  // namespace

TEST_CASE("config parsing and overrides") {
  const auto c = parse_config(base_config(), "/base");
  CHECK(c.language == Language::c);
  CHECK(c.corpus == fs::path("/base/corpus"));
  CHECK(c.output_dir == fs::path("/base/out"));
  CHECK(c.seed == 5);
  CHECK(c.workers == 2);
  CHECK(c.mining.k == 4);
  CHECK_FALSE(c.mining.min_support);
  CHECK(c.attack.max_queries == 120);
  CHECK(c.victim.kind == "surrogate");

  const auto o = parse_config(base_config(), "/base",
                              {"mining.k=7", "attack.paths=positive_tests", "output_dir=/abs",
                               "victim.kind=http", "victim.endpoint=http://127.0.0.1:9/v1", "augment.p=0.25"});
  CHECK(o.mining.k == 7);
  CHECK(o.attack.choose.paths == PathSet::positive_tests);
  CHECK(o.output_dir == fs::path("/abs"));
  CHECK(o.victim.kind == "http");
  CHECK(o.augment.p == 0.25);

  auto bad = [&](json doc, std::vector<std::string> ov = {}) {
    CHECK_THROWS_AS(parse_config(std::move(doc), "/base", ov), ConfigError);
  };
  bad(json::array());
  bad(json{{"corpus", "c"}});
  bad(json{{"language", "cobol"}, {"corpus", "c"}});
  bad(json{{"language", "c"}});
  bad(base_config(), {"mining.k"});
  bad(base_config(), {"mining.k=-1"});
  bad(base_config(), {"attack.max_queries=2.5"});
  bad(base_config(), {"workers=-2"});
  bad(base_config(), {"mining.k=\"many\""});
  bad(base_config(), {"mining.min_support=0"});
  bad(base_config(), {"mining.instance_index=5"});
  bad(base_config(), {"attack.paths=everywhere"});
  bad(base_config(), {"attack.target_class_policy=least_likely"});
  bad(base_config(), {"augment.p=1.5"});
  bad(base_config(), {"victim.kind=http"});
  bad(base_config(), {"victim.kind=telepathy"});
  bad(base_config(), {"language.x=1"});

  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("load_corpus warns and skips") {
  TempDir dir;
  const auto root = dir.path / "corpus";
  fs::create_directories(root);
  spit(root / "b.c", "int b;\n");
  spit(root / "a.c", "int a;\n");
  spit(root / "empty.c", "");
  spit(root / "index.jsonl",
       "{\"id\":\"b\",\"path\":\"b.c\",\"label\":1}\n"
       "{\"id\":\"gone\",\"path\":\"missing.c\"}\n"
       "\n"
       "{\"id\":\"e\",\"path\":\"empty.c\"}\n"
       "not json\n"
       "{\"id\":\"a\",\"path\":\"a.c\"}\n");
  std::vector<std::string> warnings;
  const auto entries = load_corpus(root, Language::c, [&](const std::string& w) { warnings.push_back(w); });
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].unit.id == "a");
  CHECK_FALSE(entries[0].unit.label_hint);
  CHECK(entries[1].unit.id == "b");
  CHECK(entries[1].unit.label_hint == 1);
  CHECK(entries[1].unit.text == "int b;\n");
  CHECK(warnings.size() == 3);

  spit(root / "index.jsonl", "{\"id\":\"a\",\"path\":\"a.c\"}\n{\"id\":\"a\",\"path\":\"b.c\"}\n");
  CHECK_THROWS_AS(load_corpus(root, Language::c), ConfigError);
  CHECK_THROWS_AS(load_corpus(dir.path / "nowhere", Language::c), ConfigError);
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(50, 3,
                               [](std::size_t i) {
                                 if (i == 17) throw FormatError("boom");
                               }),
                  FormatError);
  parallel_for(0, 4, [](std::size_t) { FAIL("called"); });
}

TEST_CASE("pipeline reruns are byte-identical and resume matches") {
  TempDir dir;
  const auto cfg_path = setup(dir, 24);
  const auto cfg = load_config(cfg_path);
  cmd_probe(cfg);
  cmd_mine(cfg);
  cmd_attack(cfg);
  const auto out = cfg.output_dir;
  const std::vector<std::string> files{"probe.jsonl", "patterns.json", "meta_model.json", "reports.jsonl",
                                       "summary.json"};
  std::vector<std::string> first;
  for (const auto& f : files) first.push_back(slurp(out / f));

  std::istringstream lines(first[3]);
  std::string line, prev;
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    const auto id = json::parse(line)["unit_id"].get<std::string>();
    CHECK(id > prev);
    prev = id;
    ++count;
  }
  CHECK(count == 24);
  const auto meta = load_meta(first[2]);
  const auto lib = build_library(load_patterns(first[1]));
  CHECK(meta.num_features == lib.patterns.size());

  fs::remove_all(out);
  cmd_probe(cfg);
  cmd_mine(cfg);
  cmd_attack(cfg);
  for (std::size_t i = 0; i < files.size(); ++i) CHECK_MESSAGE(slurp(out / files[i]) == first[i], files[i]);

  // Interrupted run: keep five whole lines and a torn sixth, then resume.
  std::istringstream again(first[3]);
  std::string partial;
  for (int i = 0; i < 5 && std::getline(again, line); ++i) partial += line + "\n";
  std::getline(again, line);
  partial += line.substr(0, line.size() / 2);
  spit(out / "reports.jsonl", partial);
  RunOptions resume;
  resume.resume = true;
  cmd_attack(cfg, resume);
  CHECK(slurp(out / "reports.jsonl") == first[3]);

  cmd_report(cfg);
  CHECK(slurp(out / "summary.json") == first[4]);

  RunOptions limited;
  limited.limit = 3;
  cmd_attack(cfg, limited);
  CHECK(json::parse(slurp(out / "summary.json"))["attempted"] == 3);
}

TEST_CASE("k = 0 yields a valid empty pattern file") {
  TempDir dir;
  auto cfg_json = base_config();
  cfg_json["mining"]["k"] = 0;
  const auto cfg = load_config(setup(dir, 10, cfg_json));
  cmd_probe(cfg);
  cmd_mine(cfg);
  const auto file = load_patterns(slurp(cfg.output_dir / "patterns.json"));
  for (const auto& s : file.sections) CHECK(s.set.patterns.empty());
  CHECK(load_meta(slurp(cfg.output_dir / "meta_model.json")).num_features == 0);
  cmd_attack(cfg);
  std::istringstream lines(slurp(cfg.output_dir / "reports.jsonl"));
  std::string line;
  while (std::getline(lines, line)) CHECK(json::parse(line)["outcome"] == "no_candidates");
}

TEST_CASE("empty report set summarizes to null") {
  TempDir dir;
  const auto cfg = load_config(setup(dir, 2));
  fs::create_directories(cfg.output_dir);
  spit(cfg.output_dir / "reports.jsonl", "");
  cmd_report(cfg);
  const auto s = json::parse(slurp(cfg.output_dir / "summary.json"));
  CHECK(s["attempted"] == 0);
  CHECK(s["asr"].is_null());
}

TEST_CASE("stage prerequisites are reported as config errors") {
  TempDir dir;
  const auto cfg = load_config(setup(dir, 4));
  CHECK_THROWS_AS(cmd_mine(cfg), ConfigError);
  CHECK_THROWS_AS(cmd_report(cfg), ConfigError);
}

TEST_CASE("augment writes a mirrored corpus and manifest") {
  TempDir dir;
  auto cfg_json = base_config();
  cfg_json["augment"] = {{"p", 1.0}, {"max_perturb", 2}};
  const auto cfg = load_config(setup(dir, 12, cfg_json));
  cmd_probe(cfg);
  cmd_mine(cfg);
  cmd_augment(cfg);
  const auto manifest = json::parse(slurp(cfg.output_dir / "augmented" / "manifest.json"));
  CHECK(manifest["p"] == 1.0);
  REQUIRE(manifest["units"].size() == 12);
  for (const auto& u : manifest["units"]) {
    CHECK(u["selected"] == true);
    CHECK(u["planned"].get<int>() <= 2);
    const auto text = slurp(cfg.output_dir / "augmented" / "src" / (u["id"].get<std::string>() + ".c"));
    CHECK_FALSE(text.empty());
    CHECK_FALSE(has_parse_error(parse_text(text, Language::c)));
  }
  CHECK(fs::exists(cfg.output_dir / "augmented" / "index.jsonl"));
  const auto before = slurp(cfg.output_dir / "augmented" / "manifest.json");
  cmd_augment(cfg);
  CHECK(slurp(cfg.output_dir / "augmented" / "manifest.json") == before);
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(Unavailable("x")) == 2);
  CHECK(exit_code_for(ConfigError("x")) == 1);
  CHECK(exit_code_for(FormatError("x")) == 1);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
}

#ifdef ASTVEIL_CLI
namespace {
int run_cli(const std::string& args) {
  const int status = std::system((std::string(ASTVEIL_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
}  // namespace

TEST_CASE("cli exit codes") {
  TempDir dir;
  const auto cfg = setup(dir, 6);
  const auto q = "\"" + cfg.string() + "\"";
  CHECK(run_cli("probe --config " + q + " -q") == 0);
  CHECK(run_cli("probe --config " + q + " --set language=cobol") == 1);
  CHECK(run_cli("probe --config /nonexistent.json") == 1);
  CHECK(run_cli("frobnicate --config " + q) == 1);
  CHECK(run_cli("probe --config " + q +
                " --set victim.kind=http --set victim.endpoint=http://127.0.0.1:1/v1") == 2);
  CHECK(run_cli("report --config " + q) == 1);
}
#endif
