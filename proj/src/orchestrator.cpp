#include "astveil/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "astveil/errors.hpp"
#include "astveil/http_clients.hpp"
#include "astveil/serialization.hpp"

namespace astveil {

namespace fs = std::filesystem;

namespace {

void apply_override(nlohmann::json& doc, const std::string& item) {
  const auto eq = item.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must be key=value: " + item);
  const std::string key = item.substr(0, eq);
  const std::string raw = item.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  nlohmann::json* at = &doc;
  std::size_t pos = 0;
  for (;;) {
    const auto dot = key.find('.', pos);
    const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (part.empty()) throw ConfigError("bad override key: " + key);
    if (at->is_null()) *at = nlohmann::json::object();
    if (!at->is_object()) throw ConfigError("override " + key + " descends into a non-object");
    at = &(*at)[part];
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  *at = std::move(value);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path out(p);
  return out.is_absolute() ? out : (base / out).lexically_normal();
}

ClientConfig client_from(const nlohmann::json& j, const fs::path& base) {
  ClientConfig c;
  if (j.is_null()) return c;
  c.kind = j.value("kind", std::string("surrogate"));
  if (c.kind != "surrogate" && c.kind != "http") throw ConfigError("client kind must be surrogate or http");
  c.endpoint = j.value("endpoint", std::string());
  if (c.kind == "http" && c.endpoint.empty()) throw ConfigError("http client needs an endpoint");
  if (j.contains("model") && !j["model"].is_null()) c.model = resolve(base, j["model"].get<std::string>());
  return c;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Written to a sibling temp file first so readers never see half a file.
void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  fs::rename(tmp, p);
}

void say(const RunOptions& o, const std::string& msg) {
  if (o.log) *o.log << "astveil: " << msg << "\n";
}

std::string hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 15];
  return s;
}

// Counts must be non-negative integers; json's own conversion would wrap -1.
template <class T>
T count_field(const nlohmann::json& obj, const char* section, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw ConfigError(std::string(section) + key + " must be a non-negative integer");
  return v.get<T>();
}

}  // namespace

Config parse_config(nlohmann::json doc, const fs::path& base_dir, const std::vector<std::string>& overrides) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& o : overrides) apply_override(doc, o);
  try {
    Config c;
    if (!doc.contains("language")) throw ConfigError("config needs a language");
    try {
      c.language = language_from_string(doc["language"].get<std::string>());
    } catch (const UnsupportedLanguage& e) {
      throw ConfigError(e.what());
    }
    if (!doc.contains("corpus")) throw ConfigError("config needs a corpus directory");
    c.corpus = resolve(base_dir, doc["corpus"].get<std::string>());
    c.output_dir = resolve(base_dir, doc.value("output_dir", std::string("out")));
    c.seed = count_field(doc, "", "seed", std::uint64_t{0});
    c.workers = std::max(1u, count_field(doc, "", "workers", 1u));
    c.require_label_match = doc.value("require_label_match", false);
    c.victim = client_from(doc.value("victim", nlohmann::json()), base_dir);
    c.filler = client_from(doc.value("filler", nlohmann::json()), base_dir);

    const auto mining = doc.value("mining", nlohmann::json::object());
    if (mining.contains("min_support") && !mining["min_support"].is_null()) {
      c.mining.min_support = count_field(mining, "mining.", "min_support", std::size_t{0});
      if (*c.mining.min_support == 0) throw ConfigError("mining.min_support must be at least 1");
    }
    c.mining.max_edges = count_field(mining, "mining.", "max_edges", c.mining.max_edges);
    c.mining.k = count_field(mining, "mining.", "k", c.mining.k);
    c.mining.max_nodes = count_field(mining, "mining.", "max_nodes", c.mining.max_nodes);
    c.mining.threads = c.workers;
    c.instance_index = count_field(mining, "mining.", "instance_index", std::size_t{0});
    if (c.instance_index >= 5) throw ConfigError("mining.instance_index must be below 5");

    const auto attack = doc.value("attack", nlohmann::json::object());
    auto& a = c.attack;
    a.max_queries = count_field(attack, "attack.", "max_queries", a.max_queries);
    a.timeout_s = attack.value("timeout_s", a.timeout_s);
    a.max_steps = count_field(attack, "attack.", "max_steps", a.max_steps);
    a.fill_retries = count_field(attack, "attack.", "fill_retries", a.fill_retries);
    a.token_limit = count_field(attack, "attack.", "token_limit", a.token_limit);
    a.fills_per_step = count_field(attack, "attack.", "fills_per_step", a.fills_per_step);
    a.record_elapsed = attack.value("record_elapsed", a.record_elapsed);
    a.choose.fallback = attack.value("fallback", a.choose.fallback);
    a.choose.temperature = attack.value("temperature", a.choose.temperature);
    const auto paths = attack.value("paths", std::string("routed"));
    if (paths == "routed") a.choose.paths = PathSet::routed;
    else if (paths == "positive_tests") a.choose.paths = PathSet::positive_tests;
    else throw ConfigError("attack.paths must be routed or positive_tests");
    // The attacked class is always the victim's own prediction on the input.
    if (attack.value("target_class_policy", std::string("original_prediction")) != "original_prediction")
      throw ConfigError("attack.target_class_policy must be original_prediction");
    if (a.timeout_s < 0 || a.choose.temperature < 0) throw ConfigError("attack limits must be non-negative");
    a.seed = c.seed;

    const auto augment = doc.value("augment", nlohmann::json::object());
    c.augment.p = augment.value("p", c.augment.p);
    c.augment.max_perturb = count_field(augment, "augment.", "max_perturb", c.augment.max_perturb);
    c.augment.fill_retries = c.attack.fill_retries;
    c.augment.seed = c.seed;
    if (c.augment.p < 0.0 || c.augment.p > 1.0) throw ConfigError("augment.p must lie in [0, 1]");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

Config load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(std::move(doc), path.has_parent_path() ? path.parent_path() : fs::path("."), overrides);
}

std::vector<CorpusEntry> load_corpus(const fs::path& dir, Language language,
                                     const std::function<void(const std::string&)>& warn) {
  const fs::path index = dir / "index.jsonl";
  if (!fs::exists(index)) throw ConfigError("corpus index not found: " + index.string());
  std::ifstream in(index);
  std::vector<CorpusEntry> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      CorpusEntry e;
      e.unit.id = j.at("id").get<std::string>();
      e.path = j.at("path").get<std::string>();
      e.unit.language = language;
      if (j.contains("label") && !j["label"].is_null()) e.unit.label_hint = j["label"].get<int>();
      std::ifstream src(dir / e.path, std::ios::binary);
      if (!src) {
        if (warn) warn("skipping " + e.unit.id + ": cannot read " + e.path);
        continue;
      }
      std::ostringstream ss;
      ss << src.rdbuf();
      e.unit.text = ss.str();
      if (e.unit.text.empty()) {
        if (warn) warn("skipping " + e.unit.id + ": empty file");
        continue;
      }
      if (!ids.insert(e.unit.id).second) throw ConfigError("duplicate corpus id " + e.unit.id);
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      if (warn) warn("index.jsonl line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  std::sort(out.begin(), out.end(), [](const CorpusEntry& a, const CorpusEntry& b) { return a.unit.id < b.unit.id; });
  return out;
}

std::vector<ProbeLine> load_probe(const fs::path& file) {
  if (!fs::exists(file)) throw ConfigError("missing " + file.string() + "; run probe first");
  std::ifstream in(file);
  std::vector<ProbeLine> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("unit_id").get<std::string>(), j.at("predicted_class").get<int>(),
                     j.at("probs").get<std::vector<double>>()});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(file.string() + ": " + e.what());
    }
  }
  return out;
}

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
  const unsigned threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex mu;
  auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::unique_ptr<Victim> make_victim(const Config& config, const std::vector<CorpusEntry>& corpus) {
  if (config.victim.kind == "http") return std::make_unique<HttpVictim>(config.victim.endpoint, config.language);
  if (!config.victim.model.empty()) {
    auto m = SurrogateVictim::from_json(read_file(config.victim.model));
    if (m.language() != config.language) throw ConfigError("surrogate victim was trained for another language");
    return std::make_unique<SurrogateVictim>(std::move(m));
  }
  std::vector<SourceUnit> units;
  std::vector<int> labels;
  for (const auto& e : corpus) {
    if (!e.unit.label_hint) continue;
    units.push_back(e.unit);
    labels.push_back(*e.unit.label_hint);
  }
  if (units.empty()) throw ConfigError("a surrogate victim needs labels in index.jsonl or a saved model");
  try {
    return std::make_unique<SurrogateVictim>(SurrogateVictim::train(units, labels, config.language));
  } catch (const DegenerateLabels& e) {
    throw ConfigError(std::string("surrogate victim: ") + e.what());
  }
}

std::unique_ptr<Filler> make_filler(const Config& config) {
  if (config.filler.kind == "http") return std::make_unique<HttpFiller>(config.filler.endpoint, config.language);
  return std::make_unique<SurrogateFiller>(config.language, config.seed);
}

namespace {

std::vector<CorpusEntry> corpus_for(const Config& config, const RunOptions& options) {
  return load_corpus(config.corpus, config.language, [&](const std::string& m) { say(options, m); });
}

// Parsed graphs keyed by unit id, reused while the text hash still matches.
std::map<std::string, AstGraph> load_graph_cache(const fs::path& file, const std::vector<CorpusEntry>& corpus) {
  std::map<std::string, AstGraph> out;
  if (!fs::exists(file)) return out;
  std::map<std::string, std::string> hashes;
  for (const auto& e : corpus) hashes[e.unit.id] = hex(fnv1a(e.unit.text));
  std::ifstream in(file);
  std::string line;
  while (std::getline(in, line)) {
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = j.at("unit_id").get<std::string>();
      auto h = hashes.find(id);
      if (h != hashes.end() && h->second == j.at("hash").get<std::string>()) out[id] = graph_from_json(j.at("graph"));
    } catch (const std::exception&) {
      // a stale or damaged cache line is just a miss
    }
  }
  return out;
}

}  // namespace

void cmd_probe(const Config& config, const RunOptions& options) {
  auto corpus = corpus_for(config, options);
  if (options.limit && corpus.size() > *options.limit) corpus.resize(*options.limit);
  auto victim = make_victim(config, corpus);
  if (auto* s = dynamic_cast<SurrogateVictim*>(victim.get()))
    write_file(config.output_dir / "surrogate_victim.json", s->to_json() + "\n");

  std::vector<std::optional<ProbeLine>> lines(corpus.size());
  std::vector<std::string> graphs(corpus.size());
  parallel_for(corpus.size(), config.workers, [&](std::size_t i) {
    const auto& u = corpus[i].unit;
    AstGraph g;
    try {
      g = parse_source(u);
    } catch (const NonUtf8Input&) {
      return;
    }
    const auto pred = victim->predict(u.text);
    lines[i] = ProbeLine{u.id, pred.predicted, pred.probs};
    nlohmann::ordered_json cj;
    cj["unit_id"] = u.id;
    cj["hash"] = hex(fnv1a(u.text));
    cj["graph"] = graph_to_json(g);
    graphs[i] = cj.dump();
  });

  std::string probe, cache;
  std::size_t written = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!lines[i]) {
      say(options, "skipping " + corpus[i].unit.id + ": not valid UTF-8");
      continue;
    }
    nlohmann::ordered_json j;
    j["unit_id"] = lines[i]->unit_id;
    j["predicted_class"] = lines[i]->predicted_class;
    j["probs"] = lines[i]->probs;
    probe += j.dump() + "\n";
    cache += graphs[i] + "\n";
    ++written;
  }
  write_file(config.output_dir / "probe.jsonl", probe);
  write_file(config.output_dir / "graphs.jsonl", cache);
  say(options, "probed " + std::to_string(written) + " units");
}

void cmd_mine(const Config& config, const RunOptions& options) {
  const auto corpus = corpus_for(config, options);
  const auto probe = load_probe(config.output_dir / "probe.jsonl");
  auto cache = load_graph_cache(config.output_dir / "graphs.jsonl", corpus);
  std::map<std::string, const CorpusEntry*> by_id;
  for (const auto& e : corpus) by_id[e.unit.id] = &e;

  ProbeCorpus pc;
  pc.num_classes = 0;
  for (const auto& line : probe) {
    auto it = by_id.find(line.unit_id);
    if (it == by_id.end()) {
      say(options, "probe record " + line.unit_id + " has no corpus entry; ignored");
      continue;
    }
    pc.num_classes = std::max(pc.num_classes, static_cast<int>(line.probs.size()));
    auto cached = cache.find(line.unit_id);
    AstGraph g = cached != cache.end() ? std::move(cached->second) : parse_source(it->second->unit);
    pc.records.push_back({it->second->unit, std::move(g), line.predicted_class});
  }
  std::sort(pc.records.begin(), pc.records.end(),
            [](const ProbeRecord& a, const ProbeRecord& b) { return a.unit.id < b.unit.id; });

  const auto ova = build_ova_datasets(pc);
  for (const auto& w : ova.warnings) say(options, w);

  PatternFile file;
  file.language = config.language;
  std::map<std::string, std::optional<MaskedTemplate>> templates;  // by canonical code
  auto template_for = [&](const Pattern& p) -> const std::optional<MaskedTemplate>& {
    auto it = templates.find(p.canonical_code);
    if (it != templates.end()) return it->second;
    std::optional<MaskedTemplate> t;
    try {
      auto raw = pattern_to_template(p, pc, config.instance_index);
      if (insertable(apply_semantics_guard(raw))) t = std::move(raw);
    } catch (const NoInstanceFound&) {
      if (config.instance_index > 0) {
        auto raw = pattern_to_template(p, pc, 0);
        if (insertable(apply_semantics_guard(raw))) t = std::move(raw);
      }
    }
    return templates.emplace(p.canonical_code, std::move(t)).first->second;
  };

  for (const auto& d : ova.datasets) {
    PatternSection sec;
    sec.set = mine_class(d, config.language, config.mining,
                         [&](const Pattern& p) { return template_for(p).has_value(); });
    for (const auto& p : sec.set.patterns) {
      MaskedTemplate t = *template_for(p);
      t.pattern_id = p.id;
      sec.templates.push_back(std::move(t));
    }
    say(options, "class " + std::to_string(d.target_class) + ": " + std::to_string(sec.set.patterns.size()) +
                     " patterns, q = " + std::to_string(sec.set.quality));
    file.sections.push_back(std::move(sec));
  }
  const std::string patterns_text = dump_patterns(file);
  write_file(config.output_dir / "patterns.json", patterns_text);

  const PatternLibrary lib = build_library(file);
  std::vector<FeatureVector> features(pc.records.size());
  std::vector<int> labels;
  parallel_for(pc.records.size(), config.workers,
               [&](std::size_t i) { features[i] = featurize(pc.records[i].graph, lib.patterns); });
  for (const auto& r : pc.records) labels.push_back(r.predicted_class);
  if (features.empty()) throw ConfigError("no probe records to train the meta-model on");
  MetaModel meta = train_meta(features, labels, {}, pc.num_classes);
  meta.pattern_set_id = hex(fnv1a(patterns_text));
  write_file(config.output_dir / "meta_model.json", dump_meta(meta));
}

void cmd_attack(const Config& config, const RunOptions& options) {
  const std::string patterns_text = read_file(config.output_dir / "patterns.json");
  const PatternLibrary lib = build_library(load_patterns(patterns_text));
  const MetaModel meta = load_meta(read_file(config.output_dir / "meta_model.json"));
  if (meta.num_features != lib.patterns.size())
    throw FormatError("meta_model.json does not match patterns.json; rerun mine");
  if (lib.language != config.language) throw ConfigError("patterns.json was mined for another language");

  auto corpus = corpus_for(config, options);
  if (config.require_label_match) {
    std::map<std::string, int> predicted;
    const auto probe_file = config.output_dir / "probe.jsonl";
    if (fs::exists(probe_file))
      for (const auto& p : load_probe(probe_file)) predicted[p.unit_id] = p.predicted_class;
    std::erase_if(corpus, [&](const CorpusEntry& e) {
      auto it = predicted.find(e.unit.id);
      return !e.unit.label_hint || it == predicted.end() || it->second != *e.unit.label_hint;
    });
  }

  const fs::path reports_file = config.output_dir / "reports.jsonl";
  std::map<std::string, AttackReport> done;
  if (options.resume && fs::exists(reports_file)) {
    std::ifstream in(reports_file);
    std::string line;
    while (std::getline(in, line)) {
      try {
        auto r = report_from_json(nlohmann::json::parse(line));
        done[r.unit_id] = std::move(r);
      } catch (const std::exception&) {
        // a torn last line from an interrupted run is simply redone
      }
    }
  }
  std::vector<const CorpusEntry*> todo;
  for (const auto& e : corpus)
    if (!done.count(e.unit.id)) todo.push_back(&e);
  if (options.limit && todo.size() > *options.limit) todo.resize(*options.limit);

  std::vector<AttackReport> fresh(todo.size());
  if (!todo.empty()) {
    auto victim = make_victim(config, corpus);
    auto filler = make_filler(config);
    parallel_for(todo.size(), config.workers, [&](std::size_t i) {
      fresh[i] = attack(todo[i]->unit, *victim, *filler, lib, meta, config.attack);
    });
  }
  for (auto& r : fresh) done[r.unit_id] = std::move(r);

  std::vector<AttackReport> all;
  std::string out;
  for (auto& [id, r] : done) {
    out += report_line(r) + "\n";
    all.push_back(r);
  }
  write_file(reports_file, out);
  write_file(config.output_dir / "summary.json", dump_summary(summarize(all), pattern_frequency(all)));
  const auto s = summarize(all);
  say(options, "attacked " + std::to_string(todo.size()) + " units, " + std::to_string(s.successes) + "/" +
                   std::to_string(s.attempted) + " successful overall");
}

void cmd_augment(const Config& config, const RunOptions& options) {
  const PatternLibrary lib = build_library(load_patterns(read_file(config.output_dir / "patterns.json")));
  auto corpus = corpus_for(config, options);
  if (options.limit && corpus.size() > *options.limit) corpus.resize(*options.limit);
  auto filler = make_filler(config);

  std::vector<AugmentResult> results(corpus.size());
  parallel_for(corpus.size(), config.workers, [&](std::size_t i) {
    results[i] = augment_corpus({corpus[i].unit}, lib, *filler, config.augment);
  });

  const fs::path root = config.output_dir / "augmented";
  std::string index;
  nlohmann::ordered_json manifest;
  manifest["seed"] = config.augment.seed;
  manifest["p"] = config.augment.p;
  manifest["max_perturb"] = config.augment.max_perturb;
  nlohmann::ordered_json units = nlohmann::ordered_json::array();
  std::size_t perturbed = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& unit = results[i].units[0];
    const auto& rec = results[i].manifest[0];
    write_file(root / corpus[i].path, unit.text);
    nlohmann::ordered_json line;
    line["id"] = unit.id;
    line["path"] = corpus[i].path;
    if (unit.label_hint) line["label"] = *unit.label_hint;
    index += line.dump() + "\n";
    nlohmann::ordered_json m;
    m["id"] = unit.id;
    m["selected"] = rec.selected;
    m["planned"] = rec.planned;
    m["perturbed"] = rec.insertions > 0;
    m["insertions"] = rec.insertions;
    m["pattern_ids"] = rec.pattern_ids;
    units.push_back(std::move(m));
    perturbed += rec.insertions > 0;
  }
  manifest["units"] = std::move(units);
  write_file(root / "index.jsonl", index);
  write_file(root / "manifest.json", manifest.dump(2) + "\n");
  say(options, "perturbed " + std::to_string(perturbed) + " of " + std::to_string(corpus.size()) + " units");
}

void cmd_report(const Config& config, const RunOptions& options) {
  const fs::path reports_file = config.output_dir / "reports.jsonl";
  if (!fs::exists(reports_file)) throw ConfigError("missing " + reports_file.string() + "; run attack first");
  std::vector<AttackReport> all;
  std::ifstream in(reports_file);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      all.push_back(report_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(reports_file.string() + ": " + e.what());
    }
  }
  const std::string summary = dump_summary(summarize(all), pattern_frequency(all));
  write_file(config.output_dir / "summary.json", summary);
  say(options, "summarized " + std::to_string(all.size()) + " reports");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const Unavailable*>(&e)) return 2;
  return 1;
}

}  // namespace astveil
