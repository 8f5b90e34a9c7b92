#include "astveil/serialization.hpp"

#include <set>

#include "astveil/errors.hpp"

namespace astveil {

using ojson = nlohmann::ordered_json;

namespace {

template <class F>
auto guarded_parse(std::string_view what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string(what) + ": " + e.what());
  } catch (const UnsupportedLanguage& e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

ojson span_json(const Span& s) { return ojson::array({s.start, s.end}); }

Span span_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw FormatError("span must be [start, end]");
  return {j[0].get<std::uint32_t>(), j[1].get<std::uint32_t>()};
}

ojson template_json(const MaskedTemplate& t) {
  ojson j;
  j["text"] = t.text;
  j["guard_kind"] = std::string(to_string(t.guard_kind));
  j["condition_span"] = t.condition_span ? span_json(*t.condition_span) : ojson(nullptr);
  return j;
}

MaskedTemplate template_from(const nlohmann::json& j, const std::string& pattern_id, Language language) {
  MaskedTemplate t;
  t.pattern_id = pattern_id;
  t.language = language;
  t.text = j.at("text").get<std::string>();
  t.guard_kind = guard_kind_from_string(j.at("guard_kind").get<std::string>());
  if (!j.at("condition_span").is_null()) t.condition_span = span_from(j["condition_span"]);
  return t;
}

}  // namespace

std::string dump_patterns(const PatternFile& file) {
  ojson doc;
  doc["version"] = file.version;
  doc["language"] = std::string(to_string(file.language));
  ojson sets = ojson::array();
  for (const auto& sec : file.sections) {
    ojson s;
    s["target_class"] = sec.set.target_class;
    s["quality"] = sec.set.quality;
    ojson pats = ojson::array();
    for (std::size_t i = 0; i < sec.set.patterns.size(); ++i) {
      const auto& p = sec.set.patterns[i];
      ojson pj;
      pj["id"] = p.id;
      pj["canonical_code"] = p.canonical_code;
      ojson nodes = ojson::array();
      for (const auto& n : p.nodes) nodes.push_back(ojson::array({n.local_id, n.kind}));
      pj["nodes"] = std::move(nodes);
      ojson edges = ojson::array();
      for (const auto& e : p.edges) edges.push_back(ojson::array({e.parent, e.child, e.label}));
      pj["edges"] = std::move(edges);
      pj["template"] = i < sec.templates.size() ? template_json(sec.templates[i]) : ojson(nullptr);
      pats.push_back(std::move(pj));
    }
    s["patterns"] = std::move(pats);
    sets.push_back(std::move(s));
  }
  doc["pattern_sets"] = std::move(sets);
  return doc.dump(2) + "\n";
}

PatternFile load_patterns(std::string_view text) {
  return guarded_parse("patterns.json", [&] {
    const auto doc = nlohmann::json::parse(text);
    PatternFile f;
    f.version = doc.at("version").get<int>();
    if (f.version != kFormatVersion) throw FormatError("unsupported patterns.json version");
    f.language = language_from_string(doc.at("language").get<std::string>());
    for (const auto& s : doc.at("pattern_sets")) {
      PatternSection sec;
      sec.set.target_class = s.at("target_class").get<int>();
      sec.set.quality = s.at("quality").get<std::int64_t>();
      for (const auto& pj : s.at("patterns")) {
        Pattern p;
        p.id = pj.at("id").get<std::string>();
        p.canonical_code = pj.at("canonical_code").get<std::string>();
        for (const auto& n : pj.at("nodes")) p.nodes.push_back({n.at(0).get<int>(), n.at(1).get<std::string>()});
        for (const auto& e : pj.at("edges"))
          p.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<std::string>()});
        if (canonical_dfs_code(p) != p.canonical_code)
          throw FormatError("pattern " + p.id + ": canonical_code does not match its nodes and edges");
        if (!pj.at("template").is_null()) sec.templates.push_back(template_from(pj["template"], p.id, f.language));
        sec.set.patterns.push_back(std::move(p));
      }
      if (!sec.templates.empty() && sec.templates.size() != sec.set.patterns.size())
        throw FormatError("templates must be present for all patterns of a set or for none");
      f.sections.push_back(std::move(sec));
    }
    return f;
  });
}

namespace {

ojson meta_node_json(const MetaModel& m, int at) {
  const auto& nd = m.nodes.at(at);
  ojson j;
  if (nd.is_leaf()) {
    ojson leaf;
    leaf["class"] = nd.leaf_class;
    leaf["support"] = nd.support;
    leaf["counts"] = nd.counts;
    j["leaf"] = std::move(leaf);
  } else {
    j["split"] = nd.split;
    j["absent"] = meta_node_json(m, nd.absent);
    j["present"] = meta_node_json(m, nd.present);
  }
  return j;
}

int meta_node_from(const nlohmann::json& j, MetaModel& m) {
  const int id = static_cast<int>(m.nodes.size());
  m.nodes.emplace_back();
  if (j.contains("leaf")) {
    const auto& l = j["leaf"];
    m.nodes[id].leaf_class = l.at("class").get<int>();
    m.nodes[id].support = l.at("support").get<std::int64_t>();
    m.nodes[id].counts = l.at("counts").get<std::vector<std::int64_t>>();
    return id;
  }
  const int split = j.at("split").get<int>();
  const int a = meta_node_from(j.at("absent"), m);
  const int p = meta_node_from(j.at("present"), m);
  m.nodes[id].split = split;
  m.nodes[id].absent = a;
  m.nodes[id].present = p;
  return id;
}

}  // namespace

std::string dump_meta(const MetaModel& meta) {
  ojson doc;
  doc["version"] = kFormatVersion;
  doc["pattern_set_id"] = meta.pattern_set_id;
  doc["n"] = meta.n;
  doc["num_features"] = meta.num_features;
  doc["num_classes"] = meta.num_classes;
  doc["presence_by_class"] = meta.presence_by_class;
  doc["tree"] = meta.nodes.empty() ? ojson(nullptr) : meta_node_json(meta, 0);
  return doc.dump(2) + "\n";
}

MetaModel load_meta(std::string_view text) {
  return guarded_parse("meta_model.json", [&] {
    const auto doc = nlohmann::json::parse(text);
    MetaModel m;
    m.pattern_set_id = doc.at("pattern_set_id").get<std::string>();
    m.n = doc.at("n").get<std::int64_t>();
    m.num_features = doc.at("num_features").get<std::size_t>();
    m.num_classes = doc.at("num_classes").get<int>();
    m.presence_by_class = doc.at("presence_by_class").get<std::vector<std::vector<std::int64_t>>>();
    if (!doc.at("tree").is_null()) meta_node_from(doc["tree"], m);
    std::int64_t total = 0;
    for (const auto& nd : m.nodes) {
      if (nd.is_leaf()) total += nd.support;
      else if (nd.split < 0 || static_cast<std::size_t>(nd.split) >= m.num_features)
        throw FormatError("meta_model.json: split index out of range");
    }
    if (!m.nodes.empty() && total != m.n) throw FormatError("meta_model.json: leaf supports do not sum to n");
    return m;
  });
}

ojson report_to_json(const AttackReport& r) {
  ojson j;
  j["unit_id"] = r.unit_id;
  j["outcome"] = std::string(to_string(r.outcome));
  j["original_class"] = r.original_class < 0 ? ojson(nullptr) : ojson(r.original_class);
  j["final_class"] = r.final_class < 0 ? ojson(nullptr) : ojson(r.final_class);
  j["original_confidence"] = r.original_confidence;
  j["queries_used"] = r.queries_used;
  j["elapsed_s"] = r.elapsed_s ? ojson(*r.elapsed_s) : ojson(nullptr);
  ojson edits = ojson::array();
  for (const auto& e : r.edits) {
    ojson ej;
    ej["step"] = e.step;
    ej["statement_span"] = span_json(e.statement_span);
    ej["pattern_id"] = e.pattern_id;
    ej["inserted_text"] = e.inserted_text;
    ej["insertion_span"] = span_json(e.insertion_span);
    ej["confidence"] = e.confidence;
    edits.push_back(std::move(ej));
  }
  j["edits"] = std::move(edits);
  j["n_i"] = r.n_i;
  j["n_t"] = r.n_t;
  j["change_rate"] = r.change_rate;
  j["adversarial_code"] = r.adversarial_code;
  return j;
}

AttackReport report_from_json(const nlohmann::json& j) {
  return guarded_parse("report", [&] {
    AttackReport r;
    r.unit_id = j.at("unit_id").get<std::string>();
    r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    r.original_class = j.at("original_class").is_null() ? -1 : j["original_class"].get<int>();
    r.final_class = j.at("final_class").is_null() ? -1 : j["final_class"].get<int>();
    r.original_confidence = j.at("original_confidence").get<double>();
    r.queries_used = j.at("queries_used").get<std::size_t>();
    if (!j.at("elapsed_s").is_null()) r.elapsed_s = j["elapsed_s"].get<double>();
    for (const auto& ej : j.at("edits")) {
      Edit e;
      e.step = ej.at("step").get<std::size_t>();
      e.statement_span = span_from(ej.at("statement_span"));
      e.pattern_id = ej.at("pattern_id").get<std::string>();
      e.inserted_text = ej.at("inserted_text").get<std::string>();
      e.insertion_span = span_from(ej.at("insertion_span"));
      e.confidence = ej.at("confidence").get<double>();
      r.edits.push_back(std::move(e));
    }
    r.n_i = j.at("n_i").get<std::size_t>();
    r.n_t = j.at("n_t").get<std::size_t>();
    r.change_rate = j.at("change_rate").get<double>();
    r.adversarial_code = j.at("adversarial_code").get<std::string>();
    return r;
  });
}

std::string report_line(const AttackReport& report) { return report_to_json(report).dump(); }

std::string dump_summary(const MetricsSummary& s, const std::vector<std::pair<std::string, double>>& frequency) {
  auto opt = [](const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); };
  ojson doc;
  doc["attempted"] = s.attempted;
  doc["successes"] = s.successes;
  doc["asr"] = opt(s.asr);
  doc["mu_tc"] = opt(s.mu_tc);
  doc["sigma_tc"] = opt(s.sigma_tc);
  doc["mu_tcr"] = opt(s.mu_tcr);
  doc["sigma_tcr"] = opt(s.sigma_tcr);
  ojson freq = ojson::array();
  for (const auto& [id, f] : frequency) {
    ojson e;
    e["pattern_id"] = id;
    e["frequency"] = f;
    freq.push_back(std::move(e));
  }
  doc["pattern_frequency"] = std::move(freq);
  return doc.dump(2) + "\n";
}

ojson graph_to_json(const AstGraph& g) {
  ojson j;
  j["root"] = g.root();
  ojson nodes = ojson::array();
  for (const auto& n : g.nodes()) {
    int flags = (n.named ? 1 : 0) | (n.error ? 2 : 0) | (n.missing ? 4 : 0);
    nodes.push_back(ojson::array({n.kind, n.span.start, n.span.end, flags}));
  }
  j["nodes"] = std::move(nodes);
  ojson edges = ojson::array();
  for (const auto& e : g.edges()) edges.push_back(ojson::array({e.parent, e.child, e.label}));
  j["edges"] = std::move(edges);
  return j;
}

AstGraph graph_from_json(const nlohmann::json& j) {
  return guarded_parse("graph", [&] {
    std::vector<AstNode> nodes;
    for (const auto& n : j.at("nodes")) {
      AstNode a;
      a.kind = n.at(0).get<std::string>();
      a.span = {n.at(1).get<std::uint32_t>(), n.at(2).get<std::uint32_t>()};
      const int flags = n.at(3).get<int>();
      a.named = flags & 1;
      a.error = flags & 2;
      a.missing = flags & 4;
      nodes.push_back(std::move(a));
    }
    std::vector<AstEdge> edges;
    for (const auto& e : j.at("edges"))
      edges.push_back({e.at(0).get<NodeId>(), e.at(1).get<NodeId>(), e.at(2).get<std::string>()});
    try {
      return AstGraph(std::move(nodes), std::move(edges), j.at("root").get<NodeId>());
    } catch (const MalformedGraph& e) {
      throw FormatError(std::string("graph: ") + e.what());
    }
  });
}

PatternLibrary build_library(const PatternFile& file) {
  PatternLibrary lib;
  lib.language = file.language;
  std::set<std::string> seen;
  for (const auto& sec : file.sections) {
    for (std::size_t i = 0; i < sec.set.patterns.size(); ++i) {
      const auto& p = sec.set.patterns[i];
      if (!seen.insert(p.canonical_code).second) continue;
      if (i >= sec.templates.size()) throw FormatError("pattern " + p.id + " has no template");
      lib.patterns.push_back(p);
      lib.templates.push_back(apply_semantics_guard(sec.templates[i]));
    }
  }
  return lib;
}

}  // namespace astveil
