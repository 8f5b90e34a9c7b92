#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "astveil/clients.hpp"
#include "astveil/code_graph.hpp"
#include "astveil/errors.hpp"
#include "astveil/miner.hpp"
#include "astveil/orchestrator.hpp"
#include "astveil/serialization.hpp"
#include "astveil/synthesis.hpp"

namespace py = pybind11;
using namespace astveil;

namespace {

int run_command(const std::string& command, const std::string& config_path,
                const std::vector<std::string>& overrides, std::optional<std::size_t> limit, bool resume) {
  const auto config = load_config(config_path, overrides);
  RunOptions options;
  options.limit = limit;
  options.resume = resume;
  py::gil_scoped_release release;
  if (command == "probe") cmd_probe(config, options);
  else if (command == "mine") cmd_mine(config, options);
  else if (command == "attack") cmd_attack(config, options);
  else if (command == "augment") cmd_augment(config, options);
  else if (command == "report") cmd_report(config, options);
  else throw ConfigError("unknown command " + command);
  return 0;
}

std::pair<int, std::vector<double>> predict(SurrogateVictim& v, const std::string& code) {
  auto p = v.predict(code);
  return {p.predicted, p.probs};
}

}  // namespace

PYBIND11_MODULE(_astveil, m) {
  m.doc() = "Pattern-guided adversarial insertions for source-code classifiers";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<Unavailable>(m, "Unavailable", error.ptr());
  py::register_exception<FormatError>(m, "FormatError", error.ptr());
  py::register_exception<NonUtf8Input>(m, "NonUtf8Input", error.ptr());
  py::register_exception<UnsupportedLanguage>(m, "UnsupportedLanguage", error.ptr());

  m.def("run", &run_command, py::arg("command"), py::arg("config"), py::arg("overrides") = std::vector<std::string>{},
        py::arg("limit") = std::nullopt, py::arg("resume") = false,
        "Run one pipeline command; raises on failure.");

  m.def(
      "parse",
      [](const std::string& text, const std::string& language) {
        return graph_to_json(parse_text(text, language_from_string(language))).dump();
      },
      py::arg("text"), py::arg("language"), "Parse source text; returns the graph as a JSON string.");
  m.def(
      "sexp",
      [](const std::string& text, const std::string& language) {
        return to_sexp(parse_text(text, language_from_string(language)));
      },
      py::arg("text"), py::arg("language"));
  m.def(
      "has_parse_error",
      [](const std::string& text, const std::string& language) {
        return has_parse_error(parse_text(text, language_from_string(language)));
      },
      py::arg("text"), py::arg("language"));
  m.def(
      "count_tokens",
      [](const std::string& text, const std::string& language) {
        const auto lang = language_from_string(language);
        return count_tokens(parse_text(text, lang), lang);
      },
      py::arg("text"), py::arg("language"));

  m.def("count_masks", [](const std::string& t) { return count_masks(t); }, py::arg("text"));
  m.def("replace_masks", [](const std::string& t, const std::vector<std::string>& f) { return replace_masks(t, f); },
        py::arg("text"), py::arg("fills"));

  m.def(
      "cork_term",
      [](std::int64_t neg_without, std::int64_t pos_without, std::int64_t neg_with, std::int64_t pos_with) {
        Correspondence c;
        c.negatives_without = neg_without;
        c.positives_without = pos_without;
        c.negatives_with = neg_with;
        c.positives_with = pos_with;
        return c.term();
      },
      py::arg("neg_without"), py::arg("pos_without"), py::arg("neg_with"), py::arg("pos_with"));

  py::class_<SurrogateVictim>(m, "SurrogateVictim")
      .def_static(
          "train",
          [](const std::vector<std::string>& texts, const std::vector<int>& labels, const std::string& language) {
            const auto lang = language_from_string(language);
            std::vector<SourceUnit> units;
            for (std::size_t i = 0; i < texts.size(); ++i) units.push_back({"u" + std::to_string(i), lang, texts[i], {}});
            return SurrogateVictim::train(units, labels, lang);
          },
          py::arg("texts"), py::arg("labels"), py::arg("language"))
      .def_static("from_json", [](const std::string& s) { return SurrogateVictim::from_json(s); })
      .def("to_json", &SurrogateVictim::to_json)
      .def("predict", &predict, py::arg("code"))
      .def_property_readonly("num_classes", &SurrogateVictim::num_classes);

  py::class_<SurrogateFiller>(m, "SurrogateFiller")
      .def(py::init([](const std::string& language, std::uint64_t seed) {
             return SurrogateFiller(language_from_string(language), seed);
           }),
           py::arg("language"), py::arg("seed") = 0)
      .def(
          "fill",
          [](SurrogateFiller& f, const std::string& text, std::size_t n, std::uint32_t attempt) {
            std::vector<std::vector<std::string>> out;
            for (auto& r : f.fill(text, n, attempt)) out.push_back(std::move(r.texts));
            return out;
          },
          py::arg("text"), py::arg("n") = 1, py::arg("attempt") = 0);
}
