#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "astveil/errors.hpp"
#include "astveil/orchestrator.hpp"

namespace {

int run(const std::string& command, const std::string& config_path, const std::vector<std::string>& overrides,
        const astveil::RunOptions& options) {
  try {
    const auto config = astveil::load_config(config_path, overrides);
    if (command == "probe") astveil::cmd_probe(config, options);
    else if (command == "mine") astveil::cmd_mine(config, options);
    else if (command == "attack") astveil::cmd_attack(config, options);
    else if (command == "augment") astveil::cmd_augment(config, options);
    else {
      astveil::cmd_report(config, options);
      std::ifstream in(config.output_dir / "summary.json");
      std::cout << in.rdbuf();
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "astveil " << command << ": " << e.what() << "\n";
    return astveil::exit_code_for(e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pattern-guided adversarial insertions for source-code classifiers"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::size_t> limit;
  bool resume = false;
  bool quiet = false;
  bool require_label_match = false;

  const char* commands[][2] = {
      {"probe", "query the victim on every corpus unit"},
      {"mine", "mine discriminative patterns and train the meta-model"},
      {"attack", "run the query-budgeted attack on the corpus"},
      {"augment", "write a randomly perturbed copy of the corpus"},
      {"report", "recompute summary.json from reports.jsonl"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "override a config field, e.g. attack.max_queries=300");
    sub->add_option("--limit", limit, "process at most this many units");
    sub->add_flag("--resume", resume, "keep reports already written and attack the rest");
    sub->add_flag("--require-label-match", require_label_match, "attack only units whose label the victim predicts");
    sub->add_flag("-q,--quiet", quiet, "no progress output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  astveil::RunOptions options;
  options.limit = limit;
  options.resume = resume;
  options.log = quiet ? nullptr : &std::cerr;
  if (require_label_match) overrides.push_back("require_label_match=true");
  return run(app.get_subcommands().front()->get_name(), config_path, overrides, options);
}
