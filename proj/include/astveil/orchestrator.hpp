#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "astveil/clients.hpp"
#include "astveil/engine.hpp"
#include "astveil/miner.hpp"

namespace astveil {

struct ClientConfig {
  std::string kind = "surrogate";  // surrogate | http
  std::string endpoint;
  std::filesystem::path model;     // optional saved surrogate victim
};

struct Config {
  Language language = Language::c;
  std::filesystem::path corpus;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  bool require_label_match = false;
  ClientConfig victim;
  ClientConfig filler;
  MiningParams mining;
  std::size_t instance_index = 0;
  AttackConfig attack;
  AugmentConfig augment;
};

// Reads a JSON config; `overrides` are "dotted.key=value" strings applied
// before validation (value parsed as JSON, else taken as a string). Relative
// paths resolve against the config file's directory. Throws ConfigError.
Config load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
Config parse_config(nlohmann::json doc, const std::filesystem::path& base_dir,
                    const std::vector<std::string>& overrides = {});

struct CorpusEntry {
  SourceUnit unit;
  std::string path;  // as written in index.jsonl
};

// index.jsonl lines {id, path, label?}; unreadable entries are reported
// through `warn` and skipped. Entries come back sorted by id.
std::vector<CorpusEntry> load_corpus(const std::filesystem::path& dir, Language language,
                                     const std::function<void(const std::string&)>& warn = {});

struct ProbeLine {
  std::string unit_id;
  int predicted_class = 0;
  std::vector<double> probs;
};

std::vector<ProbeLine> load_probe(const std::filesystem::path& file);

struct RunOptions {
  std::optional<std::size_t> limit;
  bool resume = false;
  std::ostream* log = nullptr;  // warnings and progress; nullptr = silent
};

std::unique_ptr<Victim> make_victim(const Config& config, const std::vector<CorpusEntry>& corpus);
std::unique_ptr<Filler> make_filler(const Config& config);

void cmd_probe(const Config& config, const RunOptions& options = {});
void cmd_mine(const Config& config, const RunOptions& options = {});
void cmd_attack(const Config& config, const RunOptions& options = {});
void cmd_augment(const Config& config, const RunOptions& options = {});
void cmd_report(const Config& config, const RunOptions& options = {});

// 0 ok, 1 configuration or input error, 2 client unavailable.
int exit_code_for(const std::exception& e);

// Runs fn(i) for i in [0, n) on `workers` threads; rethrows the first error.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

}  // namespace astveil
