#pragma once

// Generated C programs whose class is decided by one construct: class 1
// functions loop with `while`, class 0 functions loop with `for`.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "astveil/code_graph.hpp"

namespace toy {

inline std::string program(std::size_t index, int cls, std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const char* vars[] = {"a", "b", "total", "count", "limit", "step"};
  auto var = [&] { return std::string(vars[pick(0, 5)]); };
  std::vector<std::string> filler = {
      "    total = total + " + var() + " * " + std::to_string(pick(1, 9)) + ";\n",
      "    if (" + var() + " > " + std::to_string(pick(0, 20)) + ") {\n        count = count - 1;\n    }\n",
      "    " + var() + " = " + var() + " + " + std::to_string(pick(1, 5)) + ";\n",
      "    printf(\"%d\\n\", " + var() + ");\n",
      "    step = limit / " + std::to_string(pick(2, 7)) + ";\n",
  };
  std::string loop = cls == 1
                         ? "    while (count < limit) {\n        total = total + count;\n        count = count + 1;\n    }\n"
                         : "    for (int i = 0; i < limit; i++) {\n        total = total + i;\n    }\n";
  std::string body;
  const int before = pick(1, 3), after = pick(1, 3);
  for (int i = 0; i < before; ++i) body += filler[pick(0, static_cast<int>(filler.size()) - 1)];
  body += loop;
  for (int i = 0; i < after; ++i) body += filler[pick(0, static_cast<int>(filler.size()) - 1)];
  return "#include <stdio.h>\n\nint f" + std::to_string(index) +
         "(int a, int b) {\n    int total = 0;\n    int count = a;\n    int limit = b;\n    int step = 1;\n" + body +
         "    return total;\n}\n";
}

struct Corpus {
  std::vector<astveil::SourceUnit> units;
  std::vector<int> labels;
};

inline Corpus make(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    const int cls = static_cast<int>(i % 2);
    char id[32];
    std::snprintf(id, sizeof id, "u%04zu", i);
    c.units.push_back({id, astveil::Language::c, program(i, cls, rng), cls});
    c.labels.push_back(cls);
  }
  return c;
}

// Writes `dir`/index.jsonl plus one .c file per unit.
inline void write(const Corpus& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "src");
  std::ofstream index(dir / "index.jsonl");
  for (std::size_t i = 0; i < c.units.size(); ++i) {
    const auto& u = c.units[i];
    std::ofstream(dir / "src" / (u.id + ".c")) << u.text;
    index << "{\"id\":\"" << u.id << "\",\"path\":\"src/" << u.id << ".c\",\"label\":" << c.labels[i] << "}\n";
  }
}

}  // namespace toy
