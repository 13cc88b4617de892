#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pmcts/task.hpp"

namespace pmcts {

// Deterministic stand-in for LLM behaviour: a prompt answers an example
// correctly exactly when the prompt text mentions every keyword the example
// requires. Pure in (prompt text, example id), monotone under keyword
// inclusion, and the prompt covering the whole pool scores 1.0.
struct SimulatedLandscape {
  std::vector<std::string> keywords;                          // pool, order matters
  std::map<std::string, std::vector<std::string>> required;   // example id -> keywords

  std::vector<std::string> covered(const std::string& text) const;
  bool satisfied(const std::string& text, const std::string& example_id) const;

  // Fraction of the given examples whose requirements the text covers;
  // the independent score oracle used by end-to-end tests.
  double score(const std::string& text, const std::vector<Example>& examples) const;

  void validate() const;
};

SimulatedLandscape load_landscape_json(const std::filesystem::path& path);
void save_landscape_json(const SimulatedLandscape& landscape,
                         const std::filesystem::path& path);

// Generator for synthetic keyword tasks. Plain examples require one keyword
// from the first `required_span` pool entries; hard examples require one of
// the remaining entries. Questions and prompt scaffolding never collide with
// pool keywords, so keyword coverage is decided by the prompt alone.
struct SynthOptions {
  int n_keywords = 10;
  int root_coverage = 4;   // pool keywords mentioned by the initial prompt
  int required_span = 8;   // plain examples draw requirements from pool[0..span)
  int n_examples = 96;     // plain examples
  int n_hard_examples = 0; // examples requiring keywords outside the span
  std::uint64_t seed = 0;
};

struct SynthBundle {
  TaskSpec spec;
  std::vector<Example> examples;       // plain first, hard after
  std::size_t n_plain = 0;
  SimulatedLandscape landscape;
};

SynthBundle make_synthetic_task(const SynthOptions& options);

}  // namespace pmcts
