#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pmcts {

class Backend;

enum class Metric { accuracy, entity_set_f1 };

std::string to_string(Metric m);
Metric metric_from_string(const std::string& s);

// How a prediction is pulled out of a raw model response.
struct Extraction {
  enum class Kind { tag, regex, entity_set };
  Kind kind = Kind::tag;
  std::string open = "<answer>";
  std::string close = "</answer>";
  std::string pattern;  // regex kind only
};

struct TaskSpec {
  std::string name;
  std::string initial_prompt;
  std::optional<std::string> task_prefix;
  std::optional<std::string> task_suffix;
  std::optional<std::string> answer_format;
  Metric metric = Metric::accuracy;
  std::optional<std::vector<std::string>> label_space;
  Extraction extraction;

  void validate() const;
};

struct Gold {
  bool is_entities = false;
  std::string label;
  std::vector<std::string> entities;
};

struct Example {
  std::string id;
  std::string question;
  Gold gold;
};

// train / heldout / test are pairwise disjoint by id; heldout is carved out of
// the original train pool and is the reward set.
struct DatasetSplit {
  std::vector<Example> train;
  std::vector<Example> heldout;
  std::vector<Example> test;
  std::uint64_t seed = 0;
};

struct Task {
  TaskSpec spec;
  DatasetSplit split;
};

struct Prediction {
  bool parsed = false;
  std::string label;
  std::vector<std::string> entities;
};

inline constexpr const char* kUnparsed = "unparsed";

struct PerExampleRow {
  std::string id;
  std::string raw_response;
  std::string prediction;
  bool parsed = false;
  bool correct = false;
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

struct EvalResult {
  std::vector<PerExampleRow> per_example;
  double score = 0.0;
};

struct SplitOptions {
  int heldout_size = 150;
  std::optional<int> train_size;
  std::optional<int> test_size;
  std::vector<Example> predefined_test;
};

// Prompt + Task Prefix + Question + Task Suffix + Answer Format, joined by
// single newlines with absent optional parts omitted.
std::string format_input(const TaskSpec& task, const std::string& prompt,
                         const Example& example);

Prediction extract_answer(const TaskSpec& task, const std::string& response);

bool prediction_matches(const TaskSpec& task, const Gold& gold, const Prediction& pred);

std::string gold_to_string(const Gold& gold);
std::string prediction_to_string(const Prediction& pred);

PerExampleRow score_example(const TaskSpec& task, const Example& example,
                            const std::string& raw_response);

// accuracy = correct/total; entity_set_f1 = micro F1 over summed TP/FP/FN.
double compute_metric(const TaskSpec& task, const std::vector<PerExampleRow>& rows);

// Runs the base model on every example (temperature owned by the backend
// config), extracts and scores. Fails whole on any backend error.
EvalResult evaluate_prompt(const std::string& prompt, const TaskSpec& task,
                           const std::vector<Example>& examples, Backend& backend);

DatasetSplit split_dataset(std::vector<Example> pool, const SplitOptions& options,
                           std::uint64_t seed);

// Checks each example against the task contract: labeled examples must stay
// inside the label space when one is declared.
void validate_examples(const TaskSpec& task, const std::vector<Example>& examples);

// JSONL, one object per line: {"id","question","answer"} or
// {"id","question","entities":[...]}.
std::vector<Example> load_examples_jsonl(const std::filesystem::path& path);
void save_examples_jsonl(const std::vector<Example>& examples,
                         const std::filesystem::path& path);

TaskSpec load_task_json(const std::filesystem::path& path);
void save_task_json(const TaskSpec& spec, const std::filesystem::path& path);

}  // namespace pmcts
