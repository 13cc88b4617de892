#include "pmcts/task.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pmcts/backend.hpp"
#include "pmcts/errors.hpp"
#include "pmcts/parallel.hpp"
#include "pmcts/rng.hpp"

namespace pmcts {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string normalize(const std::string& s) { return lower(trim(s)); }

std::vector<std::string> parse_entity_list(const std::string& body) {
  std::vector<std::string> out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string cleaned = trim(item);
    if (!cleaned.empty()) out.push_back(cleaned);
  }
  return out;
}

}  // namespace

std::string to_string(Metric m) {
  return m == Metric::accuracy ? "accuracy" : "entity_set_f1";
}

Metric metric_from_string(const std::string& s) {
  if (s == "accuracy") return Metric::accuracy;
  if (s == "entity_set_f1") return Metric::entity_set_f1;
  throw ConfigError("unknown metric: " + s);
}

void TaskSpec::validate() const {
  if (initial_prompt.empty()) throw ConfigError("task has empty initial_prompt");
  if (metric == Metric::entity_set_f1 && label_space.has_value()) {
    throw ConfigError("entity_set_f1 tasks must not declare a label_space");
  }
  if (extraction.kind == Extraction::Kind::tag &&
      (extraction.open.empty() || extraction.close.empty())) {
    throw ConfigError("tag extraction needs open and close markers");
  }
  if (extraction.kind == Extraction::Kind::regex && extraction.pattern.empty()) {
    throw ConfigError("regex extraction needs a pattern");
  }
}

std::string format_input(const TaskSpec& task, const std::string& prompt,
                         const Example& example) {
  std::string out = prompt;
  const auto append = [&out](const std::string& part) {
    out += '\n';
    out += part;
  };
  if (task.task_prefix) append(*task.task_prefix);
  append(example.question);
  if (task.task_suffix) append(*task.task_suffix);
  if (task.answer_format) append(*task.answer_format);
  return out;
}

Prediction extract_answer(const TaskSpec& task, const std::string& response) {
  Prediction pred;
  switch (task.extraction.kind) {
    case Extraction::Kind::tag: {
      const std::string& open = task.extraction.open;
      const std::string& close = task.extraction.close;
      const auto open_pos = response.rfind(open);
      if (open_pos == std::string::npos) return pred;
      const auto body_pos = open_pos + open.size();
      const auto close_pos = response.find(close, body_pos);
      if (close_pos == std::string::npos) return pred;
      pred.parsed = true;
      pred.label = trim(response.substr(body_pos, close_pos - body_pos));
      return pred;
    }
    case Extraction::Kind::regex: {
      const std::regex re(task.extraction.pattern);
      std::smatch last;
      bool found = false;
      auto begin = std::sregex_iterator(response.begin(), response.end(), re);
      for (auto it = begin; it != std::sregex_iterator(); ++it) {
        last = *it;
        found = true;
      }
      if (!found) return pred;
      pred.parsed = true;
      pred.label = trim(last.size() > 1 && last[1].matched ? last[1].str() : last[0].str());
      return pred;
    }
    case Extraction::Kind::entity_set: {
      // Last complete {...} span, entities comma-separated.
      static const std::regex re("\\{[^{}]*\\}");
      std::smatch last;
      bool found = false;
      auto begin = std::sregex_iterator(response.begin(), response.end(), re);
      for (auto it = begin; it != std::sregex_iterator(); ++it) {
        last = *it;
        found = true;
      }
      if (!found) return pred;
      pred.parsed = true;
      const std::string span = last[0].str();
      pred.entities = parse_entity_list(span.substr(1, span.size() - 2));
      return pred;
    }
  }
  return pred;
}

bool prediction_matches(const TaskSpec& task, const Gold& gold, const Prediction& pred) {
  if (!pred.parsed) return false;
  if (task.metric == Metric::entity_set_f1 || gold.is_entities) {
    std::set<std::string> want;
    std::set<std::string> got;
    for (const auto& e : gold.entities) want.insert(normalize(e));
    for (const auto& e : pred.entities) got.insert(normalize(e));
    return want == got;
  }
  return normalize(gold.label) == normalize(pred.label);
}

std::string gold_to_string(const Gold& gold) {
  if (!gold.is_entities) return gold.label;
  std::string out = "{";
  for (std::size_t i = 0; i < gold.entities.size(); ++i) {
    if (i > 0) out += ",";
    out += gold.entities[i];
  }
  out += "}";
  return out;
}

std::string prediction_to_string(const Prediction& pred) {
  if (!pred.parsed) return kUnparsed;
  Gold as_gold;
  as_gold.is_entities = !pred.entities.empty() || pred.label.empty();
  if (!pred.entities.empty()) {
    as_gold.entities = pred.entities;
    as_gold.is_entities = true;
    return gold_to_string(as_gold);
  }
  return pred.label;
}

PerExampleRow score_example(const TaskSpec& task, const Example& example,
                            const std::string& raw_response) {
  PerExampleRow row;
  row.id = example.id;
  row.raw_response = raw_response;
  const Prediction pred = extract_answer(task, raw_response);
  row.parsed = pred.parsed;
  if (task.metric == Metric::entity_set_f1) {
    row.prediction = pred.parsed ? gold_to_string(Gold{true, "", pred.entities}) : kUnparsed;
    std::set<std::string> want;
    std::set<std::string> got;
    for (const auto& e : example.gold.entities) want.insert(normalize(e));
    if (pred.parsed) {
      for (const auto& e : pred.entities) got.insert(normalize(e));
    }
    for (const auto& e : got) {
      if (want.count(e)) {
        row.tp += 1;
      } else {
        row.fp += 1;
      }
    }
    for (const auto& e : want) {
      if (!got.count(e)) row.fn += 1;
    }
    row.correct = row.fp == 0 && row.fn == 0;
  } else {
    row.prediction = pred.parsed ? pred.label : kUnparsed;
    row.correct = prediction_matches(task, example.gold, pred);
  }
  return row;
}

double compute_metric(const TaskSpec& task, const std::vector<PerExampleRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("compute_metric: no rows");
  if (task.metric == Metric::accuracy) {
    std::size_t correct = 0;
    for (const auto& row : rows) {
      if (row.correct) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(rows.size());
  }
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  for (const auto& row : rows) {
    tp += row.tp;
    fp += row.fp;
    fn += row.fn;
  }
  const long long denom = 2 * tp + fp + fn;
  if (denom == 0) return 1.0;  // nothing to find, nothing predicted
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

EvalResult evaluate_prompt(const std::string& prompt, const TaskSpec& task,
                           const std::vector<Example>& examples, Backend& backend) {
  if (examples.empty()) throw std::invalid_argument("evaluate_prompt: no examples");
  EvalResult result;
  result.per_example.resize(examples.size());
  const int workers = backend.config().max_parallel;
  parallel_for(examples.size(), workers, [&](std::size_t i) {
    const std::string input = format_input(task, prompt, examples[i]);
    const std::string response = backend.complete(input);
    result.per_example[i] = score_example(task, examples[i], response);
  });
  result.score = compute_metric(task, result.per_example);
  return result;
}

DatasetSplit split_dataset(std::vector<Example> pool, const SplitOptions& options,
                           std::uint64_t seed) {
  DatasetSplit split;
  split.seed = seed;
  Rng rng(Rng::derive(seed, 0x5011Bu));

  if (!options.predefined_test.empty()) {
    std::set<std::string> test_ids;
    for (const auto& e : options.predefined_test) test_ids.insert(e.id);
    for (const auto& e : pool) {
      if (test_ids.count(e.id)) {
        throw DatasetError("test: predefined test example '" + e.id +
                           "' also appears in the train pool");
      }
    }
    split.test = options.predefined_test;
    if (split.test.size() > 1000) {
      rng.shuffle(split.test);
      split.test.resize(1000);
    }
  } else {
    rng.shuffle(pool);
    const std::size_t n_test = options.test_size
                                   ? static_cast<std::size_t>(*options.test_size)
                                   : pool.size() / 2;
    if (n_test > pool.size()) {
      throw DatasetError("test: requested " + std::to_string(n_test) +
                         " examples but pool holds " + std::to_string(pool.size()));
    }
    split.test.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_test));
    pool.erase(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_test));
  }

  if (options.train_size) {
    const std::size_t want = static_cast<std::size_t>(*options.train_size);
    if (want > pool.size()) {
      throw DatasetError("train: requested " + std::to_string(want) +
                         " examples but only " + std::to_string(pool.size()) + " remain");
    }
    rng.shuffle(pool);
    pool.resize(want);
  }
  if (pool.empty()) throw DatasetError("train: no examples remain for the train pool");

  rng.shuffle(pool);
  // Held-out size 150 by default, kept within [60, 200]; a train pool too
  // small for that simply donates half of itself.
  std::size_t heldout = static_cast<std::size_t>(
      std::clamp(options.heldout_size, 60, 200));
  if (heldout >= pool.size()) {
    heldout = std::max<std::size_t>(1, pool.size() / 2);
  }
  split.heldout.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(heldout));
  split.train.assign(pool.begin() + static_cast<std::ptrdiff_t>(heldout), pool.end());
  if (split.train.empty()) throw DatasetError("train: empty after held-out sampling");
  return split;
}

void validate_examples(const TaskSpec& task, const std::vector<Example>& examples) {
  if (!task.label_space) return;
  for (const auto& e : examples) {
    if (e.gold.is_entities) continue;
    bool known = false;
    for (const auto& label : *task.label_space) {
      if (normalize(label) == normalize(e.gold.label)) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw DatasetError("example '" + e.id + "' has label '" + e.gold.label +
                         "' outside the task's label space");
    }
  }
}

std::vector<Example> load_examples_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset file: " + path.string());
  std::vector<Example> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DatasetError("bad JSONL at " + path.string() + ":" + std::to_string(lineno) +
                         ": " + e.what());
    }
    Example e;
    e.id = j.value("id", std::string{});
    e.question = j.value("question", std::string{});
    if (e.id.empty() || e.question.empty()) {
      throw DatasetError("dataset line " + std::to_string(lineno) +
                         " needs non-empty id and question");
    }
    if (j.contains("entities")) {
      e.gold.is_entities = true;
      e.gold.entities = j.at("entities").get<std::vector<std::string>>();
    } else if (j.contains("answer")) {
      e.gold.label = j.at("answer").get<std::string>();
    } else {
      throw DatasetError("dataset line " + std::to_string(lineno) +
                         " needs 'answer' or 'entities'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

void save_examples_jsonl(const std::vector<Example>& examples,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write dataset file: " + path.string());
  for (const auto& e : examples) {
    nlohmann::json j;
    j["id"] = e.id;
    j["question"] = e.question;
    if (e.gold.is_entities) {
      j["entities"] = e.gold.entities;
    } else {
      j["answer"] = e.gold.label;
    }
    out << j.dump() << '\n';
  }
}

TaskSpec load_task_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open task file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("bad task file " + path.string() + ": " + e.what());
  }
  TaskSpec spec;
  spec.name = j.value("name", std::string{});
  spec.initial_prompt = j.value("initial_prompt", std::string{});
  if (j.contains("task_prefix")) spec.task_prefix = j.at("task_prefix").get<std::string>();
  if (j.contains("task_suffix")) spec.task_suffix = j.at("task_suffix").get<std::string>();
  if (j.contains("answer_format")) {
    spec.answer_format = j.at("answer_format").get<std::string>();
  }
  spec.metric = metric_from_string(j.value("metric", std::string("accuracy")));
  if (j.contains("label_space")) {
    spec.label_space = j.at("label_space").get<std::vector<std::string>>();
  }
  if (j.contains("extraction")) {
    const auto& ej = j.at("extraction");
    const std::string kind = ej.value("kind", std::string("tag"));
    if (kind == "tag") {
      spec.extraction.kind = Extraction::Kind::tag;
      spec.extraction.open = ej.value("open", spec.extraction.open);
      spec.extraction.close = ej.value("close", spec.extraction.close);
    } else if (kind == "regex") {
      spec.extraction.kind = Extraction::Kind::regex;
      spec.extraction.pattern = ej.value("pattern", std::string{});
    } else if (kind == "entity_set") {
      spec.extraction.kind = Extraction::Kind::entity_set;
    } else {
      throw ConfigError("unknown extraction kind: " + kind);
    }
  } else if (spec.metric == Metric::entity_set_f1) {
    spec.extraction.kind = Extraction::Kind::entity_set;
  }
  spec.validate();
  return spec;
}

void save_task_json(const TaskSpec& spec, const std::filesystem::path& path) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["initial_prompt"] = spec.initial_prompt;
  if (spec.task_prefix) j["task_prefix"] = *spec.task_prefix;
  if (spec.task_suffix) j["task_suffix"] = *spec.task_suffix;
  if (spec.answer_format) j["answer_format"] = *spec.answer_format;
  j["metric"] = to_string(spec.metric);
  if (spec.label_space) j["label_space"] = *spec.label_space;
  nlohmann::json ej;
  switch (spec.extraction.kind) {
    case Extraction::Kind::tag:
      ej = {{"kind", "tag"}, {"open", spec.extraction.open}, {"close", spec.extraction.close}};
      break;
    case Extraction::Kind::regex:
      ej = {{"kind", "regex"}, {"pattern", spec.extraction.pattern}};
      break;
    case Extraction::Kind::entity_set:
      ej = {{"kind", "entity_set"}};
      break;
  }
  j["extraction"] = ej;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write task file: " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace pmcts
