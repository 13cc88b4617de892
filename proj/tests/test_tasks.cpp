#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "helpers.hpp"
#include "pmcts/errors.hpp"
#include "pmcts/rng.hpp"
#include "pmcts/task.hpp"

using namespace pmcts;
using testutil::FuncBackend;
using testutil::label_example;
using testutil::make_label_task;

TEST_CASE("format_input with no optional parts") {
  TaskSpec spec = make_label_task();
  const Example e = label_example("1", "What is 2+2?", "B");
  CHECK(format_input(spec, "Solve it.", e) == "Solve it.\nWhat is 2+2?");
}

TEST_CASE("format_input keeps the five-part order") {
  TaskSpec spec = make_label_task();
  spec.task_prefix = "Background table.";
  spec.answer_format = "Answer with a letter.";
  const Example e = label_example("1", "How many?", "A");
  CHECK(format_input(spec, "P", e) == "P\nBackground table.\nHow many?\nAnswer with a letter.");

  spec.task_suffix = "Options: A, B.";
  CHECK(format_input(spec, "P", e) ==
        "P\nBackground table.\nHow many?\nOptions: A, B.\nAnswer with a letter.");
}

TEST_CASE("task validation rejects an empty initial prompt") {
  TaskSpec spec = make_label_task();
  spec.initial_prompt = "";
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("extract_answer reads the last tag pair") {
  TaskSpec spec = make_label_task();
  const Prediction p =
      extract_answer(spec, "Thinking... <answer>A</answer> wait, <answer>B</answer>");
  CHECK(p.parsed);
  CHECK(p.label == "B");
}

TEST_CASE("extract_answer parses entity sets") {
  TaskSpec spec;
  spec.name = "entities";
  spec.initial_prompt = "Extract.";
  spec.metric = Metric::entity_set_f1;
  spec.extraction.kind = Extraction::Kind::entity_set;
  const Prediction p = extract_answer(spec, "Found these: {gliomas, HNPCC}");
  CHECK(p.parsed);
  CHECK(p.entities == std::vector<std::string>{"gliomas", "HNPCC"});

  const Prediction empty = extract_answer(spec, "Nothing here: {}");
  CHECK(empty.parsed);
  CHECK(empty.entities.empty());
}

TEST_CASE("extract_answer without markers counts as unparsed") {
  TaskSpec spec = make_label_task();
  const Prediction p = extract_answer(spec, "The answer is B, I think.");
  CHECK(!p.parsed);
  const Example e = label_example("1", "?", "B");
  const PerExampleRow row = score_example(spec, e, "The answer is B, I think.");
  CHECK(row.prediction == std::string(kUnparsed));
  CHECK(!row.correct);
}

TEST_CASE("extract_answer regex rule uses the last match's capture group") {
  TaskSpec spec = make_label_task();
  spec.extraction.kind = Extraction::Kind::regex;
  spec.extraction.pattern = "choice ([A-E])";
  const Prediction p = extract_answer(spec, "choice A ... final choice C");
  CHECK(p.parsed);
  CHECK(p.label == "C");
}

TEST_CASE("label matching is case-insensitive and trimmed") {
  TaskSpec spec = make_label_task();
  const Example e = label_example("1", "?", "b");
  const PerExampleRow row = score_example(spec, e, "<answer> B </answer>");
  CHECK(row.correct);
}

TEST_CASE("compute_metric accuracy") {
  TaskSpec spec = make_label_task();
  std::vector<PerExampleRow> rows(4);
  rows[0].correct = true;
  rows[1].correct = true;
  rows[2].correct = true;
  rows[3].correct = false;
  CHECK(compute_metric(spec, rows) == doctest::Approx(0.75));
  rows[3].correct = true;
  CHECK(compute_metric(spec, rows) == doctest::Approx(1.0));
}

TEST_CASE("entity micro-F1 on the hand-counted case") {
  TaskSpec spec;
  spec.name = "entities";
  spec.initial_prompt = "Extract.";
  spec.metric = Metric::entity_set_f1;
  spec.extraction.kind = Extraction::Kind::entity_set;
  Example e;
  e.id = "1";
  e.question = "?";
  e.gold.is_entities = true;
  e.gold.entities = {"B", "C"};
  const PerExampleRow row = score_example(spec, e, "{A, B}");
  CHECK(row.tp == 1);
  CHECK(row.fp == 1);
  CHECK(row.fn == 1);
  CHECK(compute_metric(spec, {row}) == doctest::Approx(0.5));
}

TEST_CASE("accuracy is invariant to row order") {
  TaskSpec spec = make_label_task();
  Rng rng(5);
  std::vector<PerExampleRow> rows(20);
  for (auto& row : rows) row.correct = rng.bounded(2) == 0;
  const double base = compute_metric(spec, rows);
  for (int round = 0; round < 5; ++round) {
    rng.shuffle(rows);
    CHECK(compute_metric(spec, rows) == base);
  }
}

TEST_CASE("micro-F1 agrees with an independent counting oracle") {
  TaskSpec spec;
  spec.name = "entities";
  spec.initial_prompt = "Extract.";
  spec.metric = Metric::entity_set_f1;
  spec.extraction.kind = Extraction::Kind::entity_set;
  const std::vector<std::string> universe = {"ana", "bel", "cor", "dex", "eli", "fav"};
  Rng rng(23);
  for (int round = 0; round < 50; ++round) {
    std::vector<PerExampleRow> rows;
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    const int n = 1 + static_cast<int>(rng.bounded(10));
    for (int i = 0; i < n; ++i) {
      std::set<std::string> gold;
      std::set<std::string> pred;
      for (const auto& word : universe) {
        if (rng.bounded(2) == 0) gold.insert(word);
        if (rng.bounded(2) == 0) pred.insert(word);
      }
      Example e;
      e.id = std::to_string(i);
      e.question = "?";
      e.gold.is_entities = true;
      e.gold.entities.assign(gold.begin(), gold.end());
      std::string response = "{";
      for (const auto& word : pred) {
        if (response.size() > 1) response += ",";
        response += word;
      }
      response += "}";
      rows.push_back(score_example(spec, e, response));
      for (const auto& w : pred) (gold.count(w) ? tp : fp) += 1;
      for (const auto& w : gold) {
        if (!pred.count(w)) fn += 1;
      }
    }
    const double oracle =
        (2 * tp + fp + fn) == 0
            ? 1.0
            : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    CHECK(compute_metric(spec, rows) == oracle);
  }
}

TEST_CASE("evaluate_prompt scores through the backend and is deterministic") {
  TaskSpec spec = make_label_task();
  std::vector<Example> examples;
  for (int i = 0; i < 10; ++i) {
    examples.push_back(label_example(std::to_string(i), "Q" + std::to_string(i), "A"));
  }
  // Even-indexed questions answered correctly, odd ones not.
  FuncBackend backend([](const std::string& input) {
    const auto pos = input.find('Q');
    const int idx = input[pos + 1] - '0';
    return idx % 2 == 0 ? "<answer>A</answer>" : "<answer>B</answer>";
  });
  const EvalResult first = evaluate_prompt("P", spec, examples, backend);
  CHECK(first.score == doctest::Approx(0.5));
  CHECK(first.per_example.size() == 10);
  CHECK(compute_metric(spec, first.per_example) == first.score);

  const EvalResult second = evaluate_prompt("P", spec, examples, backend);
  CHECK(second.score == first.score);
  for (std::size_t i = 0; i < first.per_example.size(); ++i) {
    CHECK(second.per_example[i].raw_response == first.per_example[i].raw_response);
    CHECK(second.per_example[i].correct == first.per_example[i].correct);
  }
}

TEST_CASE("evaluate_prompt rejects an empty example list") {
  TaskSpec spec = make_label_task();
  FuncBackend backend([](const std::string&) { return "<answer>A</answer>"; });
  CHECK_THROWS_AS(evaluate_prompt("P", spec, {}, backend), std::invalid_argument);
}

TEST_CASE("evaluate_prompt fails whole on backend errors") {
  TaskSpec spec = make_label_task();
  std::vector<Example> examples = {label_example("1", "Q1", "A"),
                                   label_example("2", "Q2", "A")};
  FuncBackend backend([](const std::string& input) -> std::string {
    if (input.find("Q2") != std::string::npos) {
      throw BackendUnavailable("down");
    }
    return "<answer>A</answer>";
  });
  CHECK_THROWS_AS(evaluate_prompt("P", spec, examples, backend), BackendUnavailable);
}

namespace {

std::vector<Example> make_pool(int n) {
  std::vector<Example> pool;
  for (int i = 0; i < n; ++i) {
    pool.push_back(label_example("ex-" + std::to_string(i), "Q" + std::to_string(i), "A"));
  }
  return pool;
}

std::set<std::string> ids_of(const std::vector<Example>& v) {
  std::set<std::string> out;
  for (const auto& e : v) out.insert(e.id);
  return out;
}

}  // namespace

TEST_CASE("split_dataset is deterministic and disjoint") {
  SplitOptions options;
  options.test_size = 100;
  const auto a = split_dataset(make_pool(400), options, 9);
  const auto b = split_dataset(make_pool(400), options, 9);
  CHECK(ids_of(a.train) == ids_of(b.train));
  CHECK(ids_of(a.heldout) == ids_of(b.heldout));
  CHECK(ids_of(a.test) == ids_of(b.test));
  CHECK(a.test.size() == 100);
  CHECK(a.heldout.size() == 150);
  CHECK(a.train.size() == 150);

  std::set<std::string> all;
  for (const auto& part : {a.train, a.heldout, a.test}) {
    for (const auto& e : part) CHECK(all.insert(e.id).second);
  }
  const auto c = split_dataset(make_pool(400), options, 10);
  CHECK(ids_of(c.heldout) != ids_of(a.heldout));
}

TEST_CASE("split_dataset halves the pool when no test size is given") {
  SplitOptions options;
  const auto split = split_dataset(make_pool(361), options, 4);
  CHECK(split.test.size() == 180);
  CHECK(split.heldout.size() + split.train.size() == 181);
}

TEST_CASE("split_dataset clamps the held-out size for small train pools") {
  SplitOptions options;
  options.test_size = 0;
  const auto split = split_dataset(make_pool(149), options, 3);
  CHECK(split.test.empty());
  CHECK(split.heldout.size() >= 60);
  CHECK(split.heldout.size() <= 200);
  CHECK(split.heldout.size() <= 149);
  CHECK(split.heldout.size() + split.train.size() == 149);
  CHECK(split.heldout.size() == 74);  // frozen: half of a pool below the default
}

TEST_CASE("split_dataset honors explicit train/test sizes") {
  SplitOptions options;
  options.train_size = 70;
  options.test_size = 79;
  const auto split = split_dataset(make_pool(200), options, 12);
  CHECK(split.test.size() == 79);
  CHECK(split.heldout.size() + split.train.size() == 70);
}

TEST_CASE("split_dataset keeps a predefined test set and rejects overlap") {
  SplitOptions options;
  std::vector<Example> predefined;
  for (int i = 0; i < 30; ++i) {
    predefined.push_back(label_example("test-" + std::to_string(i), "T", "A"));
  }
  options.predefined_test = predefined;
  const auto split = split_dataset(make_pool(200), options, 2);
  CHECK(split.test.size() == 30);
  CHECK(ids_of(split.test) == ids_of(predefined));

  options.predefined_test.push_back(label_example("ex-0", "T", "A"));
  CHECK_THROWS_AS(split_dataset(make_pool(200), options, 2), DatasetError);
}

TEST_CASE("split_dataset names the short split") {
  SplitOptions options;
  options.test_size = 300;
  try {
    split_dataset(make_pool(200), options, 1);
    FAIL("expected DatasetError");
  } catch (const DatasetError& e) {
    CHECK(std::string(e.what()).find("test") != std::string::npos);
  }
}

TEST_CASE("jsonl loader reads label and entity examples") {
  testutil::TempDir dir;
  const auto path = dir.file("data.jsonl");
  std::ofstream(path) << R"({"id":"a","question":"Q1","answer":"B"})"
                      << "\n"
                      << R"({"id":"b","question":"Q2","entities":["x","y"]})"
                      << "\n";
  const auto examples = load_examples_jsonl(path);
  REQUIRE(examples.size() == 2);
  CHECK(examples[0].gold.label == "B");
  CHECK(!examples[0].gold.is_entities);
  CHECK(examples[1].gold.is_entities);
  CHECK(examples[1].gold.entities == std::vector<std::string>{"x", "y"});

  std::ofstream(path, std::ios::app) << R"({"id":"c","question":"Q3"})" << "\n";
  CHECK_THROWS_AS(load_examples_jsonl(path), DatasetError);
}

TEST_CASE("validate_examples enforces the label space") {
  TaskSpec spec = make_label_task();
  std::vector<Example> good = {label_example("1", "?", "A"),
                               label_example("2", "?", "e")};  // case-insensitive
  validate_examples(spec, good);
  std::vector<Example> bad = {label_example("3", "?", "Z")};
  CHECK_THROWS_AS(validate_examples(spec, bad), DatasetError);
  spec.label_space.reset();
  validate_examples(spec, bad);  // no label space, nothing to enforce
}

TEST_CASE("task json round-trips through save and load") {
  testutil::TempDir dir;
  TaskSpec spec;
  spec.name = "ner";
  spec.initial_prompt = "Extract disease mentions.";
  spec.task_prefix = "Sentence:";
  spec.metric = Metric::entity_set_f1;
  spec.extraction.kind = Extraction::Kind::entity_set;
  const auto path = dir.file("task.json");
  save_task_json(spec, path);
  const TaskSpec loaded = load_task_json(path);
  CHECK(loaded.name == spec.name);
  CHECK(loaded.initial_prompt == spec.initial_prompt);
  CHECK(loaded.task_prefix == spec.task_prefix);
  CHECK(loaded.metric == Metric::entity_set_f1);
  CHECK(loaded.extraction.kind == Extraction::Kind::entity_set);
  CHECK(!loaded.label_space.has_value());
}

TEST_CASE("score stays within [0,1] and is recomputable from rows") {
  auto bundle = testutil::acceptance_bundle();
  Rng rng(31);
  for (int round = 0; round < 10; ++round) {
    std::string prompt = bundle.task.spec.initial_prompt;
    for (const auto& kw : bundle.synth.landscape.keywords) {
      if (rng.bounded(2) == 0) prompt += " " + kw;
    }
    const EvalResult result =
        evaluate_prompt(prompt, bundle.task.spec, bundle.task.split.heldout, *bundle.base);
    CHECK(result.score >= 0.0);
    CHECK(result.score <= 1.0);
    CHECK(compute_metric(bundle.task.spec, result.per_example) == result.score);
    // The landscape's own scoring rule is the oracle for the whole pipeline.
    CHECK(result.score ==
          bundle.synth.landscape.score(prompt, bundle.task.split.heldout));
  }
}
