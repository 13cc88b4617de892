// prompt-mcts: search-based prompt optimization over chat-completion backends.
//
// Subcommands: optimize, baseline, evaluate, resume, report, synth.
// Exit codes: 0 ok, 2 config/usage, 3 backend unavailable, 4 dataset, 5 trace.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmcts/backend.hpp"
#include "pmcts/baselines.hpp"
#include "pmcts/errors.hpp"
#include "pmcts/landscape.hpp"
#include "pmcts/meta_prompts.hpp"
#include "pmcts/search.hpp"
#include "pmcts/task.hpp"
#include "pmcts/trace.hpp"

namespace {

namespace fs = std::filesystem;
using namespace pmcts;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;
constexpr int kExitDataset = 4;
constexpr int kExitTrace = 5;

struct CommonArgs {
  std::string task_file;
  std::string data_file;
  std::string test_data_file;
  std::string landscape_file;
  std::string backend_kind = "simulated";
  std::string endpoint;
  std::string model_name;
  std::string optimizer_endpoint;
  std::string optimizer_model;
  std::string config_file;
  std::string meta_prompt_dir;
  std::string preset;
  std::string trace_file = "trace.json";
  std::string out_file;
  std::uint64_t seed = 0;
  bool seed_set = false;

  // Explicit CLI overrides; flags win over config file, which wins over
  // preset, which wins over built-in defaults.
  std::optional<int> iterations;
  std::optional<double> exploration_weight;
  std::optional<int> depth_limit;
  std::optional<int> expand_width;
  std::optional<int> num_samples;
  std::optional<int> batch_size;
  std::optional<int> heldout_size;
  std::optional<int> train_size;
  std::optional<int> test_size;
};

void add_search_flags(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file, "JSON config file");
  cmd->add_option("--preset", args.preset, "standard, wide or lite")
      ->check(CLI::IsMember({"standard", "wide", "lite"}));
  cmd->add_option("--seed", args.seed, "random seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--iterations", args.iterations, "planner iterations");
  cmd->add_option("--exploration-weight", args.exploration_weight, "UCT constant c");
  cmd->add_option("--depth-limit", args.depth_limit, "maximum path depth");
  cmd->add_option("--expand-width", args.expand_width, "error batches per expansion");
  cmd->add_option("--num-samples", args.num_samples, "new prompts per batch");
  cmd->add_option("--batch-size", args.batch_size, "examples per error batch");
}

void add_backend_flags(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--backend", args.backend_kind, "simulated or http")
      ->check(CLI::IsMember({"simulated", "http"}));
  cmd->add_option("--endpoint", args.endpoint, "base model endpoint URL");
  cmd->add_option("--model", args.model_name, "base model name");
  cmd->add_option("--optimizer-endpoint", args.optimizer_endpoint,
                  "optimizer endpoint (defaults to --endpoint)");
  cmd->add_option("--optimizer-model", args.optimizer_model, "optimizer model name");
  cmd->add_option("--landscape", args.landscape_file,
                  "landscape JSON for simulated backends");
  cmd->add_option("--meta-prompts", args.meta_prompt_dir,
                  "directory with meta-prompt template overrides");
}

void add_data_flags(CLI::App* cmd, CommonArgs& args, bool task_required) {
  auto* task = cmd->add_option("--task", args.task_file, "task JSON file");
  if (task_required) task->required();
  cmd->add_option("--data", args.data_file, "train pool JSONL");
  cmd->add_option("--test-data", args.test_data_file, "predefined test JSONL");
  cmd->add_option("--heldout-size", args.heldout_size, "held-out set size");
  cmd->add_option("--train-size", args.train_size, "train pool cap");
  cmd->add_option("--test-size", args.test_size, "test split size");
}

nlohmann::json read_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("cannot open ") + what + ": " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("bad ") + what + " " + path + ": " + e.what());
  }
}

SearchConfig build_search_config(const CommonArgs& args) {
  SearchConfig config;  // defaults: 12 iterations, c 2.5, batch 5, gate depth 2
  nlohmann::json file_json;
  if (!args.config_file.empty()) {
    file_json = read_json_file(args.config_file, "config file");
  }

  std::string preset = args.preset;
  if (preset.empty() && file_json.contains("search")) {
    preset = file_json.at("search").value("preset", std::string{});
    if (preset == "custom") preset.clear();
  }
  if (!preset.empty()) config = SearchConfig::with_preset(preset_from_string(preset));

  if (file_json.contains("search")) {
    const auto& s = file_json.at("search");
    if (s.contains("iterations")) config.iterations = s.at("iterations").get<int>();
    if (s.contains("exploration_weight")) {
      config.exploration_weight = s.at("exploration_weight").get<double>();
    }
    if (s.contains("depth_limit")) config.depth_limit = s.at("depth_limit").get<int>();
    if (s.contains("expand_width")) config.expand_width = s.at("expand_width").get<int>();
    if (s.contains("num_samples")) config.num_samples = s.at("num_samples").get<int>();
    if (s.contains("batch_size")) config.batch_size = s.at("batch_size").get<int>();
    if (s.contains("early_stop_min_depth")) {
      config.early_stop_min_depth = s.at("early_stop_min_depth").get<int>();
    }
    if (s.contains("random_seed")) {
      config.random_seed = s.at("random_seed").get<std::uint64_t>();
    }
    if (s.contains("max_batch_attempts")) {
      config.max_batch_attempts = s.at("max_batch_attempts").get<int>();
    }
    if (s.contains("transit_retries")) {
      config.transit_retries = s.at("transit_retries").get<int>();
    }
  }

  if (args.iterations) config.iterations = *args.iterations;
  if (args.exploration_weight) config.exploration_weight = *args.exploration_weight;
  if (args.depth_limit) config.depth_limit = *args.depth_limit;
  if (args.expand_width) config.expand_width = *args.expand_width;
  if (args.num_samples) config.num_samples = *args.num_samples;
  if (args.batch_size) config.batch_size = *args.batch_size;
  if (args.seed_set) config.random_seed = args.seed;

  if (!config.matches_preset_table()) config.preset = Preset::custom;
  config.validate();
  return config;
}

struct BackendBundle {
  std::unique_ptr<Backend> base;
  std::unique_ptr<Backend> optimizer;
  Backends handles() { return Backends{base.get(), optimizer.get()}; }
};

BackendConfig backend_config_from_file(const nlohmann::json& file_json, const char* key,
                                       BackendConfig fallback) {
  if (!file_json.contains(key)) return fallback;
  BackendConfig c = file_json.at(key).get<BackendConfig>();
  return c;
}

BackendBundle build_backends(const CommonArgs& args, const TaskSpec& spec,
                             const std::vector<Example>& all_examples) {
  nlohmann::json file_json;
  if (!args.config_file.empty()) {
    file_json = read_json_file(args.config_file, "config file");
  }
  const BackendKind kind = backend_kind_from_string(args.backend_kind);
  BackendConfig base_cfg =
      backend_config_from_file(file_json, "base_backend", default_base_config(kind));
  BackendConfig opt_cfg = backend_config_from_file(file_json, "optimizer_backend",
                                                   default_optimizer_config(kind));
  base_cfg.kind = kind;
  opt_cfg.kind = kind;
  if (!args.endpoint.empty()) base_cfg.endpoint = args.endpoint;
  if (!args.model_name.empty()) base_cfg.model_name = args.model_name;
  opt_cfg.endpoint = args.optimizer_endpoint.empty()
                         ? (args.endpoint.empty() ? opt_cfg.endpoint : args.endpoint)
                         : args.optimizer_endpoint;
  if (!args.optimizer_model.empty()) opt_cfg.model_name = args.optimizer_model;

  BackendBundle bundle;
  if (kind == BackendKind::http) {
    bundle.base = std::make_unique<HttpBackend>(base_cfg);
    bundle.optimizer = std::make_unique<HttpBackend>(opt_cfg);
    return bundle;
  }
  if (args.landscape_file.empty()) {
    throw ConfigError("simulated backends need --landscape");
  }
  SimulatedLandscape landscape = load_landscape_json(args.landscape_file);
  bundle.base =
      std::make_unique<SimulatedBaseBackend>(base_cfg, landscape, spec, all_examples);
  bundle.optimizer =
      std::make_unique<SimulatedOptimizerBackend>(opt_cfg, landscape, all_examples);
  return bundle;
}

MetaPromptSet build_meta(const CommonArgs& args) {
  if (args.meta_prompt_dir.empty()) return MetaPromptSet::defaults();
  return MetaPromptSet::load_dir(args.meta_prompt_dir);
}

struct LoadedData {
  TaskSpec spec;
  std::vector<Example> pool;
  std::vector<Example> all;  // pool + predefined test, for simulated backends
  DatasetSplit split;
};

LoadedData load_data(const CommonArgs& args, std::uint64_t seed) {
  LoadedData data;
  data.spec = load_task_json(args.task_file);
  if (args.data_file.empty()) throw ConfigError("--data is required");
  data.pool = load_examples_jsonl(args.data_file);
  SplitOptions options;
  if (args.heldout_size) options.heldout_size = *args.heldout_size;
  options.train_size = args.train_size;
  options.test_size = args.test_size;
  if (!args.test_data_file.empty()) {
    options.predefined_test = load_examples_jsonl(args.test_data_file);
  } else if (!args.test_size) {
    options.test_size = 0;  // keep the whole pool for training unless asked
  }
  data.all = data.pool;
  data.all.insert(data.all.end(), options.predefined_test.begin(),
                  options.predefined_test.end());
  validate_examples(data.spec, data.all);
  data.split = split_dataset(data.pool, options, seed);
  return data;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write output file: " + path);
  out << text;
}

void print_prompt_block(const PromptState& state) {
  std::cout << "---PROMPT-BEGIN---\n" << state.text << "\n---PROMPT-END---\n";
}

int cmd_optimize(const CommonArgs& args) {
  const SearchConfig config = build_search_config(args);
  const LoadedData data = load_data(args, config.random_seed);
  BackendBundle backends = build_backends(args, data.spec, data.all);
  const MetaPromptSet meta = build_meta(args);

  Task task{data.spec, data.split};
  SearchEngine engine(task, config, backends.handles(), meta);
  RunResult result = engine.run();

  save_trace(engine.tree(), config, data.spec.name, result.aborted,
             args.trace_file);
  if (result.aborted) {
    std::cerr << "error: " << result.error << "\n";
    std::cerr << "partial trace written to " << args.trace_file << "\n";
    return kExitBackend;
  }

  const PromptState best = *result.best;
  std::cout << "task: " << data.spec.name << "\n";
  std::cout << "preset: " << to_string(config.preset)
            << "  iterations: " << config.iterations
            << "  nodes: " << engine.tree().size() << "\n";
  std::cout << "explored prompts: " << engine.stats().prompts_generated << "\n";
  std::cout << "root reward: " << engine.tree().node(engine.tree().root()).reward
            << "  best reward: " << engine.tree().node(best.id).reward << "\n";
  print_prompt_block(best);
  if (!args.out_file.empty()) write_text(args.out_file, best.text + "\n");
  std::cout << "trace written to " << args.trace_file << "\n";
  return kExitOk;
}

int cmd_evaluate(const CommonArgs& args, const std::string& prompt_file) {
  std::ifstream in(prompt_file);
  if (!in) throw ConfigError("cannot open prompt file: " + prompt_file);
  std::string prompt((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
  while (!prompt.empty() && (prompt.back() == '\n' || prompt.back() == '\r')) {
    prompt.pop_back();
  }
  if (prompt.empty()) throw ConfigError("prompt file is empty: " + prompt_file);

  const SearchConfig config = build_search_config(args);
  const LoadedData data = load_data(args, config.random_seed);
  BackendBundle backends = build_backends(args, data.spec, data.all);

  const std::vector<Example>& examples =
      data.split.test.empty() ? data.split.heldout : data.split.test;
  if (examples.empty()) throw DatasetError("test: no examples to evaluate on");
  const EvalResult result =
      evaluate_prompt(prompt, data.spec, examples, *backends.base);

  std::cout << "task: " << data.spec.name << "\n";
  std::cout << "examples: " << result.per_example.size() << "\n";
  std::cout << "score: " << result.score << "\n";
  if (!args.out_file.empty()) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : result.per_example) {
      rows.push_back({{"id", row.id},
                      {"raw_response", row.raw_response},
                      {"prediction", row.prediction},
                      {"correct", row.correct},
                      {"tp", row.tp},
                      {"fp", row.fp},
                      {"fn", row.fn}});
    }
    nlohmann::json out{{"score", result.score}, {"per_example", rows}};
    write_text(args.out_file, out.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_baseline(const CommonArgs& args, const std::string& strategy, int budget,
                 int beam_width, int per_node, int depth, int width) {
  const SearchConfig config = build_search_config(args);
  const LoadedData data = load_data(args, config.random_seed);
  BackendBundle backends = build_backends(args, data.spec, data.all);
  const MetaPromptSet meta = build_meta(args);
  Task task{data.spec, data.split};

  BaselineResult result;
  if (strategy == "mc") {
    result = mc_search(task, budget, backends.handles(), meta, config.random_seed);
  } else if (strategy == "greedy") {
    result = greedy_search(task, depth, width, backends.handles(), meta,
                           config.random_seed);
  } else {
    result = beam_search(task, beam_width, per_node, depth, backends.handles(), meta,
                         config.random_seed);
  }

  save_trace(result.tree, config, data.spec.name, result.aborted, args.trace_file);
  if (result.aborted) {
    std::cerr << "error: " << result.error << "\n";
    std::cerr << "partial trace written to " << args.trace_file << "\n";
    return kExitBackend;
  }
  std::cout << "strategy: " << strategy << "\n";
  std::cout << "explored prompts: " << result.explored << "\n";
  std::cout << "skipped batches: "
            << result.stats.perfect_prompt_batches + result.stats.malformed_batches
            << "\n";
  std::cout << "best reward: " << result.tree.node(result.best.id).reward << "\n";
  print_prompt_block(result.best);
  if (!args.out_file.empty()) write_text(args.out_file, result.best.text + "\n");
  std::cout << "trace written to " << args.trace_file << "\n";
  return kExitOk;
}

int cmd_resume(const CommonArgs& args, const std::string& trace_path) {
  LoadedTrace loaded = load_trace(trace_path);
  SearchConfig config = loaded.config;
  if (args.iterations) config.iterations = *args.iterations;
  config.validate();

  if (!loaded.partial &&
      static_cast<int>(loaded.tree.iteration_log().size()) >= config.iterations) {
    std::cout << "trace already holds " << loaded.tree.iteration_log().size()
              << " iterations; nothing to resume\n";
    return kExitOk;
  }

  const LoadedData data = load_data(args, config.random_seed);
  if (data.spec.name != loaded.task_name) {
    throw ConfigError("trace belongs to task '" + loaded.task_name + "', not '" +
                      data.spec.name + "'");
  }
  BackendBundle backends = build_backends(args, data.spec, data.all);
  const MetaPromptSet meta = build_meta(args);

  Task task{data.spec, data.split};
  SearchEngine engine = SearchEngine::resume(std::move(loaded.tree), task, config,
                                             backends.handles(), meta);
  RunResult result = engine.run();
  save_trace(engine.tree(), config, data.spec.name, result.aborted, trace_path);
  if (result.aborted) {
    std::cerr << "error: " << result.error << "\n";
    return kExitBackend;
  }
  const PromptState best = *result.best;
  std::cout << "resumed to " << result.completed_iterations << " iterations\n";
  std::cout << "best reward: " << engine.tree().node(best.id).reward << "\n";
  print_prompt_block(best);
  if (!args.out_file.empty()) write_text(args.out_file, best.text + "\n");
  return kExitOk;
}

int cmd_report(const std::string& trace_path, const std::string& format,
               const std::string& out_file) {
  const LoadedTrace loaded = load_trace(trace_path);
  const ConvergenceReport report = convergence_report(loaded.tree);
  std::string text;
  if (format == "csv") {
    text = report.to_csv();
  } else {
    text = report.to_json().dump(2) + "\n";
  }
  if (out_file.empty()) {
    std::cout << text;
  } else {
    write_text(out_file, text);
    if (format == "csv") {
      const fs::path sidecar = fs::path(out_file).replace_extension(".best_path.json");
      write_text(sidecar.string(), report.best_path_json().dump(2) + "\n");
      std::cout << "report written to " << out_file << " (best path in "
                << sidecar.string() << ")\n";
    } else {
      std::cout << "report written to " << out_file << "\n";
    }
  }
  return kExitOk;
}

int cmd_synth(const std::string& out_dir, const SynthOptions& options) {
  const SynthBundle bundle = make_synthetic_task(options);
  fs::create_directories(out_dir);
  save_task_json(bundle.spec, fs::path(out_dir) / "task.json");
  save_examples_jsonl(bundle.examples, fs::path(out_dir) / "data.jsonl");
  save_landscape_json(bundle.landscape, fs::path(out_dir) / "landscape.json");
  std::cout << "wrote task.json, data.jsonl, landscape.json to " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Search-based prompt optimization over chat-completion backends"};
  app.require_subcommand(1);

  CommonArgs args;

  auto* optimize = app.add_subcommand("optimize", "run the full tree search");
  add_data_flags(optimize, args, true);
  add_search_flags(optimize, args);
  add_backend_flags(optimize, args);
  optimize->add_option("--trace", args.trace_file, "trace output path");
  optimize->add_option("--out", args.out_file, "file for the winning prompt");

  auto* evaluate = app.add_subcommand("evaluate", "score a fixed prompt on the test split");
  std::string prompt_file;
  evaluate->add_option("--prompt-file", prompt_file, "file holding the prompt")->required();
  add_data_flags(evaluate, args, true);
  add_search_flags(evaluate, args);
  add_backend_flags(evaluate, args);
  evaluate->add_option("--out", args.out_file, "JSON file for per-example rows");

  auto* baseline = app.add_subcommand("baseline", "run an ablation search strategy");
  std::string strategy;
  int budget = 72;
  int beam_width = 3;
  int per_node = 3;
  int depth = 8;
  int width = 3;
  baseline->add_option("--strategy", strategy, "mc, greedy or beam")
      ->required()
      ->check(CLI::IsMember({"mc", "greedy", "beam"}));
  baseline->add_option("--budget", budget, "mc: one-step candidates");
  baseline->add_option("--beam-width", beam_width, "beam: kept nodes per level");
  baseline->add_option("--per-node", per_node, "beam: expansions per kept node");
  baseline->add_option("--depth", depth, "greedy/beam: search depth");
  baseline->add_option("--width", width, "greedy: expansions per level");
  add_data_flags(baseline, args, true);
  add_search_flags(baseline, args);
  add_backend_flags(baseline, args);
  baseline->add_option("--trace", args.trace_file, "trace output path");
  baseline->add_option("--out", args.out_file, "file for the winning prompt");

  auto* resume = app.add_subcommand("resume", "continue a persisted run");
  std::string resume_trace;
  resume->add_option("trace", resume_trace, "trace file to continue")->required();
  add_data_flags(resume, args, true);
  add_search_flags(resume, args);
  add_backend_flags(resume, args);
  resume->add_option("--out", args.out_file, "file for the winning prompt");

  auto* report = app.add_subcommand("report", "per-depth convergence table from a trace");
  std::string report_trace;
  std::string report_format = "csv";
  std::string report_out;
  report->add_option("trace", report_trace, "trace file")->required();
  report->add_option("--format", report_format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  report->add_option("--out", report_out, "output path");

  auto* synth = app.add_subcommand("synth", "generate a synthetic keyword task bundle");
  std::string synth_out = "synthetic";
  SynthOptions synth_options;
  synth->add_option("--out-dir", synth_out, "output directory");
  synth->add_option("--seed", synth_options.seed, "generator seed");
  synth->add_option("--keywords", synth_options.n_keywords, "pool size");
  synth->add_option("--root-coverage", synth_options.root_coverage,
                    "keywords already in the initial prompt");
  synth->add_option("--span", synth_options.required_span,
                    "keywords plain examples may require");
  synth->add_option("--examples", synth_options.n_examples, "plain examples");
  synth->add_option("--hard-examples", synth_options.n_hard_examples,
                    "examples requiring keywords outside the span");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (optimize->parsed()) return cmd_optimize(args);
    if (evaluate->parsed()) return cmd_evaluate(args, prompt_file);
    if (baseline->parsed()) {
      return cmd_baseline(args, strategy, budget, beam_width, per_node, depth, width);
    }
    if (resume->parsed()) return cmd_resume(args, resume_trace);
    if (report->parsed()) return cmd_report(report_trace, report_format, report_out);
    if (synth->parsed()) return cmd_synth(synth_out, synth_options);
  } catch (const BackendUnavailable& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const DatasetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDataset;
  } catch (const TraceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitTrace;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
