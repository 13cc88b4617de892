#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pmcts/backend.hpp"
#include "pmcts/landscape.hpp"
#include "pmcts/meta_prompts.hpp"
#include "pmcts/search.hpp"
#include "pmcts/task.hpp"

namespace testutil {

using namespace pmcts;

// Synthetic task plus its pair of simulated backends. Plain examples are
// dealt round-robin between held-out and train; hard examples stay in train
// so the held-out requirements remain reachable within small depth limits.
struct SimBundle {
  SynthBundle synth;
  Task task;
  std::unique_ptr<SimulatedBaseBackend> base;
  std::unique_ptr<SimulatedOptimizerBackend> optimizer;

  Backends backends() { return Backends{base.get(), optimizer.get()}; }
};

inline SimBundle make_sim_bundle(const SynthOptions& options, int heldout_stride = 3) {
  SimBundle bundle;
  bundle.synth = make_synthetic_task(options);
  DatasetSplit split;
  for (std::size_t i = 0; i < bundle.synth.n_plain; ++i) {
    if (heldout_stride > 0 && i % static_cast<std::size_t>(heldout_stride) == 0) {
      split.heldout.push_back(bundle.synth.examples[i]);
    } else {
      split.train.push_back(bundle.synth.examples[i]);
    }
  }
  for (std::size_t i = bundle.synth.n_plain; i < bundle.synth.examples.size(); ++i) {
    split.train.push_back(bundle.synth.examples[i]);
  }
  bundle.task = Task{bundle.synth.spec, split};
  bundle.base = std::make_unique<SimulatedBaseBackend>(
      default_base_config(BackendKind::simulated), bundle.synth.landscape,
      bundle.synth.spec, bundle.synth.examples);
  bundle.optimizer = std::make_unique<SimulatedOptimizerBackend>(
      default_optimizer_config(BackendKind::simulated), bundle.synth.landscape,
      bundle.synth.examples);
  return bundle;
}

// The end-to-end oracle landscape: 10 pool keywords all required by some
// example, the root prompt covering 4. Held-out examples only require the
// first 8 keywords, so 4 additions reach reward 1.0; the last 2 keywords live
// in train-only examples and act as reward-neutral detours.
inline SimBundle acceptance_bundle() {
  SynthOptions options;
  options.n_keywords = 10;
  options.root_coverage = 4;
  options.required_span = 8;
  options.n_examples = 96;
  options.n_hard_examples = 24;
  options.seed = 11;
  return make_sim_bundle(options, 3);
}

// Backend driven by a plain function; records every input it sees.
class FuncBackend final : public Backend {
 public:
  using Fn = std::function<std::string(const std::string&)>;

  explicit FuncBackend(Fn fn, BackendConfig config = default_optimizer_config(
                                  BackendKind::simulated))
      : Backend(std::move(config)), fn_(std::move(fn)) {}

  std::string complete(const std::string& input) override {
    calls_.push_back(input);
    return fn_(input);
  }

  const std::vector<std::string>& calls() const { return calls_; }

 private:
  Fn fn_;
  std::vector<std::string> calls_;
};

inline TaskSpec make_label_task() {
  TaskSpec spec;
  spec.name = "toy-labels";
  spec.initial_prompt = "Answer the question.";
  spec.metric = Metric::accuracy;
  spec.label_space = std::vector<std::string>{"A", "B", "C", "D", "E"};
  return spec;
}

inline Example label_example(const std::string& id, const std::string& question,
                             const std::string& answer) {
  Example e;
  e.id = id;
  e.question = question;
  e.gold.label = answer;
  return e;
}

struct TempDir {
  std::filesystem::path path;

  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("pmcts-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testutil
