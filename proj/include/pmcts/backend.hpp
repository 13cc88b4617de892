#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "pmcts/config.hpp"
#include "pmcts/landscape.hpp"
#include "pmcts/task.hpp"

namespace pmcts {

// Uniform chat-completion surface. complete() must be safe to call from
// multiple threads; implementations own their parallelism bound.
class Backend {
 public:
  explicit Backend(BackendConfig config) : config_(std::move(config)) {
    config_.validate();
  }
  virtual ~Backend() = default;

  virtual std::string complete(const std::string& input) = 0;

  const BackendConfig& config() const { return config_; }

 protected:
  BackendConfig config_;
};

// POST {endpoint}/chat/completions with the OpenAI-style body. Retries
// transient failures with exponential backoff and jitter; at most
// max_parallel requests are in flight at once. API key read from
// PROMPT_MCTS_API_KEY.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendConfig config);
  std::string complete(const std::string& input) override;

 private:
  std::string host_;
  std::string path_prefix_;
  std::mutex mutex_;
  std::condition_variable slot_free_;
  int in_flight_ = 0;
};

// Answers with the gold label when the prompt covers the example's required
// keywords, a deterministic wrong label otherwise.
class SimulatedBaseBackend final : public Backend {
 public:
  SimulatedBaseBackend(BackendConfig config, SimulatedLandscape landscape,
                       TaskSpec spec, std::vector<Example> examples);
  std::string complete(const std::string& input) override;

  const SimulatedLandscape& landscape() const { return landscape_; }

 private:
  const Example* match_example(const std::string& input) const;
  std::string wrong_answer(const Example& example) const;

  SimulatedLandscape landscape_;
  TaskSpec spec_;
  std::vector<Example> examples_;
};

// Parses rendered meta-prompts. Feedback requests list the required keywords
// that the embedded errors need but the current prompt misses; transition
// requests emit <START>...<END> prompts, each appending one listed keyword.
class SimulatedOptimizerBackend final : public Backend {
 public:
  SimulatedOptimizerBackend(BackendConfig config, SimulatedLandscape landscape,
                            std::vector<Example> examples);
  std::string complete(const std::string& input) override;

 private:
  std::string feedback_for(const std::string& cur_prompt, const std::string& input) const;
  std::string transitions_for(const std::string& cur_prompt, const std::string& input) const;

  SimulatedLandscape landscape_;
  std::vector<Example> examples_;
};

struct Backends {
  Backend* base = nullptr;
  Backend* optimizer = nullptr;
};

BackendConfig default_base_config(BackendKind kind);
BackendConfig default_optimizer_config(BackendKind kind);

}  // namespace pmcts
