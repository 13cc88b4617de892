#include "pmcts/backend.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <random>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "pmcts/errors.hpp"

namespace pmcts {

namespace {

std::string trim_copy(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

// Text between two marker lines, trimmed. Empty when either marker is absent.
std::string slice_between(const std::string& text, const std::string& after,
                          const std::string& before) {
  const auto a = text.find(after);
  if (a == std::string::npos) return "";
  const auto start = a + after.size();
  const auto b = text.find(before, start);
  if (b == std::string::npos) return "";
  return trim_copy(text.substr(start, b - start));
}

}  // namespace

BackendConfig default_base_config(BackendKind kind) {
  BackendConfig c;
  c.role = BackendRole::base;
  c.kind = kind;
  c.temperature = 0.0;
  if (kind == BackendKind::simulated) c.max_parallel = 1;
  return c;
}

BackendConfig default_optimizer_config(BackendKind kind) {
  BackendConfig c;
  c.role = BackendRole::optimizer;
  c.kind = kind;
  c.temperature = 1.0;
  if (kind == BackendKind::simulated) c.max_parallel = 1;
  return c;
}

// ---------------------------------------------------------------------------
// HttpBackend

HttpBackend::HttpBackend(BackendConfig config) : Backend(std::move(config)) {
  if (config_.kind != BackendKind::http) {
    throw ConfigError("HttpBackend requires kind=http");
  }
  // Split "http://host:port/prefix" into client host and path prefix.
  std::string url = config_.endpoint;
  const auto scheme = url.find("://");
  const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) {
    host_ = url;
  } else {
    host_ = url.substr(0, path_start);
    path_prefix_ = url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
}

std::string HttpBackend::complete(const std::string& input) {
  if (input.empty()) throw std::invalid_argument("complete: empty input");

  {
    std::unique_lock lock(mutex_);
    slot_free_.wait(lock, [this] { return in_flight_ < config_.max_parallel; });
    ++in_flight_;
  }
  struct SlotRelease {
    HttpBackend* self;
    ~SlotRelease() {
      {
        std::lock_guard lock(self->mutex_);
        --self->in_flight_;
      }
      self->slot_free_.notify_one();
    }
  } release{this};

  nlohmann::json body = {
      {"model", config_.model_name},
      {"messages", nlohmann::json::array({nlohmann::json{
                       {"role", "user"}, {"content", input}}})},
      {"temperature", config_.temperature},
  };
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (const char* key = std::getenv("PROMPT_MCTS_API_KEY")) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  thread_local std::minstd_rand jitter_rng{std::random_device{}()};
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const int base = config_.backoff_base_ms << std::min(attempt - 1, 10);
      const int jitter = base > 0 ? static_cast<int>(jitter_rng() % static_cast<unsigned>(base + 1)) : 0;
      std::this_thread::sleep_for(std::chrono::milliseconds(base + jitter));
    }
    httplib::Client client(host_);
    client.set_connection_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, payload,
                           "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      try {
        const auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed chat-completion response: ") + e.what());
      }
    }
    if (res->status == 408 || res->status == 429 || res->status >= 500) {
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    throw ConfigError("chat-completion request rejected with status " +
                      std::to_string(res->status));
  }
  throw BackendUnavailable("backend '" + config_.model_name + "' unavailable after " +
                           std::to_string(config_.max_retries) + " retries (" +
                           last_error + ")");
}

// ---------------------------------------------------------------------------
// SimulatedBaseBackend

SimulatedBaseBackend::SimulatedBaseBackend(BackendConfig config,
                                           SimulatedLandscape landscape, TaskSpec spec,
                                           std::vector<Example> examples)
    : Backend(std::move(config)),
      landscape_(std::move(landscape)),
      spec_(std::move(spec)),
      examples_(std::move(examples)) {
  landscape_.validate();
}

const Example* SimulatedBaseBackend::match_example(const std::string& input) const {
  for (const auto& e : examples_) {
    if (input.find(e.question) != std::string::npos) return &e;
  }
  return nullptr;
}

std::string SimulatedBaseBackend::wrong_answer(const Example& example) const {
  if (example.gold.is_entities) {
    return example.gold.entities.empty() ? "{spurious}" : "{}";
  }
  if (spec_.label_space && !spec_.label_space->empty()) {
    const auto& labels = *spec_.label_space;
    const auto it = std::find(labels.begin(), labels.end(), example.gold.label);
    const std::size_t at = it == labels.end() ? 0 : static_cast<std::size_t>(it - labels.begin());
    return labels[(at + 1) % labels.size()];
  }
  return "not-" + example.gold.label;
}

std::string SimulatedBaseBackend::complete(const std::string& input) {
  if (input.empty()) throw std::invalid_argument("complete: empty input");
  const Example* example = match_example(input);
  if (example == nullptr) {
    return "I cannot determine the answer for this input.";
  }
  // Generated questions and scaffolding carry no pool keywords, so coverage
  // observed on the whole input equals coverage of the prompt itself.
  const bool right = landscape_.satisfied(input, example->id);
  const std::string answer =
      right ? gold_to_string(example->gold) : wrong_answer(*example);
  std::string verdict = right ? "All governing aspects are accounted for."
                              : "The governing aspects seem unclear here.";
  if (example->gold.is_entities) {
    return verdict + " Identified entities: " + answer;
  }
  return verdict + " The answer is <answer>" + answer + "</answer>.";
}

// ---------------------------------------------------------------------------
// SimulatedOptimizerBackend

SimulatedOptimizerBackend::SimulatedOptimizerBackend(BackendConfig config,
                                                     SimulatedLandscape landscape,
                                                     std::vector<Example> examples)
    : Backend(std::move(config)),
      landscape_(std::move(landscape)),
      examples_(std::move(examples)) {
  landscape_.validate();
}

std::string SimulatedOptimizerBackend::feedback_for(const std::string& cur_prompt,
                                                    const std::string& input) const {
  // The error blocks embed the failing questions; requirements of those
  // examples not already covered by the prompt are what the prompt misses.
  std::vector<std::string> missing;
  for (const auto& kw : landscape_.keywords) {
    if (cur_prompt.find(kw) != std::string::npos) continue;
    bool needed = false;
    for (const auto& e : examples_) {
      if (input.find(e.question) == std::string::npos) continue;
      const auto it = landscape_.required.find(e.id);
      if (it == landscape_.required.end()) continue;
      if (std::find(it->second.begin(), it->second.end(), kw) != it->second.end()) {
        needed = true;
        break;
      }
    }
    if (needed) missing.push_back(kw);
  }
  if (missing.empty()) {
    return "After reviewing the wrong examples, the prompt already reflects every "
           "governing aspect they test; the mistakes do not point at an absent aspect.";
  }
  std::string out =
      "After reviewing the wrong examples, the prompt does not mention these "
      "governing aspects: ";
  for (std::size_t i = 0; i < missing.size(); ++i) {
    if (i > 0) out += ", ";
    out += missing[i];
  }
  out += ". Revise the prompt so it covers them.";
  return out;
}

std::string SimulatedOptimizerBackend::transitions_for(const std::string& cur_prompt,
                                                       const std::string& input) const {
  int samples = 1;
  {
    static const std::regex re("please write (\\d+) new prompts");
    std::smatch m;
    if (std::regex_search(input, m, re)) samples = std::stoi(m[1].str());
  }
  const std::string feedback =
      slice_between(input, "the problems with this prompt and the reasons are:",
                    "There is a list of former prompts");
  std::vector<std::string> additions;
  for (const auto& kw : landscape_.keywords) {
    if (feedback.find(kw) != std::string::npos &&
        cur_prompt.find(kw) == std::string::npos) {
      additions.push_back(kw);
    }
  }
  std::string out;
  if (additions.empty()) {
    // Nothing actionable: echo the prompt as a single well-formed span.
    return "<START>" + cur_prompt + "<END>";
  }
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(samples),
                                                  additions.size());
  for (std::size_t i = 0; i < count; ++i) {
    if (i > 0) out += "\n";
    out += "<START>" + cur_prompt + " " + additions[i] + "<END>";
  }
  return out;
}

std::string SimulatedOptimizerBackend::complete(const std::string& input) {
  if (input.empty()) throw std::invalid_argument("complete: empty input");
  const std::string cur_prompt =
      slice_between(input, "My current prompt is:", "But this prompt gets");
  if (cur_prompt.empty()) {
    return "<START>" + input + "<END>";
  }
  if (input.find("new prompts following these guidelines") != std::string::npos) {
    return transitions_for(cur_prompt, input);
  }
  if (input.find("summarize and list all the aspects") != std::string::npos) {
    return feedback_for(cur_prompt, input);
  }
  return "<START>" + cur_prompt + "<END>";
}

}  // namespace pmcts
