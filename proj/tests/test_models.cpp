#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "helpers.hpp"
#include "pmcts/backend.hpp"
#include "pmcts/errors.hpp"
#include "pmcts/rng.hpp"

using namespace pmcts;
using testutil::acceptance_bundle;

TEST_CASE("landscape coverage and satisfaction") {
  SimulatedLandscape land;
  land.keywords = {"atlas", "breve", "cinder"};
  land.required["e1"] = {"atlas"};
  land.required["e2"] = {"atlas", "cinder"};
  land.validate();
  CHECK(land.covered("mentions atlas and breve") ==
        std::vector<std::string>{"atlas", "breve"});
  CHECK(land.satisfied("atlas here", "e1"));
  CHECK(!land.satisfied("atlas here", "e2"));
  CHECK(land.satisfied("atlas plus cinder", "e2"));
}

TEST_CASE("simulated base answers wrong without the required keyword") {
  auto bundle = acceptance_bundle();
  // Find an example requiring a keyword outside the root prompt.
  const auto& keywords = bundle.synth.landscape.keywords;
  const std::string& missing = keywords[5];
  const Example* example = nullptr;
  for (const auto& e : bundle.synth.examples) {
    if (bundle.synth.landscape.required.at(e.id) == std::vector<std::string>{missing}) {
      example = &e;
      break;
    }
  }
  REQUIRE(example != nullptr);

  const std::string bare = format_input(bundle.task.spec,
                                        bundle.task.spec.initial_prompt, *example);
  const PerExampleRow wrong =
      score_example(bundle.task.spec, *example, bundle.base->complete(bare));
  CHECK(!wrong.correct);
  CHECK(wrong.parsed);  // a wrong label, not garbage

  const std::string covered = format_input(
      bundle.task.spec, bundle.task.spec.initial_prompt + " " + missing, *example);
  const PerExampleRow right =
      score_example(bundle.task.spec, *example, bundle.base->complete(covered));
  CHECK(right.correct);
}

TEST_CASE("simulated base answers gold everywhere under the full prompt") {
  auto bundle = acceptance_bundle();
  std::string full = bundle.task.spec.initial_prompt;
  for (const auto& kw : bundle.synth.landscape.keywords) full += " " + kw;
  for (const auto& e : bundle.synth.examples) {
    const std::string input = format_input(bundle.task.spec, full, e);
    const PerExampleRow row =
        score_example(bundle.task.spec, e, bundle.base->complete(input));
    CHECK(row.correct);
  }
}

TEST_CASE("simulated backends are referentially transparent") {
  auto bundle = acceptance_bundle();
  const std::string input = format_input(bundle.task.spec,
                                         bundle.task.spec.initial_prompt,
                                         bundle.synth.examples[10]);
  CHECK(bundle.base->complete(input) == bundle.base->complete(input));

  const std::string request =
      "My current prompt is:\nP\nBut this prompt gets the following examples wrong:\n" +
      bundle.synth.examples[10].question +
      "\nsummarize and list all the aspects that can improve the prompt.";
  CHECK(bundle.optimizer->complete(request) == bundle.optimizer->complete(request));
}

TEST_CASE("landscape reward is monotone under keyword inclusion") {
  auto bundle = acceptance_bundle();
  const auto& keywords = bundle.synth.landscape.keywords;
  Rng rng(77);
  for (int round = 0; round < 40; ++round) {
    std::string prompt = "Judge the submissions.";
    std::vector<std::string> absent;
    for (const auto& kw : keywords) {
      if (rng.bounded(2) == 0) {
        prompt += " " + kw;
      } else {
        absent.push_back(kw);
      }
    }
    const double before =
        bundle.synth.landscape.score(prompt, bundle.task.split.heldout);
    if (absent.empty()) continue;
    const std::string& added = absent[rng.bounded(absent.size())];
    const double after =
        bundle.synth.landscape.score(prompt + " " + added, bundle.task.split.heldout);
    CHECK(after >= before);
  }
}

TEST_CASE("simulated optimizer rewrites prompts around missing keywords") {
  auto bundle = acceptance_bundle();
  const std::string& missing = bundle.synth.landscape.keywords[6];
  const std::string request =
      "My current prompt is:\n\nJudge the cases.\n\n"
      "But this prompt gets the following examples wrong:\n\nE\n\n"
      "Based on these errors, the problems with this prompt and the reasons are:\n\n"
      "The prompt does not mention " + missing + ".\n\n"
      "There is a list of former prompts including the current prompt, and each "
      "prompt is modified from its former prompts:\n\nJudge the cases.\n\n"
      "Based on the above information, please write 1 new prompts following these "
      "guidelines:\n\n3. Each new prompt should be wrapped with <START> and <END>.\n\n"
      "The new prompts are:";
  const std::string completion = bundle.optimizer->complete(request);
  CHECK(completion == "<START>Judge the cases. " + missing + "<END>");
}

TEST_CASE("simulated optimizer echoes a no-op transition when nothing is missing") {
  auto bundle = acceptance_bundle();
  const std::string request =
      "My current prompt is:\n\nJudge the cases.\n\n"
      "But this prompt gets the following examples wrong:\n\nE\n\n"
      "Based on these errors, the problems with this prompt and the reasons are:\n\n"
      "Nothing is missing.\n\n"
      "There is a list of former prompts including the current prompt, and each "
      "prompt is modified from its former prompts:\n\nJudge the cases.\n\n"
      "Based on the above information, please write 1 new prompts following these "
      "guidelines:\n\n3. Each new prompt should be wrapped with <START> and <END>.\n\n"
      "The new prompts are:";
  CHECK(bundle.optimizer->complete(request) == "<START>Judge the cases.<END>");
}

TEST_CASE("simulated optimizer falls back to a well-formed no-op on odd input") {
  auto bundle = acceptance_bundle();
  const std::string completion = bundle.optimizer->complete("unrecognizable request");
  CHECK(completion.find("<START>") != std::string::npos);
  CHECK(completion.find("<END>") != std::string::npos);
}

// ---------------------------------------------------------------------------
// HTTP backend against a local server.

namespace {

struct TestServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit TestServer(httplib::Server::Handler handler) {
    server.Post("/v1/chat/completions", std::move(handler));
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~TestServer() {
    server.stop();
    thread.join();
  }
  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port) + "/v1";
  }
};

std::string chat_body(const std::string& content) {
  return nlohmann::json{
      {"choices",
       nlohmann::json::array(
           {nlohmann::json{{"message", nlohmann::json{{"content", content}}}}})}}
      .dump();
}

BackendConfig http_config(const std::string& endpoint, int max_retries = 1,
                          int max_parallel = 8) {
  BackendConfig config = default_base_config(BackendKind::http);
  config.endpoint = endpoint;
  config.model_name = "test-model";
  config.max_retries = max_retries;
  config.max_parallel = max_parallel;
  config.backoff_base_ms = 1;
  config.timeout_ms = 2000;
  return config;
}

}  // namespace

TEST_CASE("http backend posts the chat payload and returns the first choice") {
  std::string seen_body;
  std::string seen_auth;
  TestServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen_body = req.body;
    seen_auth = req.get_header_value("Authorization");
    res.set_content(chat_body("pong"), "application/json");
  });
  setenv("PROMPT_MCTS_API_KEY", "sk-test", 1);
  HttpBackend backend(http_config(server.endpoint()));
  CHECK(backend.complete("ping") == "pong");
  unsetenv("PROMPT_MCTS_API_KEY");

  const auto body = nlohmann::json::parse(seen_body);
  CHECK(body.at("model") == "test-model");
  CHECK(body.at("temperature") == 0.0);
  CHECK(body.at("messages").at(0).at("role") == "user");
  CHECK(body.at("messages").at(0).at("content") == "ping");
  CHECK(seen_auth == "Bearer sk-test");
}

TEST_CASE("http backend retries transient failures with backoff") {
  std::atomic<int> hits{0};
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    if (hits.fetch_add(1) < 2) {
      res.status = 503;
      return;
    }
    res.set_content(chat_body("recovered"), "application/json");
  });
  HttpBackend backend(http_config(server.endpoint(), /*max_retries=*/3));
  CHECK(backend.complete("ping") == "recovered");
  CHECK(hits.load() == 3);
}

TEST_CASE("http backend maps client errors to ConfigError without retry") {
  std::atomic<int> hits{0};
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    hits.fetch_add(1);
    res.status = 400;
    res.set_content("bad request", "text/plain");
  });
  HttpBackend backend(http_config(server.endpoint(), /*max_retries=*/3));
  CHECK_THROWS_AS(backend.complete("ping"), ConfigError);
  CHECK(hits.load() == 1);
}

TEST_CASE("http backend reports BackendUnavailable after exhausted retries") {
  HttpBackend backend(http_config("http://127.0.0.1:9/v1", /*max_retries=*/1));
  CHECK_THROWS_AS(backend.complete("ping"), BackendUnavailable);
}

TEST_CASE("http backend caps in-flight requests at max_parallel") {
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    const int now = in_flight.fetch_add(1) + 1;
    int expected = peak.load();
    while (now > expected && !peak.compare_exchange_weak(expected, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    in_flight.fetch_sub(1);
    res.set_content(chat_body("ok"), "application/json");
  });
  HttpBackend backend(http_config(server.endpoint(), 1, /*max_parallel=*/2));
  std::vector<std::thread> callers;
  std::atomic<int> ok{0};
  for (int i = 0; i < 8; ++i) {
    callers.emplace_back([&] {
      if (backend.complete("ping") == "ok") ok.fetch_add(1);
    });
  }
  for (auto& t : callers) t.join();
  CHECK(ok.load() == 8);
  CHECK(peak.load() <= 2);
}

TEST_CASE("backend config validation") {
  BackendConfig config = default_base_config(BackendKind::http);
  CHECK_THROWS_AS(config.validate(), ConfigError);  // endpoint missing
  config.endpoint = "http://localhost:1/v1";
  config.temperature = -0.5;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.temperature = 0.0;
  config.validate();
  CHECK_THROWS_AS(HttpBackend(default_base_config(BackendKind::simulated)), ConfigError);

  CHECK(default_base_config(BackendKind::simulated).temperature == 0.0);
  CHECK(default_optimizer_config(BackendKind::simulated).temperature == 1.0);
}
