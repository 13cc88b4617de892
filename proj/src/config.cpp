#include "pmcts/config.hpp"

#include "pmcts/errors.hpp"

namespace pmcts {

std::string to_string(Preset p) {
  switch (p) {
    case Preset::standard: return "standard";
    case Preset::wide: return "wide";
    case Preset::lite: return "lite";
    case Preset::custom: return "custom";
  }
  return "custom";
}

Preset preset_from_string(const std::string& s) {
  if (s == "standard") return Preset::standard;
  if (s == "wide") return Preset::wide;
  if (s == "lite") return Preset::lite;
  if (s == "custom") return Preset::custom;
  throw ConfigError("unknown preset: " + s);
}

SearchConfig SearchConfig::with_preset(Preset p) {
  SearchConfig c;
  c.preset = p;
  switch (p) {
    case Preset::standard:
      c.depth_limit = 8;
      c.expand_width = 3;
      c.num_samples = 1;
      break;
    case Preset::wide:
      c.depth_limit = 6;
      c.expand_width = 3;
      c.num_samples = 2;
      break;
    case Preset::lite:
      c.depth_limit = 4;
      c.expand_width = 3;
      c.num_samples = 1;
      break;
    case Preset::custom:
      break;
  }
  return c;
}

bool SearchConfig::matches_preset_table() const {
  switch (preset) {
    case Preset::standard:
      return depth_limit == 8 && expand_width == 3 && num_samples == 1;
    case Preset::wide:
      return depth_limit == 6 && expand_width == 3 && num_samples == 2;
    case Preset::lite:
      return depth_limit == 4 && expand_width == 3 && num_samples == 1;
    case Preset::custom:
      return true;
  }
  return true;
}

void SearchConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (exploration_weight < 0.0) throw ConfigError("exploration_weight must be >= 0");
  if (depth_limit < 1) throw ConfigError("depth_limit must be >= 1");
  if (expand_width < 1) throw ConfigError("expand_width must be >= 1");
  if (num_samples < 1) throw ConfigError("num_samples must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (early_stop_min_depth < 0) throw ConfigError("early_stop_min_depth must be >= 0");
  if (max_batch_attempts < 1) throw ConfigError("max_batch_attempts must be >= 1");
  if (transit_retries < 0) throw ConfigError("transit_retries must be >= 0");
  if (!matches_preset_table()) {
    throw ConfigError("config fields do not match preset '" + to_string(preset) +
                      "'; use preset custom for overrides");
  }
}

void to_json(nlohmann::json& j, const SearchConfig& c) {
  j = nlohmann::json{
      {"iterations", c.iterations},
      {"exploration_weight", c.exploration_weight},
      {"depth_limit", c.depth_limit},
      {"expand_width", c.expand_width},
      {"num_samples", c.num_samples},
      {"batch_size", c.batch_size},
      {"early_stop_min_depth", c.early_stop_min_depth},
      {"random_seed", c.random_seed},
      {"preset", to_string(c.preset)},
      {"max_batch_attempts", c.max_batch_attempts},
      {"transit_retries", c.transit_retries},
  };
}

void from_json(const nlohmann::json& j, SearchConfig& c) {
  c = SearchConfig{};
  c.iterations = j.value("iterations", c.iterations);
  c.exploration_weight = j.value("exploration_weight", c.exploration_weight);
  c.depth_limit = j.value("depth_limit", c.depth_limit);
  c.expand_width = j.value("expand_width", c.expand_width);
  c.num_samples = j.value("num_samples", c.num_samples);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.early_stop_min_depth = j.value("early_stop_min_depth", c.early_stop_min_depth);
  c.random_seed = j.value("random_seed", c.random_seed);
  c.preset = preset_from_string(j.value("preset", std::string("custom")));
  c.max_batch_attempts = j.value("max_batch_attempts", c.max_batch_attempts);
  c.transit_retries = j.value("transit_retries", c.transit_retries);
}

std::string to_string(BackendRole r) {
  return r == BackendRole::base ? "base" : "optimizer";
}

std::string to_string(BackendKind k) {
  return k == BackendKind::http ? "http" : "simulated";
}

BackendRole backend_role_from_string(const std::string& s) {
  if (s == "base") return BackendRole::base;
  if (s == "optimizer") return BackendRole::optimizer;
  throw ConfigError("unknown backend role: " + s);
}

BackendKind backend_kind_from_string(const std::string& s) {
  if (s == "http") return BackendKind::http;
  if (s == "simulated") return BackendKind::simulated;
  throw ConfigError("unknown backend kind: " + s);
}

void BackendConfig::validate() const {
  if (kind == BackendKind::http && endpoint.empty()) {
    throw ConfigError("http backend requires an endpoint");
  }
  if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (max_parallel < 1) throw ConfigError("max_parallel must be >= 1");
  if (timeout_ms < 1) throw ConfigError("timeout_ms must be >= 1");
  if (backoff_base_ms < 0) throw ConfigError("backoff_base_ms must be >= 0");
}

void to_json(nlohmann::json& j, const BackendConfig& c) {
  j = nlohmann::json{
      {"role", to_string(c.role)},
      {"kind", to_string(c.kind)},
      {"endpoint", c.endpoint},
      {"model_name", c.model_name},
      {"temperature", c.temperature},
      {"max_retries", c.max_retries},
      {"timeout_ms", c.timeout_ms},
      {"max_parallel", c.max_parallel},
      {"backoff_base_ms", c.backoff_base_ms},
  };
}

void from_json(const nlohmann::json& j, BackendConfig& c) {
  c = BackendConfig{};
  c.role = backend_role_from_string(j.value("role", std::string("base")));
  c.kind = backend_kind_from_string(j.value("kind", std::string("simulated")));
  c.endpoint = j.value("endpoint", c.endpoint);
  c.model_name = j.value("model_name", c.model_name);
  c.temperature = j.value("temperature", c.temperature);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
  c.max_parallel = j.value("max_parallel", c.max_parallel);
  c.backoff_base_ms = j.value("backoff_base_ms", c.backoff_base_ms);
}

}  // namespace pmcts
