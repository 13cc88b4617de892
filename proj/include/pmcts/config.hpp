#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace pmcts {

enum class Preset { standard, wide, lite, custom };

std::string to_string(Preset p);
Preset preset_from_string(const std::string& s);

// All planner hyperparameters. Presets follow the standard/wide/lite settings:
// standard (depth 8, width 3, 1 sample), wide (6, 3, 2), lite (4, 3, 1).
struct SearchConfig {
  int iterations = 12;
  double exploration_weight = 2.5;
  int depth_limit = 8;
  int expand_width = 3;
  int num_samples = 1;
  int batch_size = 5;
  int early_stop_min_depth = 2;
  std::uint64_t random_seed = 0;
  Preset preset = Preset::custom;
  // Bound on the resample loop when a batch produces no errors.
  int max_batch_attempts = 10;
  // Extra optimizer calls when a transition parses no <START>/<END> span.
  int transit_retries = 2;

  static SearchConfig with_preset(Preset p);

  // Throws ConfigError on out-of-range values or a preset/field mismatch.
  void validate() const;

  bool matches_preset_table() const;
};

void to_json(nlohmann::json& j, const SearchConfig& c);
void from_json(const nlohmann::json& j, SearchConfig& c);

enum class BackendRole { base, optimizer };
enum class BackendKind { http, simulated };

std::string to_string(BackendRole r);
std::string to_string(BackendKind k);
BackendRole backend_role_from_string(const std::string& s);
BackendKind backend_kind_from_string(const std::string& s);

// One chat-completion endpoint (real or simulated). Base models predict at
// temperature 0.0; the optimizer runs at 1.0.
struct BackendConfig {
  BackendRole role = BackendRole::base;
  BackendKind kind = BackendKind::simulated;
  std::string endpoint;
  std::string model_name = "simulated";
  double temperature = 0.0;
  int max_retries = 5;
  int timeout_ms = 30000;
  int max_parallel = 8;
  int backoff_base_ms = 250;

  void validate() const;
};

void to_json(nlohmann::json& j, const BackendConfig& c);
void from_json(const nlohmann::json& j, BackendConfig& c);

}  // namespace pmcts
