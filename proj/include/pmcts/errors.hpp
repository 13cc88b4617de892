#pragma once

#include <stdexcept>

namespace pmcts {

// Bad flags, malformed task/config files, invalid templates.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dataset loading or splitting problems.
struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A model endpoint stayed unreachable after the configured retries.
struct BackendUnavailable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Trace file problems: missing file, corrupt JSON, unknown schema version.
struct TraceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tree wiring contract violations (wrong parent/child links, bad paths).
struct StructuralError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace pmcts
