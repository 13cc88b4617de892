#pragma once

#include <string>
#include <vector>

#include "pmcts/backend.hpp"
#include "pmcts/config.hpp"
#include "pmcts/meta_prompts.hpp"
#include "pmcts/rng.hpp"
#include "pmcts/search_tree.hpp"
#include "pmcts/task.hpp"

namespace pmcts {

// One base-model mistake, as fed into the error-string block.
struct ErrorRecord {
  std::string example_id;
  std::string question;
  std::string model_response;
  std::string gold_label;
  std::string predicted_label;
};

// Shared instrumentation. The planner and every baseline funnel through the
// same expand/evaluate path, so these counters double as budget accounting.
struct ExpansionStats {
  long long expand_calls = 0;
  long long prompts_generated = 0;   // candidate states created (incl. terminal)
  long long reward_evaluations = 0;
  long long error_batches = 0;       // batches that produced feedback
  long long perfect_prompt_batches = 0;
  long long malformed_batches = 0;
  long long degenerate_children = 0;
};

// Samples batches of batch_size train examples (without replacement inside a
// batch, independently across batches) and runs the base model on each until
// a batch yields at least one error, at most max_attempts batches. An empty
// result is the perfect-prompt signal: the caller skips this batch.
std::vector<ErrorRecord> collect_errors(const std::string& prompt, const Task& task,
                                        int batch_size, int max_attempts, Rng& rng,
                                        Backend& base);

// Concatenates per-error blocks in the fixed layout, numbered from 0.
std::string format_error_string(const std::vector<ErrorRecord>& errors,
                                const MetaPromptSet& meta);

// Renders the error-feedback meta-prompt and returns the optimizer completion
// verbatim as the action's feedback text. Ids are assigned by the caller.
Action generate_feedback(const std::string& prompt, const std::string& error_string,
                         Backend& optimizer, const MetaPromptSet& meta);

// Renders the state-transition meta-prompt and parses every <START>...<END>
// span, keeping at most num_samples in order. Retries the optimizer call up
// to `retries` extra times when no span parses; an empty result after that is
// the malformed-transition signal.
std::vector<std::string> transit_state(const std::string& prompt, const Action& action,
                                       const std::vector<std::string>& trajectory_prompts,
                                       int num_samples, int retries, Backend& optimizer,
                                       const MetaPromptSet& meta);

// Full expansion of one non-terminal node: expand_width batches of
// collect_errors -> generate_feedback -> transit_state, each candidate
// evaluated on the held-out set and attached with its terminal flag. Nodes
// whose batches all get skipped are marked unexpandable. Returns created ids.
// width/num_samples of 0 fall back to the config values.
std::vector<NodeId> expand(NodeId node_id, SearchTree& tree, const Task& task,
                           const SearchConfig& config, Backends backends,
                           const MetaPromptSet& meta, Rng& rng, ExpansionStats& stats,
                           int width_override = 0, int num_samples_override = 0);

// Playout: from a just-expanded node, repeatedly step into the highest-reward
// child (ties to the lowest index) and expand it, until a terminal flag fires
// or expansion yields nothing. Returns the appended path extension; each
// appended node's visit count is bumped once.
std::vector<NodeId> simulate(NodeId node_id, SearchTree& tree, const Task& task,
                             const SearchConfig& config, Backends backends,
                             const MetaPromptSet& meta, Rng& rng, ExpansionStats& stats);

}  // namespace pmcts
