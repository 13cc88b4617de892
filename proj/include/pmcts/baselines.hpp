#pragma once

#include <cstdint>
#include <vector>

#include "pmcts/backend.hpp"
#include "pmcts/expansion.hpp"
#include "pmcts/meta_prompts.hpp"
#include "pmcts/search_tree.hpp"
#include "pmcts/task.hpp"

namespace pmcts {

// Ablation searchers. All three consume the same expand/evaluate machinery as
// the planner so comparisons isolate the strategy; early stopping is disabled
// (their budgets assume full levels) and depth alone terminates paths.
struct BaselineResult {
  PromptState best;
  SearchTree tree;
  ExpansionStats stats;
  long long explored = 0;  // candidate prompts actually generated
  std::vector<NodeId> candidates;
  bool aborted = false;    // backend failed after retries; tree is partial
  std::string error;
};

// One-step sampling: `budget` children of the root, best one wins.
BaselineResult mc_search(const Task& task, int budget, Backends backends,
                         const MetaPromptSet& meta, std::uint64_t seed);

// Depth-first greedy descent: expand the current node `expand_width` times,
// follow the highest-reward child, for `depth` levels. Best node seen wins.
BaselineResult greedy_search(const Task& task, int depth, int expand_width,
                             Backends backends, const MetaPromptSet& meta,
                             std::uint64_t seed);

// Root expands into beam_width x per_node_expansion nodes; afterwards each
// kept node expands per_node_expansion times and the top beam_width survive
// per level, for `depth` levels. Best node overall wins.
BaselineResult beam_search(const Task& task, int beam_width, int per_node_expansion,
                           int depth, Backends backends, const MetaPromptSet& meta,
                           std::uint64_t seed);

}  // namespace pmcts
