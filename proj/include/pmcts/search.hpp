#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pmcts/backend.hpp"
#include "pmcts/config.hpp"
#include "pmcts/expansion.hpp"
#include "pmcts/meta_prompts.hpp"
#include "pmcts/search_tree.hpp"
#include "pmcts/task.hpp"

namespace pmcts {

// Q(child) + c * sqrt(ln N(parent) / N(child)). An unvisited child returns
// +infinity so every child is tried once before any repeat visit.
double uct_score(const SearchTree& tree, NodeId parent, NodeId child,
                 double exploration_weight);

// Walks from the root, appending the UCT-maximizing child at each level (ties
// to the lowest child index), and stops at the first node with no children or
// a terminal flag. Every node on the returned path has its visit count bumped
// once; the scores at each level use the pre-bump counts.
std::vector<NodeId> select_path(SearchTree& tree, double exploration_weight);

// Terminal rule: depth_limit at depth >= limit; below that, once depth exceeds
// early_stop_min_depth, early_low when reward < mean(parent, root) and
// early_high when reward > max reward over nodes currently in the tree. The
// candidate itself need not be in the tree yet.
TerminalFlag check_terminal(const SearchNode& candidate, const SearchTree& tree,
                            const SearchConfig& config);

// Appends the trajectory's suffix reward sum to every node on the path and
// refreshes each q_value as the mean of its accumulated sums.
void backpropagate(SearchTree& tree, const std::vector<NodeId>& path);

struct OutputChoice {
  NodeId node = -1;
  std::vector<NodeId> path;
};

// Among logged iteration paths, the one with the highest mean node reward
// wins (earliest iteration on ties); the result is that path's highest-reward
// node (closest to the root on ties).
OutputChoice select_output_choice(const SearchTree& tree);
PromptState select_output(const SearchTree& tree);

struct RunResult {
  std::optional<PromptState> best;
  int completed_iterations = 0;
  bool aborted = false;      // backend failed after retries; tree is partial
  std::string error;
};

// Owns one search: tree, task, config, backends, meta-prompts. All tree
// mutation happens on the caller's thread; only reward evaluation fans out.
class SearchEngine {
 public:
  SearchEngine(Task task, SearchConfig config, Backends backends, MetaPromptSet meta);

  // Continue a persisted run; iterations already logged are not repeated.
  static SearchEngine resume(SearchTree tree, Task task, SearchConfig config,
                             Backends backends, MetaPromptSet meta);

  // Creates and evaluates the root if the tree is empty.
  void ensure_root();

  // One full pass: selection, expansion, simulation, back-propagation.
  void run_iteration();

  // Runs to config.iterations; a backend failure stops early with the
  // partial tree kept intact.
  RunResult run();

  int completed_iterations() const;
  const SearchTree& tree() const { return tree_; }
  SearchTree& tree_mut() { return tree_; }
  const ExpansionStats& stats() const { return stats_; }
  const Task& task() const { return task_; }
  const SearchConfig& config() const { return config_; }

 private:
  Task task_;
  SearchConfig config_;
  Backends backends_;
  MetaPromptSet meta_;
  SearchTree tree_;
  ExpansionStats stats_;
};

// Convenience wrapper: fresh engine, full run.
std::pair<RunResult, SearchTree> run_search(const Task& task, const SearchConfig& config,
                                            Backends backends, const MetaPromptSet& meta);

}  // namespace pmcts
