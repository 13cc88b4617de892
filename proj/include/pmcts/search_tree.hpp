#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pmcts {

using NodeId = std::int64_t;
using ActionId = std::int64_t;

// One version of the task prompt. Root depth is 0; children sit one level
// below their parent.
struct PromptState {
  NodeId id = -1;
  std::string text;
  int depth = 0;
};

// Error feedback produced by the optimizer from one batch of base-model
// mistakes. Edge label in the tree. error_string keeps the formatted errors
// the feedback was derived from; the state-transition template needs it.
struct Action {
  ActionId id = -1;
  std::string feedback_text;
  std::string error_string;
  std::vector<std::string> source_error_ids;
  int batch_index = 0;
};

enum class TerminalFlag { none, depth_limit, early_low, early_high };

std::string to_string(TerminalFlag f);
TerminalFlag terminal_flag_from_string(const std::string& s);

struct SearchNode {
  PromptState state;
  std::optional<NodeId> parent;
  std::optional<ActionId> incoming_action;
  double reward = 0.0;  // held-out metric, in [0, 1]
  int visit_count = 0;
  // One entry per back-propagated trajectory through this node; q_value is
  // their arithmetic mean whenever the list is non-empty.
  std::vector<double> cumulative_rewards;
  double q_value = 0.0;
  std::vector<NodeId> children;
  TerminalFlag terminal_flag = TerminalFlag::none;
  bool degenerate = false;    // text identical to the parent's
  bool unexpandable = false;  // every expansion batch was skipped
};

struct IterationRecord {
  int iteration = 0;
  std::vector<NodeId> path;
  std::uint64_t timestamp = 0;  // logical sequence number; runs stay replayable
};

// MCTS bookkeeping. Single logical writer; safe to hand between threads.
class SearchTree {
 public:
  SearchTree() = default;

  NodeId create_root(std::string text);
  NodeId add_child(NodeId parent, std::string text, std::optional<ActionId> action,
                   double reward, TerminalFlag flag, bool degenerate);
  ActionId add_action(Action action);  // assigns and returns the id

  bool has_root() const { return root_ >= 0; }
  NodeId root() const;
  const SearchNode& node(NodeId id) const;
  SearchNode& node_mut(NodeId id);
  const Action& action(ActionId id) const;
  bool contains(NodeId id) const { return nodes_.count(id) > 0; }
  std::size_t size() const { return nodes_.size(); }

  const std::map<NodeId, SearchNode>& nodes() const { return nodes_; }
  const std::map<ActionId, Action>& actions() const { return actions_; }
  const std::vector<IterationRecord>& iteration_log() const { return iteration_log_; }

  void record_iteration(std::vector<NodeId> path);

  double max_reward() const;

  // Node ids from the root down to id, inclusive.
  std::vector<NodeId> path_from_root(NodeId id) const;
  // Prompt texts along that path.
  std::vector<std::string> trajectory_prompts(NodeId id) const;

  // Structural contract: one root, consistent parent/child wiring, no cycles,
  // ids in children/iteration_log all resolvable, q matching its list.
  void validate() const;

  // Rebuild from persisted parts (trace loading).
  static SearchTree from_parts(std::map<NodeId, SearchNode> nodes,
                               std::map<ActionId, Action> actions,
                               std::vector<IterationRecord> log);

 private:
  NodeId root_ = -1;
  std::map<NodeId, SearchNode> nodes_;
  std::map<ActionId, Action> actions_;
  std::vector<IterationRecord> iteration_log_;
  NodeId next_node_id_ = 0;
  ActionId next_action_id_ = 0;
};

}  // namespace pmcts
