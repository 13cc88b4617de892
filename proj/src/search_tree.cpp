#include "pmcts/search_tree.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "pmcts/errors.hpp"

namespace pmcts {

std::string to_string(TerminalFlag f) {
  switch (f) {
    case TerminalFlag::none: return "none";
    case TerminalFlag::depth_limit: return "depth_limit";
    case TerminalFlag::early_low: return "early_low";
    case TerminalFlag::early_high: return "early_high";
  }
  return "none";
}

TerminalFlag terminal_flag_from_string(const std::string& s) {
  if (s == "none") return TerminalFlag::none;
  if (s == "depth_limit") return TerminalFlag::depth_limit;
  if (s == "early_low") return TerminalFlag::early_low;
  if (s == "early_high") return TerminalFlag::early_high;
  throw TraceError("unknown terminal flag: " + s);
}

NodeId SearchTree::create_root(std::string text) {
  if (has_root()) throw StructuralError("tree already has a root");
  if (text.empty()) throw std::invalid_argument("prompt text must be non-empty");
  SearchNode node;
  node.state.id = next_node_id_++;
  node.state.text = std::move(text);
  node.state.depth = 0;
  root_ = node.state.id;
  nodes_.emplace(node.state.id, std::move(node));
  return root_;
}

NodeId SearchTree::add_child(NodeId parent, std::string text,
                             std::optional<ActionId> action, double reward,
                             TerminalFlag flag, bool degenerate) {
  if (text.empty()) throw std::invalid_argument("prompt text must be non-empty");
  auto parent_it = nodes_.find(parent);
  if (parent_it == nodes_.end()) {
    throw StructuralError("add_child: unknown parent " + std::to_string(parent));
  }
  if (action && actions_.find(*action) == actions_.end()) {
    throw StructuralError("add_child: unknown action " + std::to_string(*action));
  }
  SearchNode node;
  node.state.id = next_node_id_++;
  node.state.text = std::move(text);
  node.state.depth = parent_it->second.state.depth + 1;
  node.parent = parent;
  node.incoming_action = action;
  node.reward = reward;
  node.terminal_flag = flag;
  node.degenerate = degenerate;
  parent_it->second.children.push_back(node.state.id);
  const NodeId id = node.state.id;
  nodes_.emplace(id, std::move(node));
  return id;
}

ActionId SearchTree::add_action(Action action) {
  action.id = next_action_id_++;
  const ActionId id = action.id;
  actions_.emplace(id, std::move(action));
  return id;
}

NodeId SearchTree::root() const {
  if (!has_root()) throw StructuralError("tree has no root");
  return root_;
}

const SearchNode& SearchTree::node(NodeId id) const {
  const auto it = nodes_.find(id);
  if (it == nodes_.end()) throw StructuralError("unknown node " + std::to_string(id));
  return it->second;
}

SearchNode& SearchTree::node_mut(NodeId id) {
  const auto it = nodes_.find(id);
  if (it == nodes_.end()) throw StructuralError("unknown node " + std::to_string(id));
  return it->second;
}

const Action& SearchTree::action(ActionId id) const {
  const auto it = actions_.find(id);
  if (it == actions_.end()) throw StructuralError("unknown action " + std::to_string(id));
  return it->second;
}

void SearchTree::record_iteration(std::vector<NodeId> path) {
  for (const NodeId id : path) {
    if (!contains(id)) {
      throw StructuralError("iteration path references unknown node " + std::to_string(id));
    }
  }
  IterationRecord record;
  record.iteration = static_cast<int>(iteration_log_.size());
  record.path = std::move(path);
  record.timestamp = static_cast<std::uint64_t>(iteration_log_.size());
  iteration_log_.push_back(std::move(record));
}

double SearchTree::max_reward() const {
  double best = 0.0;
  bool any = false;
  for (const auto& [id, node] : nodes_) {
    if (!any || node.reward > best) {
      best = node.reward;
      any = true;
    }
  }
  return any ? best : 0.0;
}

std::vector<NodeId> SearchTree::path_from_root(NodeId id) const {
  std::vector<NodeId> path;
  NodeId cursor = id;
  while (true) {
    const SearchNode& n = node(cursor);
    path.push_back(cursor);
    if (!n.parent) break;
    cursor = *n.parent;
    if (path.size() > nodes_.size()) throw StructuralError("parent chain has a cycle");
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<std::string> SearchTree::trajectory_prompts(NodeId id) const {
  std::vector<std::string> prompts;
  for (const NodeId n : path_from_root(id)) prompts.push_back(node(n).state.text);
  return prompts;
}

void SearchTree::validate() const {
  if (!has_root()) throw StructuralError("tree has no root");
  const SearchNode& root_node = node(root_);
  if (root_node.parent) throw StructuralError("root has a parent");
  if (root_node.state.depth != 0) throw StructuralError("root depth is not 0");

  std::set<NodeId> seen_children;
  for (const auto& [id, n] : nodes_) {
    if (n.state.text.empty()) throw StructuralError("node with empty prompt text");
    if (id != root_ && !n.parent) {
      throw StructuralError("non-root node " + std::to_string(id) + " has no parent");
    }
    if (n.parent) {
      const SearchNode& p = node(*n.parent);
      if (n.state.depth != p.state.depth + 1) {
        throw StructuralError("depth mismatch at node " + std::to_string(id));
      }
      if (std::find(p.children.begin(), p.children.end(), id) == p.children.end()) {
        throw StructuralError("node " + std::to_string(id) +
                              " missing from its parent's children");
      }
    }
    for (const NodeId c : n.children) {
      if (!contains(c)) {
        throw StructuralError("child id " + std::to_string(c) + " not in tree");
      }
      if (!seen_children.insert(c).second) {
        throw StructuralError("node " + std::to_string(c) + " has two parents");
      }
      if (node(c).parent != id) {
        throw StructuralError("child " + std::to_string(c) + " disagrees about parent");
      }
    }
    if (n.incoming_action && actions_.find(*n.incoming_action) == actions_.end()) {
      throw StructuralError("node " + std::to_string(id) + " references unknown action");
    }
    if (!n.cumulative_rewards.empty()) {
      double sum = 0.0;
      for (const double r : n.cumulative_rewards) sum += r;
      const double mean = sum / static_cast<double>(n.cumulative_rewards.size());
      if (std::abs(mean - n.q_value) >= 1e-12) {
        throw StructuralError("q_value inconsistent at node " + std::to_string(id));
      }
    }
  }
  // Every node must hang off the root (no disconnected components, no cycles).
  for (const auto& [id, n] : nodes_) {
    (void)n;
    if (path_from_root(id).front() != root_) {
      throw StructuralError("node " + std::to_string(id) + " not rooted");
    }
  }
  for (const auto& record : iteration_log_) {
    for (const NodeId id : record.path) {
      if (!contains(id)) throw StructuralError("iteration log references unknown node");
    }
  }
}

SearchTree SearchTree::from_parts(std::map<NodeId, SearchNode> nodes,
                                  std::map<ActionId, Action> actions,
                                  std::vector<IterationRecord> log) {
  SearchTree tree;
  tree.nodes_ = std::move(nodes);
  tree.actions_ = std::move(actions);
  tree.iteration_log_ = std::move(log);
  for (const auto& [id, node] : tree.nodes_) {
    if (!node.parent) {
      if (tree.root_ >= 0) throw StructuralError("trace holds two roots");
      tree.root_ = id;
    }
    tree.next_node_id_ = std::max(tree.next_node_id_, id + 1);
  }
  for (const auto& [id, action] : tree.actions_) {
    (void)action;
    tree.next_action_id_ = std::max(tree.next_action_id_, id + 1);
  }
  tree.validate();
  return tree;
}

}  // namespace pmcts
