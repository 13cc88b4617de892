#include "pmcts/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pmcts/errors.hpp"

namespace pmcts {

double uct_score(const SearchTree& tree, NodeId parent, NodeId child,
                 double exploration_weight) {
  const SearchNode& p = tree.node(parent);
  const SearchNode& c = tree.node(child);
  if (std::find(p.children.begin(), p.children.end(), child) == p.children.end()) {
    throw StructuralError("uct_score: node " + std::to_string(child) +
                          " is not a child of " + std::to_string(parent));
  }
  if (p.visit_count < 1) {
    throw StructuralError("uct_score: parent " + std::to_string(parent) +
                          " has never been visited");
  }
  if (c.visit_count == 0) return std::numeric_limits<double>::infinity();
  return c.q_value +
         exploration_weight *
             std::sqrt(std::log(static_cast<double>(p.visit_count)) /
                       static_cast<double>(c.visit_count));
}

std::vector<NodeId> select_path(SearchTree& tree, double exploration_weight) {
  std::vector<NodeId> path;
  NodeId cursor = tree.root();
  path.push_back(cursor);
  while (true) {
    const SearchNode& current = tree.node(cursor);
    if (current.terminal_flag != TerminalFlag::none || current.children.empty()) break;
    NodeId best = current.children.front();
    double best_score = uct_score(tree, cursor, best, exploration_weight);
    for (std::size_t i = 1; i < current.children.size(); ++i) {
      const NodeId child = current.children[i];
      const double score = uct_score(tree, cursor, child, exploration_weight);
      if (score > best_score) {
        best = child;
        best_score = score;
      }
    }
    tree.node_mut(cursor).visit_count += 1;  // scores above used the old count
    path.push_back(best);
    cursor = best;
  }
  tree.node_mut(cursor).visit_count += 1;
  return path;
}

TerminalFlag check_terminal(const SearchNode& candidate, const SearchTree& tree,
                            const SearchConfig& config) {
  if (candidate.state.depth >= config.depth_limit) return TerminalFlag::depth_limit;
  if (candidate.state.depth <= config.early_stop_min_depth) return TerminalFlag::none;
  if (!candidate.parent) {
    throw StructuralError("check_terminal: node above the early-stop gate has no parent");
  }
  const SearchNode& parent = tree.node(*candidate.parent);
  const SearchNode& root = tree.node(tree.root());
  const double min_threshold = (parent.reward + root.reward) / 2.0;
  if (candidate.reward < min_threshold) return TerminalFlag::early_low;
  const double max_threshold = tree.max_reward();
  if (candidate.reward > max_threshold) return TerminalFlag::early_high;
  return TerminalFlag::none;
}

void backpropagate(SearchTree& tree, const std::vector<NodeId>& path) {
  if (path.empty()) throw StructuralError("backpropagate: empty path");
  if (path.front() != tree.root()) {
    throw StructuralError("backpropagate: path does not start at the root");
  }
  for (std::size_t i = 1; i < path.size(); ++i) {
    const SearchNode& n = tree.node(path[i]);
    if (!n.parent || *n.parent != path[i - 1]) {
      throw StructuralError("backpropagate: path is not a parent chain");
    }
  }
  double suffix = 0.0;
  for (std::size_t i = path.size(); i-- > 0;) {
    suffix += tree.node(path[i]).reward;
    SearchNode& n = tree.node_mut(path[i]);
    n.cumulative_rewards.push_back(suffix);
    double sum = 0.0;
    for (const double r : n.cumulative_rewards) sum += r;
    n.q_value = sum / static_cast<double>(n.cumulative_rewards.size());
  }
}

OutputChoice select_output_choice(const SearchTree& tree) {
  const auto& log = tree.iteration_log();
  if (log.empty()) {
    throw StructuralError("select_output: no iteration has been logged");
  }
  const std::vector<NodeId>* best_path = nullptr;
  double best_mean = 0.0;
  for (const auto& record : log) {
    if (record.path.empty()) continue;
    double sum = 0.0;
    for (const NodeId id : record.path) sum += tree.node(id).reward;
    const double mean = sum / static_cast<double>(record.path.size());
    if (best_path == nullptr || mean > best_mean) {  // earliest wins ties
      best_path = &record.path;
      best_mean = mean;
    }
  }
  if (best_path == nullptr) {
    throw StructuralError("select_output: every logged path is empty");
  }
  OutputChoice choice;
  choice.path = *best_path;
  choice.node = best_path->front();
  for (const NodeId id : *best_path) {  // ties keep the node closest to the root
    if (tree.node(id).reward > tree.node(choice.node).reward) choice.node = id;
  }
  return choice;
}

PromptState select_output(const SearchTree& tree) {
  return tree.node(select_output_choice(tree).node).state;
}

// ---------------------------------------------------------------------------
// SearchEngine

SearchEngine::SearchEngine(Task task, SearchConfig config, Backends backends,
                           MetaPromptSet meta)
    : task_(std::move(task)),
      config_(std::move(config)),
      backends_(backends),
      meta_(std::move(meta)) {
  config_.validate();
  task_.spec.validate();
  meta_.validate();
  if (backends_.base == nullptr || backends_.optimizer == nullptr) {
    throw ConfigError("search needs both a base and an optimizer backend");
  }
  if (task_.split.train.empty()) throw DatasetError("train: empty train set");
  if (task_.split.heldout.empty()) throw DatasetError("heldout: empty held-out set");
}

SearchEngine SearchEngine::resume(SearchTree tree, Task task, SearchConfig config,
                                  Backends backends, MetaPromptSet meta) {
  SearchEngine engine(std::move(task), std::move(config), backends, std::move(meta));
  tree.validate();
  engine.tree_ = std::move(tree);
  return engine;
}

void SearchEngine::ensure_root() {
  if (tree_.has_root()) return;
  const NodeId root = tree_.create_root(task_.spec.initial_prompt);
  const EvalResult eval = evaluate_prompt(task_.spec.initial_prompt, task_.spec,
                                          task_.split.heldout, *backends_.base);
  stats_.reward_evaluations += 1;
  tree_.node_mut(root).reward = eval.score;
}

int SearchEngine::completed_iterations() const {
  return static_cast<int>(tree_.iteration_log().size());
}

void SearchEngine::run_iteration() {
  ensure_root();
  // Batch sampling draws from a stream derived from (seed, iteration), so an
  // interrupted run resumes on exactly the sequence the full run would use.
  Rng rng(Rng::derive(config_.random_seed,
                      static_cast<std::uint64_t>(completed_iterations())));

  std::vector<NodeId> path = select_path(tree_, config_.exploration_weight);
  const NodeId leaf = path.back();
  const SearchNode& leaf_node = tree_.node(leaf);
  if (leaf_node.terminal_flag == TerminalFlag::none && !leaf_node.unexpandable) {
    const auto created =
        expand(leaf, tree_, task_, config_, backends_, meta_, rng, stats_);
    if (!created.empty()) {
      const auto extension =
          simulate(leaf, tree_, task_, config_, backends_, meta_, rng, stats_);
      path.insert(path.end(), extension.begin(), extension.end());
    }
  }
  backpropagate(tree_, path);
  tree_.record_iteration(std::move(path));
}

RunResult SearchEngine::run() {
  RunResult result;
  try {
    ensure_root();
    while (completed_iterations() < config_.iterations) {
      run_iteration();
    }
  } catch (const BackendUnavailable& e) {
    result.aborted = true;
    result.error = e.what();
  }
  result.completed_iterations = completed_iterations();
  if (!tree_.iteration_log().empty()) {
    result.best = select_output(tree_);
  } else if (tree_.has_root()) {
    result.best = tree_.node(tree_.root()).state;
  }
  return result;
}

std::pair<RunResult, SearchTree> run_search(const Task& task, const SearchConfig& config,
                                            Backends backends, const MetaPromptSet& meta) {
  SearchEngine engine(task, config, backends, meta);
  RunResult result = engine.run();
  return {std::move(result), std::move(engine.tree_mut())};
}

}  // namespace pmcts
