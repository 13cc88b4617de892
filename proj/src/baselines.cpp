#include "pmcts/baselines.hpp"

#include <algorithm>
#include <stdexcept>

#include "pmcts/errors.hpp"
#include "pmcts/rng.hpp"
#include "pmcts/search.hpp"

namespace pmcts {

namespace {

// Depth is the only terminal condition for baselines: the gate
// depth > early_stop_min_depth can never open when the gate sits at the
// depth limit itself.
SearchConfig baseline_config(int depth_limit, std::uint64_t seed) {
  SearchConfig config;
  config.preset = Preset::custom;
  config.depth_limit = depth_limit;
  config.early_stop_min_depth = depth_limit;
  config.random_seed = seed;
  return config;
}

void evaluate_root(SearchTree& tree, const Task& task, Backends backends,
                   ExpansionStats& stats) {
  const NodeId root = tree.create_root(task.spec.initial_prompt);
  const EvalResult eval = evaluate_prompt(task.spec.initial_prompt, task.spec,
                                          task.split.heldout, *backends.base);
  stats.reward_evaluations += 1;
  tree.node_mut(root).reward = eval.score;
}

NodeId best_node(const SearchTree& tree, bool include_root) {
  NodeId best = -1;
  for (const auto& [id, node] : tree.nodes()) {
    if (!include_root && !node.parent) continue;
    if (best < 0 || node.reward > tree.node(best).reward) best = id;
  }
  return best;
}

void finish(BaselineResult& result, bool include_root) {
  result.explored = result.stats.prompts_generated;
  const NodeId winner = best_node(result.tree, include_root);
  result.best = result.tree.node(winner < 0 ? result.tree.root() : winner).state;
}

}  // namespace

BaselineResult mc_search(const Task& task, int budget, Backends backends,
                         const MetaPromptSet& meta, std::uint64_t seed) {
  if (budget < 1) throw std::invalid_argument("mc_search: budget must be >= 1");
  BaselineResult result;
  const SearchConfig config = baseline_config(1, seed);
  try {
    evaluate_root(result.tree, task, backends, result.stats);
    Rng rng(Rng::derive(seed, 0));
    result.candidates = expand(result.tree.root(), result.tree, task, config, backends,
                               meta, rng, result.stats, budget, 1);
  } catch (const BackendUnavailable& e) {
    result.aborted = true;
    result.error = e.what();
  }
  finish(result, /*include_root=*/result.candidates.empty());
  return result;
}

BaselineResult greedy_search(const Task& task, int depth, int expand_width,
                             Backends backends, const MetaPromptSet& meta,
                             std::uint64_t seed) {
  if (depth < 1) throw std::invalid_argument("greedy_search: depth must be >= 1");
  if (expand_width < 1) {
    throw std::invalid_argument("greedy_search: expand_width must be >= 1");
  }
  BaselineResult result;
  const SearchConfig config = baseline_config(depth, seed);
  try {
    evaluate_root(result.tree, task, backends, result.stats);
    NodeId cursor = result.tree.root();
    for (int level = 0; level < depth; ++level) {
      Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(level)));
      const auto children = expand(cursor, result.tree, task, config, backends, meta,
                                   rng, result.stats, expand_width, 1);
      if (children.empty()) break;  // unexpandable node ends the descent
      NodeId best = children.front();
      for (const NodeId child : children) {
        if (result.tree.node(child).reward > result.tree.node(best).reward) best = child;
      }
      cursor = best;
    }
  } catch (const BackendUnavailable& e) {
    result.aborted = true;
    result.error = e.what();
  }
  finish(result, /*include_root=*/true);
  return result;
}

BaselineResult beam_search(const Task& task, int beam_width, int per_node_expansion,
                           int depth, Backends backends, const MetaPromptSet& meta,
                           std::uint64_t seed) {
  if (beam_width < 1 || per_node_expansion < 1) {
    throw std::invalid_argument("beam_search: widths must be >= 1");
  }
  if (depth < 1) throw std::invalid_argument("beam_search: depth must be >= 1");
  BaselineResult result;
  const SearchConfig config = baseline_config(depth, seed);
  try {
    evaluate_root(result.tree, task, backends, result.stats);
    std::vector<NodeId> beam = {result.tree.root()};
    for (int level = 0; level < depth; ++level) {
      Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(level)));
      // The root level spreads the whole beam budget over the single root.
      const int width = level == 0 ? beam_width * per_node_expansion : per_node_expansion;
      std::vector<NodeId> generation;
      for (const NodeId node : beam) {
        const auto children = expand(node, result.tree, task, config, backends, meta,
                                     rng, result.stats, width, 1);
        generation.insert(generation.end(), children.begin(), children.end());
      }
      if (generation.empty()) break;  // no expandable node left at this level
      std::sort(generation.begin(), generation.end(), [&](NodeId a, NodeId b) {
        const double ra = result.tree.node(a).reward;
        const double rb = result.tree.node(b).reward;
        if (ra != rb) return ra > rb;
        return a < b;
      });
      if (static_cast<int>(generation.size()) > beam_width) {
        generation.resize(static_cast<std::size_t>(beam_width));
      }
      beam = std::move(generation);
    }
  } catch (const BackendUnavailable& e) {
    result.aborted = true;
    result.error = e.what();
  }
  finish(result, /*include_root=*/true);
  return result;
}

}  // namespace pmcts
