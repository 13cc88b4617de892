#include "pmcts/expansion.hpp"

#include <stdexcept>

#include "pmcts/errors.hpp"
#include "pmcts/search.hpp"

namespace pmcts {

std::vector<ErrorRecord> collect_errors(const std::string& prompt, const Task& task,
                                        int batch_size, int max_attempts, Rng& rng,
                                        Backend& base) {
  const auto& train = task.split.train;
  if (train.empty()) throw std::invalid_argument("collect_errors: empty train set");
  if (batch_size < 1 || static_cast<std::size_t>(batch_size) > train.size()) {
    throw std::invalid_argument("collect_errors: batch_size " +
                                std::to_string(batch_size) + " exceeds train size " +
                                std::to_string(train.size()));
  }
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const auto picks = rng.sample_without_replacement(
        train.size(), static_cast<std::size_t>(batch_size));
    std::vector<ErrorRecord> errors;
    for (const std::size_t index : picks) {
      const Example& example = train[index];
      const std::string input = format_input(task.spec, prompt, example);
      const std::string response = base.complete(input);
      const PerExampleRow row = score_example(task.spec, example, response);
      if (row.correct) continue;
      ErrorRecord record;
      record.example_id = example.id;
      record.question = example.question;
      record.model_response = response;
      record.gold_label = gold_to_string(example.gold);
      record.predicted_label = row.prediction;
      errors.push_back(std::move(record));
    }
    if (!errors.empty()) return errors;
  }
  return {};  // perfect-prompt signal
}

std::string format_error_string(const std::vector<ErrorRecord>& errors,
                                const MetaPromptSet& meta) {
  if (errors.empty()) throw std::invalid_argument("format_error_string: no errors");
  std::string out;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += render_template(meta.error_string_template,
                           {{"index", std::to_string(i)},
                            {"question", errors[i].question},
                            {"response", errors[i].model_response},
                            {"label", errors[i].gold_label},
                            {"prediction", errors[i].predicted_label}});
  }
  return out;
}

Action generate_feedback(const std::string& prompt, const std::string& error_string,
                         Backend& optimizer, const MetaPromptSet& meta) {
  if (error_string.empty()) {
    throw std::invalid_argument("generate_feedback: empty error string");
  }
  const std::string request = render_template(
      meta.error_feedback_template,
      {{"cur_prompt", prompt}, {"error_string", error_string}});
  Action action;
  action.feedback_text = optimizer.complete(request);
  action.error_string = error_string;
  return action;
}

namespace {

std::vector<std::string> parse_spans(const std::string& completion, int limit) {
  static const std::string kOpen = "<START>";
  static const std::string kClose = "<END>";
  std::vector<std::string> spans;
  std::size_t cursor = 0;
  while (static_cast<int>(spans.size()) < limit) {
    const auto open = completion.find(kOpen, cursor);
    if (open == std::string::npos) break;
    const auto body = open + kOpen.size();
    const auto close = completion.find(kClose, body);
    if (close == std::string::npos) break;
    std::string text = completion.substr(body, close - body);
    const auto first = text.find_first_not_of(" \t\r\n");
    const auto last = text.find_last_not_of(" \t\r\n");
    text = first == std::string::npos ? "" : text.substr(first, last - first + 1);
    if (!text.empty()) spans.push_back(std::move(text));
    cursor = close + kClose.size();
  }
  return spans;
}

}  // namespace

std::vector<std::string> transit_state(const std::string& prompt, const Action& action,
                                       const std::vector<std::string>& trajectory_prompts,
                                       int num_samples, int retries, Backend& optimizer,
                                       const MetaPromptSet& meta) {
  std::string trajectory;
  for (std::size_t i = 0; i < trajectory_prompts.size(); ++i) {
    if (i > 0) trajectory += "\n";
    trajectory += trajectory_prompts[i];
  }
  const std::string request = render_template(
      meta.state_transit_template,
      {{"cur_prompt", prompt},
       {"error_string", action.error_string},
       {"error_feedback", action.feedback_text},
       {"trajectory_prompts", trajectory},
       {"steps_per_gradient", std::to_string(num_samples)}});
  for (int attempt = 0; attempt <= retries; ++attempt) {
    const std::string completion = optimizer.complete(request);
    auto spans = parse_spans(completion, num_samples);
    if (!spans.empty()) return spans;
  }
  return {};  // malformed-transition signal
}

std::vector<NodeId> expand(NodeId node_id, SearchTree& tree, const Task& task,
                           const SearchConfig& config, Backends backends,
                           const MetaPromptSet& meta, Rng& rng, ExpansionStats& stats,
                           int width_override, int num_samples_override) {
  SearchNode& node = tree.node_mut(node_id);
  if (node.terminal_flag != TerminalFlag::none) {
    throw StructuralError("expand: node " + std::to_string(node_id) + " is terminal");
  }
  const int width = width_override > 0 ? width_override : config.expand_width;
  const int num_samples =
      num_samples_override > 0 ? num_samples_override : config.num_samples;
  const std::string prompt = node.state.text;
  const std::vector<std::string> trajectory = tree.trajectory_prompts(node_id);

  stats.expand_calls += 1;
  std::vector<NodeId> created;
  for (int batch = 0; batch < width; ++batch) {
    const auto errors = collect_errors(prompt, task, config.batch_size,
                                       config.max_batch_attempts, rng, *backends.base);
    if (errors.empty()) {
      stats.perfect_prompt_batches += 1;
      continue;
    }
    std::vector<std::string> candidates;
    ActionId action_id = -1;
    try {
      Action action = generate_feedback(prompt, format_error_string(errors, meta),
                                        *backends.optimizer, meta);
      for (const auto& record : errors) {
        action.source_error_ids.push_back(record.example_id);
      }
      action.batch_index = batch;
      candidates = transit_state(prompt, action, trajectory, num_samples,
                                 config.transit_retries, *backends.optimizer, meta);
      if (candidates.empty()) {
        stats.malformed_batches += 1;
        continue;
      }
      action_id = tree.add_action(std::move(action));
    } catch (const BackendUnavailable&) {
      // Optimizer outage aborts this batch only; reward evaluation failures
      // below still propagate and abort the run.
      stats.malformed_batches += 1;
      continue;
    }
    stats.error_batches += 1;
    for (const auto& text : candidates) {
      const EvalResult eval =
          evaluate_prompt(text, task.spec, task.split.heldout, *backends.base);
      stats.reward_evaluations += 1;

      SearchNode candidate;
      candidate.state.text = text;
      candidate.state.depth = tree.node(node_id).state.depth + 1;
      candidate.parent = node_id;
      candidate.reward = eval.score;
      const TerminalFlag flag = check_terminal(candidate, tree, config);
      const bool degenerate = text == prompt;
      if (degenerate) stats.degenerate_children += 1;

      const NodeId child =
          tree.add_child(node_id, text, action_id, eval.score, flag, degenerate);
      stats.prompts_generated += 1;
      created.push_back(child);
    }
  }
  if (created.empty()) tree.node_mut(node_id).unexpandable = true;
  return created;
}

std::vector<NodeId> simulate(NodeId node_id, SearchTree& tree, const Task& task,
                             const SearchConfig& config, Backends backends,
                             const MetaPromptSet& meta, Rng& rng, ExpansionStats& stats) {
  if (tree.node(node_id).children.empty()) {
    throw StructuralError("simulate: node " + std::to_string(node_id) +
                          " has no children");
  }
  std::vector<NodeId> extension;
  NodeId cursor = node_id;
  while (true) {
    const auto& children = tree.node(cursor).children;
    if (children.empty()) break;
    NodeId best = children.front();
    for (const NodeId child : children) {
      if (tree.node(child).reward > tree.node(best).reward) best = child;
    }
    tree.node_mut(best).visit_count += 1;
    extension.push_back(best);
    cursor = best;
    if (tree.node(cursor).terminal_flag != TerminalFlag::none) break;
    if (expand(cursor, tree, task, config, backends, meta, rng, stats).empty()) break;
  }
  return extension;
}

}  // namespace pmcts
