#include "pmcts/trace.hpp"

#include <charconv>
#include <fstream>
#include <map>

#include "pmcts/errors.hpp"
#include "pmcts/search.hpp"

namespace pmcts {

namespace {

nlohmann::json action_to_json(const Action& action) {
  return nlohmann::json{
      {"id", action.id},
      {"feedback_text", action.feedback_text},
      {"error_string", action.error_string},
      {"source_error_ids", action.source_error_ids},
      {"batch_index", action.batch_index},
  };
}

Action action_from_json(const nlohmann::json& j) {
  Action action;
  action.id = j.at("id").get<ActionId>();
  action.feedback_text = j.at("feedback_text").get<std::string>();
  action.error_string = j.value("error_string", std::string{});
  action.source_error_ids = j.at("source_error_ids").get<std::vector<std::string>>();
  action.batch_index = j.at("batch_index").get<int>();
  return action;
}

nlohmann::json node_to_json(const SearchTree& tree, const SearchNode& node) {
  nlohmann::json j{
      {"id", node.state.id},
      {"text", node.state.text},
      {"depth", node.state.depth},
      {"reward", node.reward},
      {"visit_count", node.visit_count},
      {"cumulative_rewards", node.cumulative_rewards},
      {"q_value", node.q_value},
      {"children", node.children},
      {"terminal_flag", to_string(node.terminal_flag)},
      {"degenerate", node.degenerate},
      {"unexpandable", node.unexpandable},
  };
  j["parent"] = node.parent ? nlohmann::json(*node.parent) : nlohmann::json(nullptr);
  j["action"] = node.incoming_action ? action_to_json(tree.action(*node.incoming_action))
                                     : nlohmann::json(nullptr);
  return j;
}

// Canonical shortest round-trip formatting, matching the JSON output.
std::string format_double(double v) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, result.ptr);
}

}  // namespace

nlohmann::json trace_to_json(const SearchTree& tree, const SearchConfig& config,
                             const std::string& task_name, bool partial) {
  nlohmann::json j;
  j["schema_version"] = kTraceSchemaVersion;
  j["partial"] = partial;
  j["config"] = config;
  j["task"] = task_name;
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& [id, node] : tree.nodes()) {
    (void)id;
    nodes.push_back(node_to_json(tree, node));
  }
  j["nodes"] = std::move(nodes);
  nlohmann::json iterations = nlohmann::json::array();
  for (const auto& record : tree.iteration_log()) {
    iterations.push_back({{"iteration", record.iteration},
                          {"path", record.path},
                          {"timestamp", record.timestamp}});
  }
  j["iterations"] = std::move(iterations);
  return j;
}

std::string trace_to_string(const SearchTree& tree, const SearchConfig& config,
                            const std::string& task_name, bool partial) {
  return trace_to_json(tree, config, task_name, partial).dump(2) + "\n";
}

void save_trace(const SearchTree& tree, const SearchConfig& config,
                const std::string& task_name, bool partial,
                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceError("cannot write trace file: " + path.string());
  out << trace_to_string(tree, config, task_name, partial);
}

LoadedTrace trace_from_json(const nlohmann::json& j) {
  const int version = j.value("schema_version", -1);
  if (version != kTraceSchemaVersion) {
    throw TraceError("unsupported trace schema version " + std::to_string(version) +
                     " (expected " + std::to_string(kTraceSchemaVersion) + ")");
  }
  LoadedTrace loaded;
  loaded.partial = j.value("partial", false);
  loaded.config = j.at("config").get<SearchConfig>();
  loaded.task_name = j.at("task").get<std::string>();

  std::map<NodeId, SearchNode> nodes;
  std::map<ActionId, Action> actions;
  for (const auto& nj : j.at("nodes")) {
    SearchNode node;
    node.state.id = nj.at("id").get<NodeId>();
    node.state.text = nj.at("text").get<std::string>();
    node.state.depth = nj.at("depth").get<int>();
    if (!nj.at("parent").is_null()) node.parent = nj.at("parent").get<NodeId>();
    node.reward = nj.at("reward").get<double>();
    node.visit_count = nj.at("visit_count").get<int>();
    node.cumulative_rewards = nj.at("cumulative_rewards").get<std::vector<double>>();
    node.q_value = nj.at("q_value").get<double>();
    node.children = nj.at("children").get<std::vector<NodeId>>();
    node.terminal_flag = terminal_flag_from_string(nj.at("terminal_flag").get<std::string>());
    node.degenerate = nj.value("degenerate", false);
    node.unexpandable = nj.value("unexpandable", false);
    if (!nj.at("action").is_null()) {
      Action action = action_from_json(nj.at("action"));
      node.incoming_action = action.id;
      actions.emplace(action.id, std::move(action));
    }
    nodes.emplace(node.state.id, std::move(node));
  }

  std::vector<IterationRecord> log;
  for (const auto& ij : j.at("iterations")) {
    IterationRecord record;
    record.iteration = ij.at("iteration").get<int>();
    record.path = ij.at("path").get<std::vector<NodeId>>();
    record.timestamp = ij.at("timestamp").get<std::uint64_t>();
    log.push_back(std::move(record));
  }

  try {
    loaded.tree = SearchTree::from_parts(std::move(nodes), std::move(actions), std::move(log));
  } catch (const StructuralError& e) {
    throw TraceError(std::string("trace holds an inconsistent tree: ") + e.what());
  }
  return loaded;
}

LoadedTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("trace file not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw TraceError("corrupt trace " + path.string() + " at byte " +
                     std::to_string(e.byte) + ": " + e.what());
  }
  try {
    return trace_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw TraceError("trace " + path.string() + " is missing fields: " + e.what());
  }
}

ConvergenceReport convergence_report(const SearchTree& tree) {
  if (tree.nodes().empty()) throw StructuralError("convergence_report: empty tree");
  ConvergenceReport report;

  std::map<int, std::vector<double>> by_depth;
  for (const auto& [id, node] : tree.nodes()) {
    (void)id;
    by_depth[node.state.depth].push_back(node.reward);
  }
  for (const auto& [depth, rewards] : by_depth) {
    ConvergenceRow row;
    row.depth = depth;
    row.n_nodes = static_cast<int>(rewards.size());
    double sum = 0.0;
    for (const double r : rewards) sum += r;
    row.mean_reward = sum / static_cast<double>(rewards.size());
    double var = 0.0;
    for (const double r : rewards) var += (r - row.mean_reward) * (r - row.mean_reward);
    row.var_reward = var / static_cast<double>(rewards.size());
    report.rows.push_back(row);
  }

  if (!tree.iteration_log().empty()) {
    const OutputChoice choice = select_output_choice(tree);
    report.best_path = choice.path;
    for (const NodeId id : choice.path) {
      report.best_path_rewards.push_back(tree.node(id).reward);
    }
  }
  return report;
}

std::string ConvergenceReport::to_csv() const {
  std::string out = "depth,mean_reward,var_reward,n_nodes\n";
  for (const auto& row : rows) {
    out += std::to_string(row.depth) + "," + format_double(row.mean_reward) + "," +
           format_double(row.var_reward) + "," + std::to_string(row.n_nodes) + "\n";
  }
  return out;
}

nlohmann::json ConvergenceReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows) {
    rows_json.push_back({{"depth", row.depth},
                         {"mean_reward", row.mean_reward},
                         {"var_reward", row.var_reward},
                         {"n_nodes", row.n_nodes}});
  }
  return nlohmann::json{{"rows", rows_json}, {"best_path", best_path_json()}};
}

nlohmann::json ConvergenceReport::best_path_json() const {
  return nlohmann::json{{"nodes", best_path}, {"rewards", best_path_rewards}};
}

}  // namespace pmcts
