#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmcts/config.hpp"
#include "pmcts/search_tree.hpp"

namespace pmcts {

inline constexpr int kTraceSchemaVersion = 1;

struct LoadedTrace {
  SearchTree tree;
  SearchConfig config;
  std::string task_name;
  bool partial = false;
};

// Whole run as one JSON document: config, task name, every node with its full
// fields (incoming actions embedded), and the iteration log. Key order and
// number formatting are canonical, so identical runs serialize identically.
nlohmann::json trace_to_json(const SearchTree& tree, const SearchConfig& config,
                             const std::string& task_name, bool partial);
std::string trace_to_string(const SearchTree& tree, const SearchConfig& config,
                            const std::string& task_name, bool partial);

void save_trace(const SearchTree& tree, const SearchConfig& config,
                const std::string& task_name, bool partial,
                const std::filesystem::path& path);

LoadedTrace trace_from_json(const nlohmann::json& j);
LoadedTrace load_trace(const std::filesystem::path& path);

struct ConvergenceRow {
  int depth = 0;
  double mean_reward = 0.0;
  double var_reward = 0.0;  // population variance
  int n_nodes = 0;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;            // one per depth, ascending
  std::vector<NodeId> best_path;               // highest-average-reward logged path
  std::vector<double> best_path_rewards;

  // Header: depth,mean_reward,var_reward,n_nodes
  std::string to_csv() const;
  nlohmann::json to_json() const;
  nlohmann::json best_path_json() const;       // sidecar for the CSV output
};

ConvergenceReport convergence_report(const SearchTree& tree);

}  // namespace pmcts
