#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace pmcts {

// The fixed templates driving the optimizer model: one to summarize errors
// into feedback, one to rewrite the prompt, the per-error block layout, and
// the model-input layout. Placeholders use {name} syntax.
struct MetaPromptSet {
  std::string error_feedback_template;  // {cur_prompt} {error_string}
  std::string state_transit_template;   // {cur_prompt} {error_string} {error_feedback}
                                        // {trajectory_prompts} {steps_per_gradient}
  std::string error_string_template;    // {index} {question} {response} {label} {prediction}
  std::string input_format_template;    // {prompt} {task_prefix} {question}
                                        // {task_suffix} {answer_format}

  static MetaPromptSet defaults();

  // Reads error_feedback.txt / state_transit.txt / error_string.txt /
  // input_format.txt from dir; missing files keep the built-in default.
  static MetaPromptSet load_dir(const std::filesystem::path& dir);

  // Throws ConfigError when a template lacks a placeholder it must interpolate.
  void validate() const;
};

// Single-pass substitution: every {key} present in values is replaced; other
// brace text is copied verbatim. Values are never re-scanned, so prompts
// containing placeholder-like text cannot trigger double substitution.
std::string render_template(const std::string& tpl,
                            const std::map<std::string, std::string>& values);

}  // namespace pmcts
