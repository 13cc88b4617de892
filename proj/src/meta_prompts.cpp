#include "pmcts/meta_prompts.hpp"

#include <fstream>
#include <sstream>

#include "pmcts/errors.hpp"

namespace pmcts {

namespace {

const char* kErrorFeedback =
    R"(I'm writing prompts for a language model designed for a task.

My current prompt is:
{cur_prompt}

But this prompt gets the following examples wrong:
{error_string}

For each wrong example, carefully examine each question and wrong answer step by step, provide comprehensive and different reasons why the prompt leads to the wrong answer. At last, based on all these reasons, summarize and list all the aspects that can improve the prompt.)";

const char* kStateTransit =
    R"(I'm writing prompts for a language model designed for a task.

My current prompt is:

{cur_prompt}

But this prompt gets the following examples wrong:

{error_string}

Based on these errors, the problems with this prompt and the reasons are:

{error_feedback}

There is a list of former prompts including the current prompt, and each prompt is modified from its former prompts:

{trajectory_prompts}

Based on the above information, please write {steps_per_gradient} new prompts following these guidelines:

1. The new prompts should solve the current prompt's problems.

2. The new prompts should consider the list of prompts and evolve based on the current prompt.

3. Each new prompt should be wrapped with <START> and <END>.

The new prompts are:)";

const char* kErrorString =
    R"(<{index}>
The model's input is:
{question}

The model's response is:
{response}

The correct label is: {label}
The model's prediction is {prediction})";

const char* kInputFormat =
    R"({prompt}
{task_prefix}
{question}
{task_suffix}
{answer_format})";

void require_placeholder(const std::string& tpl, const std::string& name,
                         const std::string& which) {
  if (tpl.find("{" + name + "}") == std::string::npos) {
    throw ConfigError(which + " template is missing the {" + name + "} placeholder");
  }
}

std::string read_file_or(const std::filesystem::path& path, const char* fallback) {
  std::ifstream in(path);
  if (!in) return fallback;
  std::ostringstream out;
  out << in.rdbuf();
  std::string text = out.str();
  // Trailing newline from text editors is not part of the template.
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

}  // namespace

MetaPromptSet MetaPromptSet::defaults() {
  MetaPromptSet set;
  set.error_feedback_template = kErrorFeedback;
  set.state_transit_template = kStateTransit;
  set.error_string_template = kErrorString;
  set.input_format_template = kInputFormat;
  return set;
}

MetaPromptSet MetaPromptSet::load_dir(const std::filesystem::path& dir) {
  MetaPromptSet set;
  set.error_feedback_template = read_file_or(dir / "error_feedback.txt", kErrorFeedback);
  set.state_transit_template = read_file_or(dir / "state_transit.txt", kStateTransit);
  set.error_string_template = read_file_or(dir / "error_string.txt", kErrorString);
  set.input_format_template = read_file_or(dir / "input_format.txt", kInputFormat);
  set.validate();
  return set;
}

void MetaPromptSet::validate() const {
  require_placeholder(error_feedback_template, "cur_prompt", "error_feedback");
  require_placeholder(error_feedback_template, "error_string", "error_feedback");
  require_placeholder(state_transit_template, "cur_prompt", "state_transit");
  require_placeholder(state_transit_template, "error_string", "state_transit");
  require_placeholder(state_transit_template, "error_feedback", "state_transit");
  require_placeholder(state_transit_template, "trajectory_prompts", "state_transit");
  require_placeholder(state_transit_template, "steps_per_gradient", "state_transit");
  require_placeholder(error_string_template, "index", "error_string");
  require_placeholder(error_string_template, "question", "error_string");
  require_placeholder(error_string_template, "response", "error_string");
  require_placeholder(error_string_template, "label", "error_string");
  require_placeholder(error_string_template, "prediction", "error_string");
  require_placeholder(input_format_template, "prompt", "input_format");
  require_placeholder(input_format_template, "question", "input_format");
}

std::string render_template(const std::string& tpl,
                            const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tpl.size());
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      const auto close = tpl.find('}', i + 1);
      if (close != std::string::npos) {
        const std::string key = tpl.substr(i + 1, close - i - 1);
        const auto it = values.find(key);
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tpl[i];
    ++i;
  }
  return out;
}

}  // namespace pmcts
