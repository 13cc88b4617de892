#include "pmcts/landscape.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "pmcts/errors.hpp"
#include "pmcts/rng.hpp"

namespace pmcts {

namespace {

// Distinct words with no substring collisions among themselves or with the
// generated question/prompt scaffolding.
const std::vector<std::string> kKeywordPool = {
    "atlas",  "breve",   "cinder",  "dovetail", "ember",   "fresco",
    "gossamer", "harbor", "isthmus", "jasper",  "kestrel", "lattice",
    "meridian", "nimbus", "obelisk", "pennant",
};

}  // namespace

std::vector<std::string> SimulatedLandscape::covered(const std::string& text) const {
  std::vector<std::string> out;
  for (const auto& kw : keywords) {
    if (text.find(kw) != std::string::npos) out.push_back(kw);
  }
  return out;
}

bool SimulatedLandscape::satisfied(const std::string& text,
                                   const std::string& example_id) const {
  const auto it = required.find(example_id);
  if (it == required.end()) return true;  // nothing required
  for (const auto& kw : it->second) {
    if (text.find(kw) == std::string::npos) return false;
  }
  return true;
}

double SimulatedLandscape::score(const std::string& text,
                                 const std::vector<Example>& examples) const {
  if (examples.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& e : examples) {
    if (satisfied(text, e.id)) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(examples.size());
}

void SimulatedLandscape::validate() const {
  if (keywords.empty()) throw ConfigError("landscape has no keywords");
  for (const auto& [id, req] : required) {
    for (const auto& kw : req) {
      if (std::find(keywords.begin(), keywords.end(), kw) == keywords.end()) {
        throw ConfigError("landscape example '" + id + "' requires unknown keyword '" +
                          kw + "'");
      }
    }
  }
}

SimulatedLandscape load_landscape_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open landscape file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("bad landscape file " + path.string() + ": " + e.what());
  }
  SimulatedLandscape land;
  land.keywords = j.at("keywords").get<std::vector<std::string>>();
  for (const auto& entry : j.at("examples")) {
    land.required[entry.at("id").get<std::string>()] =
        entry.at("required").get<std::vector<std::string>>();
  }
  land.validate();
  return land;
}

void save_landscape_json(const SimulatedLandscape& landscape,
                         const std::filesystem::path& path) {
  nlohmann::json j;
  j["keywords"] = landscape.keywords;
  nlohmann::json examples = nlohmann::json::array();
  for (const auto& [id, req] : landscape.required) {
    examples.push_back({{"id", id}, {"required", req}});
  }
  j["examples"] = examples;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write landscape file: " + path.string());
  out << j.dump(2) << '\n';
}

SynthBundle make_synthetic_task(const SynthOptions& options) {
  if (options.n_keywords < 1 ||
      options.n_keywords > static_cast<int>(kKeywordPool.size())) {
    throw ConfigError("n_keywords must be in [1, " +
                      std::to_string(kKeywordPool.size()) + "]");
  }
  if (options.root_coverage < 0 || options.root_coverage > options.required_span) {
    throw ConfigError("root_coverage must be in [0, required_span]");
  }
  if (options.required_span < 1 || options.required_span > options.n_keywords) {
    throw ConfigError("required_span must be in [1, n_keywords]");
  }
  if (options.n_hard_examples > 0 && options.required_span == options.n_keywords) {
    throw ConfigError("hard examples need keywords beyond required_span");
  }

  SynthBundle bundle;
  bundle.landscape.keywords.assign(kKeywordPool.begin(),
                                   kKeywordPool.begin() + options.n_keywords);

  const std::vector<std::string> labels = {"A", "B", "C", "D"};
  Rng rng(Rng::derive(options.seed, 0xB00B1E5));

  const auto add_example = [&](const std::string& id, const std::string& kw) {
    Example e;
    e.id = id;
    e.question = "Case " + id + ": decide whether submission " + id +
                 " satisfies its governing requirement.";
    e.gold.label = labels[static_cast<std::size_t>(rng.bounded(labels.size()))];
    bundle.examples.push_back(e);
    bundle.landscape.required[id] = {kw};
  };

  for (int i = 0; i < options.n_examples; ++i) {
    // Round-robin over the span keeps per-keyword frequencies even.
    const auto kw_index = static_cast<std::size_t>(i % options.required_span);
    char id[32];
    std::snprintf(id, sizeof(id), "case-%03d", i);
    add_example(id, bundle.landscape.keywords[kw_index]);
  }
  bundle.n_plain = bundle.examples.size();
  for (int i = 0; i < options.n_hard_examples; ++i) {
    const auto extra = static_cast<std::size_t>(options.n_keywords - options.required_span);
    const auto kw_index =
        static_cast<std::size_t>(options.required_span) + static_cast<std::size_t>(i) % extra;
    char id[32];
    std::snprintf(id, sizeof(id), "hard-%03d", i);
    add_example(id, bundle.landscape.keywords[kw_index]);
  }

  std::string prompt =
      "Decide whether each submission satisfies its governing requirement. "
      "Weigh the following aspects:";
  for (int i = 0; i < options.root_coverage; ++i) {
    prompt += (i == 0 ? " " : ", ");
    prompt += bundle.landscape.keywords[static_cast<std::size_t>(i)];
  }
  prompt += ".";

  bundle.spec.name = "synthetic-keywords";
  bundle.spec.initial_prompt = prompt;
  bundle.spec.answer_format = "Give the final choice wrapped in <answer> and </answer>.";
  bundle.spec.metric = Metric::accuracy;
  bundle.spec.label_space = labels;
  bundle.spec.extraction.kind = Extraction::Kind::tag;
  bundle.landscape.validate();
  return bundle;
}

}  // namespace pmcts
