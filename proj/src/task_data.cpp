#include "sensel/task_data.hpp"

#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "sensel/error.hpp"
#include "sensel/rng.hpp"

namespace sensel {

using nlohmann::json;

namespace {

std::vector<std::string> string_list(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_array()) {
    throw ValidationError(std::string("task spec: '") + key + "' must be a list of strings");
  }
  std::vector<std::string> out;
  for (const auto& item : doc.at(key)) {
    if (!item.is_string()) {
      throw ValidationError(std::string("task spec: '") + key + "' must contain only strings");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

}  // namespace

void TaskSpec::validate() const {
  if (labels.size() < 2) throw ValidationError("task spec: at least 2 labels required");
  if (verbalizers.size() != labels.size()) {
    throw ValidationError("task spec: one verbalizer per label required");
  }
  std::unordered_set<std::string> seen;
  for (const auto& v : verbalizers) {
    if (v.empty()) throw ValidationError("task spec: empty verbalizer");
    if (!seen.insert(v).second) throw ValidationError("task spec: duplicate verbalizer '" + v + "'");
  }
  if (instructions.empty()) throw ValidationError("task spec: instruction list is empty");
  const auto at_instruction = prompt_template.find("{instruction}");
  const auto at_input = prompt_template.find("{input}");
  const auto at_label = prompt_template.find("{label}");
  if (at_instruction == std::string::npos || at_input == std::string::npos ||
      at_label == std::string::npos) {
    throw ValidationError("task spec: template must contain {instruction}, {input} and {label}");
  }
  if (!(at_instruction < at_input && at_input < at_label)) {
    throw ValidationError("task spec: template placeholders must appear as {instruction}, {input}, {label}");
  }
}

TaskSpec parse_task_spec(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("task spec: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("task spec: top level must be an object");

  TaskSpec spec;
  if (!doc.contains("name") || !doc.at("name").is_string()) {
    throw ValidationError("task spec: 'name' must be a string");
  }
  spec.name = doc.at("name").get<std::string>();
  spec.labels = string_list(doc, "labels");
  spec.verbalizers = string_list(doc, "verbalizers");
  spec.instructions = string_list(doc, "instructions");
  if (!doc.contains("template") || !doc.at("template").is_string()) {
    throw ValidationError("task spec: 'template' must be a string");
  }
  spec.prompt_template = doc.at("template").get<std::string>();
  spec.validate();
  return spec;
}

TaskSpec load_task_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open task spec " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_task_spec(buffer.str());
}

std::string task_spec_to_json(const TaskSpec& spec) {
  json doc = {{"name", spec.name},
              {"labels", spec.labels},
              {"verbalizers", spec.verbalizers},
              {"instructions", spec.instructions},
              {"template", spec.prompt_template}};
  return doc.dump(2) + "\n";
}

std::vector<LabeledExample> parse_dataset(std::istream& in, std::optional<std::size_t> num_labels) {
  std::vector<LabeledExample> records;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);

    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("dataset " + where + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("id") || !doc.contains("text") || !doc.contains("label") ||
        !doc.at("id").is_string() || !doc.at("text").is_string() ||
        !doc.at("label").is_number_integer()) {
      throw ParseError("dataset " + where + ": expected {\"id\": string, \"text\": string, \"label\": integer}");
    }

    LabeledExample ex;
    ex.id = doc.at("id").get<std::string>();
    ex.text = doc.at("text").get<std::string>();
    const auto label = doc.at("label").get<std::int64_t>();
    if (label < 0 || (num_labels && static_cast<std::uint64_t>(label) >= *num_labels)) {
      throw ValidationError("dataset " + where + ": record '" + ex.id + "' has label " +
                            std::to_string(label) + " outside [0, " +
                            (num_labels ? std::to_string(*num_labels) : std::string("inf")) + ")");
    }
    ex.label = static_cast<std::size_t>(label);
    if (!ids.insert(ex.id).second) {
      throw ValidationError("dataset " + where + ": duplicate id '" + ex.id + "'");
    }
    records.push_back(std::move(ex));
  }
  return records;
}

std::vector<LabeledExample> load_dataset(const std::filesystem::path& path,
                                         std::optional<std::size_t> num_labels) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset " + path.string());
  return parse_dataset(in, num_labels);
}

void write_dataset(std::ostream& out, std::span<const LabeledExample> records) {
  for (const auto& r : records) {
    json doc = {{"id", r.id}, {"text", r.text}, {"label", r.label}};
    out << doc.dump() << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, std::span<const LabeledExample> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write dataset " + path.string());
  write_dataset(out, records);
}

FewShotSet sample_fewshot(std::span<const LabeledExample> train, std::size_t k, std::uint64_t seed) {
  if (train.size() < k) {
    throw InsufficientDataError("few-shot sampling needs " + std::to_string(k) +
                                " examples, train split has " + std::to_string(train.size()));
  }
  std::vector<std::size_t> pool(train.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});

  // Partial Fisher-Yates: the first k slots end up as a uniform k-subset.
  Rng rng(seed);
  FewShotSet set;
  set.seed = seed;
  set.examples.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.index(pool.size() - i);
    std::swap(pool[i], pool[j]);
    set.examples.push_back(train[pool[i]]);
  }
  return set;
}

}  // namespace sensel
