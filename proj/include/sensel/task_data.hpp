#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sensel {

struct LabeledExample {
  std::string id;
  std::string text;
  std::size_t label = 0;

  bool operator==(const LabeledExample&) const = default;
};

/// A classification task: label names, how each label is rendered in a prompt,
/// the instruction pool (index 0 is the base instruction) and the block template.
///
/// The template holds the placeholders `{instruction}`, `{input}` and `{label}`.
/// Everything up to and including `{instruction}` is the prompt header; the rest
/// is the per-example block, rendered once per demonstration and once for the
/// target (cut at `{label}`).
struct TaskSpec {
  std::string name;
  std::vector<std::string> labels;
  std::vector<std::string> verbalizers;
  std::vector<std::string> instructions;
  std::string prompt_template;

  std::size_t num_labels() const { return labels.size(); }

  /// Throws ValidationError when any invariant is broken.
  void validate() const;
};

struct FewShotSet {
  std::vector<LabeledExample> examples;
  std::uint64_t seed = 0;

  std::size_t size() const { return examples.size(); }
};

TaskSpec parse_task_spec(std::string_view json_text);
TaskSpec load_task_spec(const std::filesystem::path& path);
std::string task_spec_to_json(const TaskSpec& spec);

/// Reads line-delimited {"id", "text", "label"} records. Blank lines are skipped.
/// When num_labels is given, every label is checked against [0, num_labels).
std::vector<LabeledExample> parse_dataset(std::istream& in,
                                          std::optional<std::size_t> num_labels = std::nullopt);
std::vector<LabeledExample> load_dataset(const std::filesystem::path& path,
                                         std::optional<std::size_t> num_labels = std::nullopt);
void write_dataset(std::ostream& out, std::span<const LabeledExample> records);
void write_dataset(const std::filesystem::path& path, std::span<const LabeledExample> records);

/// Uniform sample of k distinct training examples, without replacement.
/// A pure function of (train order, k, seed).
FewShotSet sample_fewshot(std::span<const LabeledExample> train, std::size_t k, std::uint64_t seed);

}  // namespace sensel
