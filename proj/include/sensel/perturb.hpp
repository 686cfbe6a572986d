#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sensel/task_data.hpp"

namespace sensel {

enum class VariantKind { Base, InstHuman, InstDropout, InstParaphrase, ExOrder };

/// The three perturbation families a sensitivity score can be measured against.
enum class PerturbKind { InstHuman, InstAuto, ExOrder };

std::string_view to_string(VariantKind kind);
std::string_view to_string(PerturbKind kind);
VariantKind parse_variant_kind(std::string_view name);
/// Accepts "inst-h", "inst-a" and "exord".
PerturbKind parse_perturb_kind(std::string_view name);
/// Column label used in reports, e.g. "Inst-H".
std::string_view display_name(PerturbKind kind);

/// One prompt configuration: which instruction text and which demonstration order.
struct PromptVariant {
  VariantKind kind = VariantKind::Base;
  std::size_t instruction_index = 0;  // source instruction in the task's pool
  std::string instruction;            // rendered text (differs from the pool for dropout/paraphrase)
  std::vector<std::size_t> ordering;  // permutation of [0, K)
  std::string variant_id;

  bool operator==(const PromptVariant&) const = default;
};

struct PerturbationSet {
  PerturbKind kind = PerturbKind::InstHuman;
  PromptVariant base;
  std::vector<PromptVariant> variants;
};

std::vector<std::size_t> identity_ordering(std::size_t k);
bool is_permutation_of_range(std::span<const std::size_t> ordering, std::size_t k);

PromptVariant base_variant(const TaskSpec& spec, std::size_t k);

/// One variant per non-base human-written instruction.
PerturbationSet human_instruction_set(const TaskSpec& spec, std::size_t k);

/// Removes exactly max(1, round(rate * n)) of the n whitespace tokens (capped at n - 1),
/// chosen uniformly under the seed. Survivors keep their relative order and are
/// joined with single spaces. rate == 0 returns the input unchanged.
std::string word_dropout(std::string_view instruction, double rate, std::uint64_t seed);

/// n_dropout word-dropout variants of the base instruction (seeds seed+0 .. seed+n_dropout-1)
/// followed by one variant per paraphrase.
PerturbationSet build_inst_a(const TaskSpec& spec, std::size_t k, std::size_t n_dropout,
                             std::span<const std::string> paraphrases, double dropout_rate,
                             std::uint64_t seed);

/// All k!-1 non-identity orderings in lexicographic order when that fits in max_perms,
/// otherwise max_perms distinct ones sampled under the seed (emitted in lexicographic order).
PerturbationSet example_order_perturbations(const TaskSpec& spec, std::size_t k, std::size_t max_perms,
                                            std::uint64_t seed);

/// Renders the header with the instruction, then one block per demonstration in
/// `ordering`, then the target block cut at the label slot. Blocks are separated
/// by one blank line.
std::string assemble_prompt(const TaskSpec& spec, std::string_view instruction,
                            std::span<const LabeledExample> shots, std::span<const std::size_t> ordering,
                            std::string_view target_text);

struct Paraphrase {
  std::size_t instruction_index = 0;
  std::string text;
};

/// Line-delimited {"instruction_index": int, "paraphrase": string} records.
std::vector<Paraphrase> load_paraphrases(const std::filesystem::path& path);
void write_paraphrases(const std::filesystem::path& path, std::span<const Paraphrase> paraphrases);

/// The audit/reuse artifact written by the perturb stage.
struct Manifest {
  std::string task;
  std::size_t shots = 0;
  PromptVariant base;
  std::vector<PerturbationSet> sets;

  /// Base first, then every variant of every set in set order, without repeats.
  std::vector<PromptVariant> all_variants() const;
  const PerturbationSet* find_set(PerturbKind kind) const;
};

std::string manifest_to_json(const Manifest& manifest);
Manifest parse_manifest(std::string_view json_text);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest load_manifest(const std::filesystem::path& path);

}  // namespace sensel
