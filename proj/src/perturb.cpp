#include "sensel/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "sensel/error.hpp"
#include "sensel/rng.hpp"

namespace sensel {

using nlohmann::json;

namespace {

constexpr std::string_view kInstruction = "{instruction}";
constexpr std::string_view kInput = "{input}";
constexpr std::string_view kLabel = "{label}";

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(text)};
  std::string token;
  while (in >> token) tokens.push_back(std::move(token));
  return tokens;
}

std::string join_ordering(std::span<const std::size_t> ordering) {
  std::string out;
  for (std::size_t i = 0; i < ordering.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(ordering[i]);
  }
  return out;
}

// k! saturating at `cap`.
std::size_t factorial_capped(std::size_t k, std::size_t cap) {
  std::size_t f = 1;
  for (std::size_t i = 2; i <= k; ++i) {
    if (f > cap / i) return cap;
    f *= i;
  }
  return f;
}

json variant_to_json(const PromptVariant& v) {
  return json{{"variant_id", v.variant_id},
              {"kind", std::string(to_string(v.kind))},
              {"instruction_index", v.instruction_index},
              {"instruction", v.instruction},
              {"ordering", v.ordering}};
}

PromptVariant variant_from_json(const json& doc) {
  PromptVariant v;
  v.variant_id = doc.at("variant_id").get<std::string>();
  v.kind = parse_variant_kind(doc.at("kind").get<std::string>());
  v.instruction_index = doc.at("instruction_index").get<std::size_t>();
  v.instruction = doc.at("instruction").get<std::string>();
  v.ordering = doc.at("ordering").get<std::vector<std::size_t>>();
  return v;
}

}  // namespace

std::string_view to_string(VariantKind kind) {
  switch (kind) {
    case VariantKind::Base: return "base";
    case VariantKind::InstHuman: return "inst-human";
    case VariantKind::InstDropout: return "inst-dropout";
    case VariantKind::InstParaphrase: return "inst-paraphrase";
    case VariantKind::ExOrder: return "ex-order";
  }
  return "base";
}

std::string_view to_string(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::InstHuman: return "inst-h";
    case PerturbKind::InstAuto: return "inst-a";
    case PerturbKind::ExOrder: return "exord";
  }
  return "inst-h";
}

std::string_view display_name(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::InstHuman: return "Inst-H";
    case PerturbKind::InstAuto: return "Inst-A";
    case PerturbKind::ExOrder: return "ExOrd";
  }
  return "Inst-H";
}

VariantKind parse_variant_kind(std::string_view name) {
  for (auto kind : {VariantKind::Base, VariantKind::InstHuman, VariantKind::InstDropout,
                    VariantKind::InstParaphrase, VariantKind::ExOrder}) {
    if (to_string(kind) == name) return kind;
  }
  throw ParseError("unknown variant kind '" + std::string(name) + "'");
}

PerturbKind parse_perturb_kind(std::string_view name) {
  for (auto kind : {PerturbKind::InstHuman, PerturbKind::InstAuto, PerturbKind::ExOrder}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown perturbation kind '" + std::string(name) +
                    "' (expected inst-h, inst-a or exord)");
}

std::vector<std::size_t> identity_ordering(std::size_t k) {
  std::vector<std::size_t> ordering(k);
  std::iota(ordering.begin(), ordering.end(), std::size_t{0});
  return ordering;
}

bool is_permutation_of_range(std::span<const std::size_t> ordering, std::size_t k) {
  if (ordering.size() != k) return false;
  std::vector<bool> seen(k, false);
  for (std::size_t v : ordering) {
    if (v >= k || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

PromptVariant base_variant(const TaskSpec& spec, std::size_t k) {
  if (spec.instructions.empty()) throw ConfigError("task has no instructions");
  return PromptVariant{VariantKind::Base, 0, spec.instructions[0], identity_ordering(k), "base"};
}

PerturbationSet human_instruction_set(const TaskSpec& spec, std::size_t k) {
  if (spec.instructions.size() < 2) {
    throw ConfigError("human instruction perturbation needs at least 2 instructions, task '" +
                      spec.name + "' has " + std::to_string(spec.instructions.size()));
  }
  PerturbationSet set{PerturbKind::InstHuman, base_variant(spec, k), {}};
  for (std::size_t i = 1; i < spec.instructions.size(); ++i) {
    set.variants.push_back(PromptVariant{VariantKind::InstHuman, i, spec.instructions[i],
                                         identity_ordering(k), "inst-h/" + std::to_string(i)});
  }
  return set;
}

std::string word_dropout(std::string_view instruction, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  const auto tokens = split_whitespace(instruction);
  if (tokens.empty()) throw ValidationError("word dropout: instruction has no tokens");
  if (rate == 0.0) return std::string(instruction);

  const std::size_t n = tokens.size();
  if (n == 1) return tokens.front();
  const auto rounded = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
  const std::size_t drop = std::min(std::max<std::size_t>(1, rounded), n - 1);

  std::vector<std::size_t> positions(n);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  Rng rng(seed);
  std::vector<bool> removed(n, false);
  for (std::size_t i = 0; i < drop; ++i) {
    const std::size_t j = i + rng.index(n - i);
    std::swap(positions[i], positions[j]);
    removed[positions[i]] = true;
  }

  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (removed[i]) continue;
    if (!out.empty()) out += ' ';
    out += tokens[i];
  }
  return out;
}

PerturbationSet build_inst_a(const TaskSpec& spec, std::size_t k, std::size_t n_dropout,
                             std::span<const std::string> paraphrases, double dropout_rate,
                             std::uint64_t seed) {
  if (n_dropout == 0 && paraphrases.empty()) {
    throw ConfigError("automatic instruction perturbation is empty: need n_dropout > 0 or paraphrases");
  }
  PerturbationSet set{PerturbKind::InstAuto, base_variant(spec, k), {}};
  const std::string& base_instruction = set.base.instruction;
  for (std::size_t i = 0; i < n_dropout; ++i) {
    set.variants.push_back(PromptVariant{VariantKind::InstDropout, 0,
                                         word_dropout(base_instruction, dropout_rate, seed + i),
                                         identity_ordering(k), "inst-a/drop-" + std::to_string(i)});
  }
  for (std::size_t i = 0; i < paraphrases.size(); ++i) {
    set.variants.push_back(PromptVariant{VariantKind::InstParaphrase, 0, paraphrases[i],
                                         identity_ordering(k), "inst-a/para-" + std::to_string(i)});
  }
  return set;
}

PerturbationSet example_order_perturbations(const TaskSpec& spec, std::size_t k, std::size_t max_perms,
                                            std::uint64_t seed) {
  if (k < 2) throw ConfigError("example ordering perturbation needs k >= 2");
  if (max_perms == 0) throw ConfigError("max_perms must be positive");

  PerturbationSet set{PerturbKind::ExOrder, base_variant(spec, k), {}};
  const auto identity = identity_ordering(k);

  // Enumerable up to 8! = 40320; beyond that, rejection-sample.
  constexpr std::size_t kEnumerateLimit = 40320;
  const std::size_t total = factorial_capped(k, kEnumerateLimit + 1);
  std::vector<std::vector<std::size_t>> chosen;

  if (total <= kEnumerateLimit && total - 1 <= max_perms) {
    auto perm = identity;
    while (std::next_permutation(perm.begin(), perm.end())) chosen.push_back(perm);
  } else if (total <= kEnumerateLimit) {
    std::vector<std::vector<std::size_t>> all;
    auto perm = identity;
    while (std::next_permutation(perm.begin(), perm.end())) all.push_back(perm);
    Rng rng(seed);
    for (std::size_t i = 0; i < max_perms; ++i) {
      const std::size_t j = i + rng.index(all.size() - i);
      std::swap(all[i], all[j]);
      chosen.push_back(all[i]);
    }
    std::sort(chosen.begin(), chosen.end());
  } else {
    Rng rng(seed);
    std::set<std::vector<std::size_t>> picked;
    while (picked.size() < max_perms) {
      auto perm = identity;
      for (std::size_t i = k; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
      if (perm != identity) picked.insert(std::move(perm));
    }
    chosen.assign(picked.begin(), picked.end());
  }

  for (auto& ordering : chosen) {
    std::string id = "exord/" + join_ordering(ordering);
    set.variants.push_back(PromptVariant{VariantKind::ExOrder, 0, spec.instructions[0],
                                         std::move(ordering), std::move(id)});
  }
  return set;
}

std::string assemble_prompt(const TaskSpec& spec, std::string_view instruction,
                            std::span<const LabeledExample> shots, std::span<const std::size_t> ordering,
                            std::string_view target_text) {
  if (!is_permutation_of_range(ordering, shots.size())) {
    throw ValidationError("prompt ordering is not a permutation of [0, " + std::to_string(shots.size()) + ")");
  }
  const std::string_view tmpl = spec.prompt_template;
  const auto at_instruction = tmpl.find(kInstruction);
  if (at_instruction == std::string_view::npos) {
    throw ValidationError("template lacks {instruction}");
  }
  std::string_view block = tmpl.substr(at_instruction + kInstruction.size());
  while (!block.empty() && (block.front() == '\n' || block.front() == '\r')) block.remove_prefix(1);
  const auto at_input = block.find(kInput);
  const auto at_label = block.find(kLabel);
  if (at_input == std::string_view::npos || at_label == std::string_view::npos || at_label < at_input) {
    throw ValidationError("template block must contain {input} followed by {label}");
  }
  const std::string_view before_input = block.substr(0, at_input);
  const std::string_view between = block.substr(at_input + kInput.size(), at_label - at_input - kInput.size());
  const std::string_view after_label = block.substr(at_label + kLabel.size());

  std::string prompt;
  prompt.append(tmpl.substr(0, at_instruction));
  prompt.append(instruction);
  for (std::size_t idx : ordering) {
    const auto& shot = shots[idx];
    if (shot.label >= spec.verbalizers.size()) {
      throw ValidationError("demonstration '" + shot.id + "' has label outside the task's label set");
    }
    prompt.append("\n\n");
    prompt.append(before_input);
    prompt.append(shot.text);
    prompt.append(between);
    prompt.append(spec.verbalizers[shot.label]);
    prompt.append(after_label);
  }
  prompt.append("\n\n");
  prompt.append(before_input);
  prompt.append(target_text);
  prompt.append(between);
  return prompt;
}

std::vector<Paraphrase> load_paraphrases(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open paraphrase file " + path.string());
  std::vector<Paraphrase> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json doc = json::parse(line);
      out.push_back(Paraphrase{doc.at("instruction_index").get<std::size_t>(),
                               doc.at("paraphrase").get<std::string>()});
    } catch (const json::exception& e) {
      throw ParseError("paraphrase file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_paraphrases(const std::filesystem::path& path, std::span<const Paraphrase> paraphrases) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write paraphrase file " + path.string());
  for (const auto& p : paraphrases) {
    out << json{{"instruction_index", p.instruction_index}, {"paraphrase", p.text}}.dump() << '\n';
  }
}

std::vector<PromptVariant> Manifest::all_variants() const {
  std::vector<PromptVariant> out{base};
  std::unordered_set<std::string> ids{base.variant_id};
  for (const auto& set : sets) {
    for (const auto& v : set.variants) {
      if (ids.insert(v.variant_id).second) out.push_back(v);
    }
  }
  return out;
}

const PerturbationSet* Manifest::find_set(PerturbKind kind) const {
  for (const auto& set : sets) {
    if (set.kind == kind) return &set;
  }
  return nullptr;
}

std::string manifest_to_json(const Manifest& manifest) {
  json sets = json::array();
  for (const auto& set : manifest.sets) {
    json variants = json::array();
    for (const auto& v : set.variants) variants.push_back(variant_to_json(v));
    sets.push_back(json{{"kind", std::string(to_string(set.kind))}, {"variants", std::move(variants)}});
  }
  json doc = {{"task", manifest.task},
              {"shots", manifest.shots},
              {"base", variant_to_json(manifest.base)},
              {"sets", std::move(sets)}};
  return doc.dump(2) + "\n";
}

Manifest parse_manifest(std::string_view json_text) {
  try {
    const json doc = json::parse(json_text);
    Manifest m;
    m.task = doc.at("task").get<std::string>();
    m.shots = doc.at("shots").get<std::size_t>();
    m.base = variant_from_json(doc.at("base"));
    for (const auto& s : doc.at("sets")) {
      PerturbationSet set;
      set.kind = parse_perturb_kind(s.at("kind").get<std::string>());
      set.base = m.base;
      for (const auto& v : s.at("variants")) set.variants.push_back(variant_from_json(v));
      m.sets.push_back(std::move(set));
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write manifest " + path.string());
  out << manifest_to_json(manifest);
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str());
}

}  // namespace sensel
