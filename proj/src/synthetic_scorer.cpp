#include <cmath>

#include "sensel/error.hpp"
#include "sensel/rng.hpp"
#include "sensel/scoring.hpp"

namespace sensel {

namespace {

constexpr std::uint64_t kBaseSalt = 0x62617365ULL;     // "base"
constexpr std::uint64_t kFlipSalt = 0x666c6970ULL;     // "flip"
constexpr std::uint64_t kMarginSalt = 0x6d617267ULL;   // "marg"
constexpr std::string_view kContentFreePrefix = "__cf__";

// Uniform over the labels other than `excluded`.
std::size_t other_label(Rng& rng, std::size_t num_labels, std::size_t excluded) {
  std::size_t pick = rng.index(num_labels - 1);
  return pick >= excluded ? pick + 1 : pick;
}

}  // namespace

SyntheticScorer::SyntheticScorer(std::map<std::string, SyntheticExample> examples, std::size_t num_labels,
                                 std::uint64_t seed, std::vector<double> label_bias)
    : examples_(std::move(examples)), num_labels_(num_labels), seed_(seed), label_bias_(std::move(label_bias)) {
  if (num_labels_ < 2) throw ConfigError("synthetic scorer needs at least 2 labels");
  if (label_bias_.empty()) label_bias_.assign(num_labels_, 0.0);
  if (label_bias_.size() != num_labels_) throw ConfigError("synthetic label bias must have one entry per label");
}

double SyntheticScorer::default_difficulty(std::uint64_t seed, std::string_view example_id) {
  Rng rng(mix_seeds({seed, hash_string(example_id), 0x64696666ULL}));
  return rng.uniform();
}

std::string SyntheticScorer::identity() const { return "synthetic:" + std::to_string(seed_); }

std::size_t SyntheticScorer::base_prediction(const std::string& example_id, std::uint64_t shot_seed) const {
  auto it = examples_.find(example_id);
  if (it == examples_.end()) throw ValidationError("synthetic scorer: unknown example '" + example_id + "'");
  Rng rng(mix_seeds({seed_, hash_string(example_id), shot_seed, kBaseSalt}));
  if (rng.uniform() < it->second.difficulty) return other_label(rng, num_labels_, it->second.gold);
  return it->second.gold;
}

std::vector<double> SyntheticScorer::score(const ScoreRequest& request, std::span<const std::string> continuations) {
  if (continuations.size() != num_labels_) {
    throw ProtocolError("synthetic scorer configured for " + std::to_string(num_labels_) + " labels, got " +
                        std::to_string(continuations.size()) + " continuations");
  }
  const auto& id = request.key.example_id;
  if (id.starts_with(kContentFreePrefix)) return label_bias_;

  const std::size_t base = base_prediction(id, request.shot_seed);
  const double difficulty = examples_.at(id).difficulty;
  const std::uint64_t variant_hash = hash_string(request.key.variant_id);

  std::size_t prediction = base;
  if (request.key.variant_id != "base") {
    Rng flip(mix_seeds({seed_, hash_string(id), request.shot_seed, variant_hash, kFlipSalt}));
    if (flip.uniform() < difficulty) prediction = other_label(flip, num_labels_, base);
  }

  Rng margin(mix_seeds({seed_, hash_string(id), request.shot_seed, variant_hash, kMarginSalt}));
  const double uniform_mass = 1.0 / static_cast<double>(num_labels_);
  const double top = uniform_mass + (1.0 - uniform_mass) * (0.05 + 0.9 * margin.uniform());
  const double rest = (1.0 - top) / static_cast<double>(num_labels_ - 1);

  std::vector<double> log_scores(num_labels_);
  for (std::size_t l = 0; l < num_labels_; ++l) {
    log_scores[l] = std::log(l == prediction ? top : rest) + label_bias_[l];
  }
  return log_scores;
}

}  // namespace sensel
