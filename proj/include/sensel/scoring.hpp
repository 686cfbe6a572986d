#pragma once

#include <chrono>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sensel {

/// Per-label log-scores and the normalized distribution derived from them.
class LabelScores {
 public:
  LabelScores() = default;

  /// probs = exp(log_scores) / sum(exp(log_scores)), computed with a max shift.
  static LabelScores from_log_scores(std::vector<double> log_scores);
  /// Takes an already-normalized distribution (renormalized defensively against drift).
  static LabelScores from_probs(std::vector<double> probs);

  const std::vector<double>& log_scores() const { return log_scores_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }

  bool operator==(const LabelScores&) const = default;

 private:
  std::vector<double> log_scores_;
  std::vector<double> probs_;
};

/// argmax over probs, ties to the lowest label index.
std::size_t predict_label(const LabelScores& scores);

struct ScoreKey {
  std::string example_id;
  std::string variant_id;

  auto operator<=>(const ScoreKey&) const = default;
};

struct ScoreRequest {
  ScoreKey key;
  std::uint64_t shot_seed = 0;
  std::string prompt;
};

/// An LM backend. Implementations must tolerate concurrent calls.
class Scorer {
 public:
  virtual ~Scorer() = default;
  /// One log-score per continuation, in order.
  virtual std::vector<double> score(const ScoreRequest& request,
                                    std::span<const std::string> continuations) = 0;
  virtual std::string identity() const = 0;
};

enum class VerbalizerScoring {
  Sum,           // total continuation log-score
  MeanPerToken,  // divided by the verbalizer's whitespace token count
};

VerbalizerScoring parse_verbalizer_scoring(std::string_view name);

LabelScores score_labels(Scorer& backend, const ScoreRequest& request,
                         std::span<const std::string> verbalizers,
                         VerbalizerScoring mode = VerbalizerScoring::Sum);

struct ScoreMatrixInfo {
  std::string task;
  std::string backend;
  std::uint64_t shot_seed = 0;
};

class ScoreMatrix {
 public:
  ScoreMatrixInfo info;

  void insert(ScoreKey key, LabelScores scores);
  bool contains(const ScoreKey& key) const { return entries_.count(key) != 0; }
  /// Throws ValidationError naming the missing key.
  const LabelScores& at(const ScoreKey& key) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<ScoreKey, LabelScores>& entries() const { return entries_; }

 private:
  std::map<ScoreKey, LabelScores> entries_;
};

/// Append-only line-delimited store of raw log-scores keyed by (example_id, variant_id).
/// A truncated final line is ignored on load; any other malformed line is a ParseError.
class ScoreCache {
 public:
  explicit ScoreCache(std::filesystem::path path);

  const std::filesystem::path& path() const { return path_; }
  std::size_t size() const;
  bool contains(const ScoreKey& key) const;
  std::optional<std::vector<double>> find(const ScoreKey& key) const;
  std::map<ScoreKey, std::vector<double>> snapshot() const;

  /// Appends one record and flushes. Thread-safe.
  void append(const ScoreKey& key, const std::vector<double>& log_scores);
  /// Rewrites the file with records sorted by key (atomic rename).
  void compact();

 private:
  void load();

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<ScoreKey, std::vector<double>> entries_;
};

std::string score_record_line(const ScoreKey& key, std::span<const double> log_scores);

/// Serves scores from a score-cache-format file or an in-memory table.
class PrecomputedScorer : public Scorer {
 public:
  explicit PrecomputedScorer(std::map<ScoreKey, std::vector<double>> table, std::string name = "precomputed");
  static std::unique_ptr<PrecomputedScorer> from_file(const std::filesystem::path& path);

  std::vector<double> score(const ScoreRequest& request, std::span<const std::string> continuations) override;
  std::string identity() const override { return name_; }

 private:
  std::map<ScoreKey, std::vector<double>> table_;
  std::string name_;
};

/// Client for POST /v1/score {"prompt", "continuations"} -> {"logprobs"}.
class RemoteScorer : public Scorer {
 public:
  explicit RemoteScorer(std::string base_url, std::chrono::seconds timeout = std::chrono::seconds(120));

  std::vector<double> score(const ScoreRequest& request, std::span<const std::string> continuations) override;
  std::string identity() const override { return "remote:" + base_url_; }

 private:
  std::string base_url_;
  std::chrono::seconds timeout_;
};

std::string score_request_body(std::string_view prompt, std::span<const std::string> continuations);
/// Throws ProtocolError on malformed bodies or wrong arity.
std::vector<double> parse_score_response(std::string_view body, std::size_t expected_arity);

struct SyntheticExample {
  std::size_t gold = 0;
  double difficulty = 0.0;  // in [0, 1]
};

/// Seeded stand-in for an LM. For an example with difficulty d:
///   - under the base variant the prediction is wrong with probability d;
///   - under any other variant it moves away from the base prediction with probability d;
///   - the winning probability is drawn uniformly, independent of d.
/// `label_bias` is added to every log-score (including content-free probes, whose
/// clean distribution is uniform), so contextual calibration removes it exactly.
/// Requests whose example_id starts with "__cf__" are content-free probes.
class SyntheticScorer : public Scorer {
 public:
  SyntheticScorer(std::map<std::string, SyntheticExample> examples, std::size_t num_labels,
                  std::uint64_t seed, std::vector<double> label_bias = {});

  /// Gold labels from the test set, difficulty ~ U[0, 1) hashed from (seed, example_id).
  static double default_difficulty(std::uint64_t seed, std::string_view example_id);

  std::vector<double> score(const ScoreRequest& request, std::span<const std::string> continuations) override;
  std::string identity() const override;

  std::size_t base_prediction(const std::string& example_id, std::uint64_t shot_seed) const;

 private:
  std::map<std::string, SyntheticExample> examples_;
  std::size_t num_labels_;
  std::uint64_t seed_;
  std::vector<double> label_bias_;
};

struct BatchOptions {
  std::size_t parallelism = 1;
  std::size_t max_attempts = 3;
  std::chrono::milliseconds backoff{100};  // doubled after each failed attempt
  VerbalizerScoring verbalizer_scoring = VerbalizerScoring::Sum;
};

struct BatchStats {
  std::size_t requested = 0;
  std::size_t cached = 0;
  std::size_t backend_calls = 0;
};

/// Scores every request (keys must be distinct), reusing and extending `cache` when given.
/// The resulting matrix does not depend on completion order. On a transport failure that
/// survives the retries, the run aborts with a TransportError naming the key; everything
/// scored so far stays in the cache.
ScoreMatrix batch_score(Scorer& backend, std::span<const ScoreRequest> requests,
                        std::span<const std::string> verbalizers, ScoreCache* cache,
                        const BatchOptions& options = {}, BatchStats* stats = nullptr);

}  // namespace sensel
