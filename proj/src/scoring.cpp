#include "sensel/scoring.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "sensel/error.hpp"

namespace sensel {

LabelScores LabelScores::from_log_scores(std::vector<double> log_scores) {
  if (log_scores.empty()) throw ValidationError("label scores: empty score vector");
  double max_score = -std::numeric_limits<double>::infinity();
  for (double s : log_scores) {
    if (std::isnan(s) || s == std::numeric_limits<double>::infinity()) {
      throw ValidationError("label scores: log-score must be finite or -inf");
    }
    max_score = std::max(max_score, s);
  }
  if (!std::isfinite(max_score)) throw ValidationError("label scores: every log-score is -inf");

  LabelScores out;
  out.probs_.resize(log_scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < log_scores.size(); ++i) {
    out.probs_[i] = std::exp(log_scores[i] - max_score);
    total += out.probs_[i];
  }
  for (double& p : out.probs_) p /= total;
  out.log_scores_ = std::move(log_scores);
  return out;
}

LabelScores LabelScores::from_probs(std::vector<double> probs) {
  if (probs.empty()) throw ValidationError("label scores: empty distribution");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("label scores: probabilities must be finite and >= 0");
    total += p;
  }
  if (!(total > 0.0)) throw ValidationError("label scores: distribution has no mass");
  LabelScores out;
  out.log_scores_.resize(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    probs[i] /= total;
    out.log_scores_[i] = std::log(probs[i]);
  }
  out.probs_ = std::move(probs);
  return out;
}

std::size_t predict_label(const LabelScores& scores) {
  const auto& probs = scores.probs();
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

VerbalizerScoring parse_verbalizer_scoring(std::string_view name) {
  if (name == "sum") return VerbalizerScoring::Sum;
  if (name == "mean") return VerbalizerScoring::MeanPerToken;
  throw ConfigError("unknown verbalizer scoring '" + std::string(name) + "' (expected sum or mean)");
}

LabelScores score_labels(Scorer& backend, const ScoreRequest& request, std::span<const std::string> verbalizers,
                         VerbalizerScoring mode) {
  if (verbalizers.size() < 2) throw ConfigError("scoring needs at least 2 verbalizers");
  std::vector<double> raw = backend.score(request, verbalizers);
  if (raw.size() != verbalizers.size()) {
    throw ProtocolError("backend returned " + std::to_string(raw.size()) + " scores for " +
                        std::to_string(verbalizers.size()) + " continuations");
  }
  if (mode == VerbalizerScoring::MeanPerToken) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
      std::istringstream in(verbalizers[i]);
      std::size_t tokens = 0;
      for (std::string t; in >> t;) ++tokens;
      raw[i] /= static_cast<double>(std::max<std::size_t>(tokens, 1));
    }
  }
  return LabelScores::from_log_scores(std::move(raw));
}

void ScoreMatrix::insert(ScoreKey key, LabelScores scores) { entries_.insert_or_assign(std::move(key), std::move(scores)); }

const LabelScores& ScoreMatrix::at(const ScoreKey& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    throw ValidationError("score matrix has no entry for example '" + key.example_id + "', variant '" +
                          key.variant_id + "'");
  }
  return it->second;
}

PrecomputedScorer::PrecomputedScorer(std::map<ScoreKey, std::vector<double>> table, std::string name)
    : table_(std::move(table)), name_(std::move(name)) {}

std::unique_ptr<PrecomputedScorer> PrecomputedScorer::from_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("score store " + path.string() + " does not exist");
  ScoreCache store(path);
  return std::make_unique<PrecomputedScorer>(store.snapshot(), "precomputed:" + path.filename().string());
}

std::vector<double> PrecomputedScorer::score(const ScoreRequest& request, std::span<const std::string>) {
  auto it = table_.find(request.key);
  if (it == table_.end()) {
    throw TransportError("score store has no entry for example '" + request.key.example_id + "', variant '" +
                         request.key.variant_id + "'");
  }
  return it->second;
}

namespace {

std::vector<double> score_with_retries(Scorer& backend, const ScoreRequest& request,
                                       std::span<const std::string> verbalizers, const BatchOptions& options,
                                       std::atomic<std::size_t>& calls) {
  auto delay = options.backoff;
  const std::size_t attempts = std::max<std::size_t>(options.max_attempts, 1);
  for (std::size_t attempt = 1;; ++attempt) {
    try {
      calls.fetch_add(1, std::memory_order_relaxed);
      return score_labels(backend, request, verbalizers, options.verbalizer_scoring).log_scores();
    } catch (const TransportError& e) {
      if (attempt >= attempts) {
        throw TransportError("scoring example '" + request.key.example_id + "', variant '" +
                             request.key.variant_id + "' failed after " + std::to_string(attempts) +
                             " attempts: " + e.what());
      }
    }
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

}  // namespace

ScoreMatrix batch_score(Scorer& backend, std::span<const ScoreRequest> requests,
                        std::span<const std::string> verbalizers, ScoreCache* cache, const BatchOptions& options,
                        BatchStats* stats) {
  {
    std::set<ScoreKey> keys;
    for (const auto& r : requests) {
      if (!keys.insert(r.key).second) {
        throw ValidationError("duplicate score key (" + r.key.example_id + ", " + r.key.variant_id + ")");
      }
    }
  }

  std::vector<std::vector<double>> results(requests.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    std::optional<std::vector<double>> hit;
    if (cache) hit = cache->find(requests[i].key);
    if (hit && hit->size() == verbalizers.size()) {
      results[i] = std::move(*hit);
    } else {
      pending.push_back(i);
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> calls{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= pending.size()) return;
      const auto& request = requests[pending[slot]];
      try {
        auto scores = score_with_retries(backend, request, verbalizers, options, calls);
        if (cache) cache->append(request.key, scores);
        results[pending[slot]] = std::move(scores);
      } catch (const Error& e) {
        std::lock_guard lock(error_mutex);
        if (!first_error) {
          if (e.kind() == ErrorKind::Transport) {
            first_error = std::current_exception();
          } else {
            first_error = std::make_exception_ptr(
                Error(e.kind(), "scoring example '" + request.key.example_id + "', variant '" +
                                    request.key.variant_id + "': " + e.what()));
          }
        }
        failed.store(true);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
      }
    }
  };

  const std::size_t threads = std::min(std::max<std::size_t>(options.parallelism, 1), pending.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  if (cache && !pending.empty()) cache->compact();

  ScoreMatrix matrix;
  matrix.info.backend = backend.identity();
  if (!requests.empty()) matrix.info.shot_seed = requests.front().shot_seed;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    matrix.insert(requests[i].key, LabelScores::from_log_scores(std::move(results[i])));
  }
  if (stats) {
    stats->requested = requests.size();
    stats->cached = requests.size() - pending.size();
    stats->backend_calls = calls.load();
  }
  return matrix;
}

}  // namespace sensel
