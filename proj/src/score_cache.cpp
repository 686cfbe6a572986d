#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sensel/error.hpp"
#include "sensel/scoring.hpp"

namespace sensel {

using nlohmann::json;

std::string score_record_line(const ScoreKey& key, std::span<const double> log_scores) {
  json doc = {{"example_id", key.example_id},
              {"variant_id", key.variant_id},
              {"log_scores", std::vector<double>(log_scores.begin(), log_scores.end())}};
  return doc.dump();
}

ScoreCache::ScoreCache(std::filesystem::path path) : path_(std::move(path)) { load(); }

void ScoreCache::load() {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;  // a missing cache is an empty cache

  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));

  bool dropped_tail = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json doc = json::parse(line);
      ScoreKey key{doc.at("example_id").get<std::string>(), doc.at("variant_id").get<std::string>()};
      entries_.insert_or_assign(std::move(key), doc.at("log_scores").get<std::vector<double>>());
    } catch (const json::exception& e) {
      if (i + 1 == lines.size()) {
        dropped_tail = true;  // interrupted write
        break;
      }
      throw ParseError("score cache " + path_.string() + " line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  in.close();
  if (dropped_tail) compact();
}

std::size_t ScoreCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

bool ScoreCache::contains(const ScoreKey& key) const {
  std::lock_guard lock(mutex_);
  return entries_.count(key) != 0;
}

std::optional<std::vector<double>> ScoreCache::find(const ScoreKey& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::map<ScoreKey, std::vector<double>> ScoreCache::snapshot() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

void ScoreCache::append(const ScoreKey& key, const std::vector<double>& log_scores) {
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw ValidationError("cannot append to score cache " + path_.string());
  out << score_record_line(key, log_scores) << '\n';
  out.flush();
  entries_.insert_or_assign(key, log_scores);
}

void ScoreCache::compact() {
  std::lock_guard lock(mutex_);
  auto tmp = path_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write score cache " + tmp.string());
    for (const auto& [key, scores] : entries_) out << score_record_line(key, scores) << '\n';
  }
  std::filesystem::rename(tmp, path_);
}

}  // namespace sensel
