#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sensel/rng.hpp"
#include "sensel/task_data.hpp"

namespace sensel::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("sensel-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::filesystem::path golden_dir() { return SENSEL_GOLDEN_DIR; }

// Compares against tests/golden/<name>; SENSEL_UPDATE_GOLDEN=1 rewrites the file instead.
inline std::string golden(const std::string& name, const std::string& actual) {
  const auto path = golden_dir() / name;
  if (const char* update = std::getenv("SENSEL_UPDATE_GOLDEN"); update && std::string(update) == "1") {
    write_file(path, actual);
  }
  return read_file(path);
}

inline TaskSpec demo_spec(std::size_t num_instructions = 3) {
  TaskSpec spec;
  spec.name = "toy";
  spec.labels = {"negative", "positive"};
  spec.verbalizers = {"bad", "good"};
  const std::vector<std::string> pool = {"Classify the sentiment of the review.", "Is this review positive or negative?",
                                         "Tell me how the reviewer felt.", "Label the review.",
                                         "What is the sentiment here?", "Decide the polarity of the text.",
                                         "Rate the review as good or bad."};
  spec.instructions.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(num_instructions));
  spec.prompt_template = "{instruction}\n\nReview: {input}\nSentiment: {label}";
  return spec;
}

inline std::vector<LabeledExample> make_examples(const std::string& prefix, std::size_t n, std::size_t num_labels,
                                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(LabeledExample{prefix + std::to_string(i), "text number " + std::to_string(i),
                                 static_cast<std::size_t>(rng.index(num_labels))});
  }
  return out;
}

// A random point on the probability simplex.
inline std::vector<double> random_simplex(Rng& rng, std::size_t dim) {
  std::vector<double> p(dim);
  double total = 0.0;
  for (auto& v : p) {
    v = -std::log(1.0 - rng.uniform());
    total += v;
  }
  for (auto& v : p) v /= total;
  return p;
}

}  // namespace sensel::testing
