#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "json.hpp"
#include "sensel/error.hpp"
#include "sensel/task_data.hpp"
#include "support.hpp"

using namespace sensel;
using sensel::testing::TempDir;

TEST(LoadDataset, EmptyFileGivesNoRecords) {
  TempDir dir("data");
  sensel::testing::write_file(dir / "empty.jsonl", "");
  EXPECT_TRUE(load_dataset(dir / "empty.jsonl").empty());
}

TEST(LoadDataset, KeepsFileOrder) {
  std::istringstream in(R"({"id": "c", "text": "third?", "label": 1}
{"id": "a", "text": "first", "label": 0}

{"id": "b", "text": "ünïcode", "label": 2}
)");
  const auto rows = parse_dataset(in, 3);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].id, "c");
  EXPECT_EQ(rows[1].id, "a");
  EXPECT_EQ(rows[2].text, "ünïcode");
  EXPECT_EQ(rows[2].label, 2u);
}

TEST(LoadDataset, LabelEqualToLIsRejectedWithRecordId) {
  std::istringstream in("{\"id\": \"ok\", \"text\": \"x\", \"label\": 0}\n{\"id\": \"bad-7\", \"text\": \"x\", \"label\": 2}\n");
  try {
    parse_dataset(in, 2);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("bad-7"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(LoadDataset, MalformedLineReportsLineNumber) {
  std::istringstream in("{\"id\": \"a\", \"text\": \"x\", \"label\": 0}\n{\"id\": \"b\", \"text\": \n");
  try {
    parse_dataset(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(LoadDataset, MissingFieldsAndDuplicatesAreErrors) {
  std::istringstream missing("{\"id\": \"a\", \"label\": 0}\n");
  EXPECT_THROW(parse_dataset(missing), ParseError);
  std::istringstream dup("{\"id\": \"a\", \"text\": \"x\", \"label\": 0}\n{\"id\": \"a\", \"text\": \"y\", \"label\": 1}\n");
  EXPECT_THROW(parse_dataset(dup), ValidationError);
}

TEST(LoadDataset, RoundTrip) {
  TempDir dir("data");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto rows = sensel::testing::make_examples("r", seed * 3, 4, seed);
    if (!rows.empty()) rows[0].text = "quote \" and\nnewline \\ tab\t";
    write_dataset(dir / "rows.jsonl", rows);
    EXPECT_EQ(load_dataset(dir / "rows.jsonl", 4), rows);
  }
}

TEST(TaskSpec, ParsesAndValidates) {
  const auto spec = parse_task_spec(R"({"name": "t", "labels": ["a", "b"], "verbalizers": ["x", "y"],
      "instructions": ["do it"], "template": "{instruction}\n{input}\n{label}"})");
  EXPECT_EQ(spec.num_labels(), 2u);
  EXPECT_EQ(parse_task_spec(task_spec_to_json(spec)).prompt_template, spec.prompt_template);
}

TEST(TaskSpec, RejectsBrokenSpecs) {
  const auto with = [](const std::string& labels, const std::string& verbalizers, const std::string& instructions,
                       const std::string& tmpl) {
    return "{\"name\": \"t\", \"labels\": " + labels + ", \"verbalizers\": " + verbalizers +
           ", \"instructions\": " + instructions + ", \"template\": \"" + tmpl + "\"}";
  };
  const std::string ok_tmpl = "{instruction} {input} {label}";
  EXPECT_THROW(parse_task_spec(with("[\"a\"]", "[\"x\"]", "[\"i\"]", ok_tmpl)), ValidationError);
  EXPECT_THROW(parse_task_spec(with("[\"a\",\"b\"]", "[\"x\",\"x\"]", "[\"i\"]", ok_tmpl)), ValidationError);
  EXPECT_THROW(parse_task_spec(with("[\"a\",\"b\"]", "[\"x\",\"\"]", "[\"i\"]", ok_tmpl)), ValidationError);
  EXPECT_THROW(parse_task_spec(with("[\"a\",\"b\"]", "[\"x\",\"y\"]", "[]", ok_tmpl)), ValidationError);
  EXPECT_THROW(parse_task_spec(with("[\"a\",\"b\"]", "[\"x\",\"y\"]", "[\"i\"]", "{instruction} {label}")),
               ValidationError);
  EXPECT_THROW(parse_task_spec("not json"), ParseError);
}

TEST(SampleFewshot, WholePoolWhenKEqualsSize) {
  const auto train = sensel::testing::make_examples("t", 6, 2, 1);
  const auto set = sample_fewshot(train, 6, 3);
  std::set<std::string> ids;
  for (const auto& e : set.examples) ids.insert(e.id);
  EXPECT_EQ(ids.size(), 6u);
}

TEST(SampleFewshot, DeterministicPerSeed) {
  const auto train = sensel::testing::make_examples("t", 50, 3, 1);
  EXPECT_EQ(sample_fewshot(train, 4, 7).examples, sample_fewshot(train, 4, 7).examples);
  EXPECT_NE(sample_fewshot(train, 4, 7).examples, sample_fewshot(train, 4, 8).examples);
}

TEST(SampleFewshot, TooSmallPoolIsInsufficientData) {
  const auto train = sensel::testing::make_examples("t", 3, 2, 1);
  EXPECT_THROW(sample_fewshot(train, 4, 0), InsufficientDataError);
}

TEST(SampleFewshot, DrawsDistinctMembersOfTheTrainSplit) {
  sensel::Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(40);
    const std::size_t k = 1 + rng.index(n);
    const auto train = sensel::testing::make_examples("p", n, 3, trial);
    const auto set = sample_fewshot(train, k, rng.next());
    ASSERT_EQ(set.size(), k);
    std::set<std::string> seen;
    for (const auto& e : set.examples) {
      EXPECT_TRUE(seen.insert(e.id).second);
      EXPECT_NE(std::find(train.begin(), train.end(), e), train.end());
    }
  }
}

TEST(SampleFewshot, GoldenSeedsOverHundredExamplePool) {
  const auto train = sensel::testing::make_examples("pool-", 100, 2, 2024);
  nlohmann::json doc = nlohmann::json::object();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::vector<std::string> ids;
    for (const auto& e : sample_fewshot(train, 4, seed).examples) ids.push_back(e.id);
    doc[std::to_string(seed)] = ids;
  }
  const std::string actual = doc.dump(2) + "\n";
  EXPECT_EQ(actual, sensel::testing::golden("fewshot_seeds.json", actual));
}
