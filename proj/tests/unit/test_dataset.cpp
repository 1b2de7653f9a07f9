#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "koti/dataset.hpp"
#include "koti/prompt.hpp"
#include "koti/stats.hpp"
#include "koti/synthetic.hpp"
#include "koti/toy_scorer.hpp"
#include "test_helpers.hpp"

namespace {

using koti::Note;

std::vector<Note> jsonl(const std::string& s) {
  std::istringstream in(s);
  return koti::parse_jsonl(in);
}

std::vector<Note> csv(const std::string& s) {
  std::istringstream in(s);
  return koti::parse_csv(in);
}

template <class E>
std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const E& e) {
    return e.what();
  }
  return "<no throw>";
}

TEST(Jsonl, ParsesLabeledAndUnlabeledNotes) {
  const auto notes = jsonl(
      "{\"id\":\"a\",\"text\":\"Cramps.\",\"label\":\"Yes\"}\n\n"
      "{\"id\":\"b\",\"text\":\"x\",\"label\":null}\n"
      "{\"id\":\"c\",\"text\":\"\"}\n");
  ASSERT_EQ(notes.size(), 3u);
  EXPECT_EQ(notes[0], (Note{"a", "Cramps.", "Yes"}));
  EXPECT_FALSE(notes[1].label);
  EXPECT_FALSE(notes[2].label);
}

TEST(Jsonl, ErrorsCarryLineNumbers) {
  const auto m = message_of<koti::ParseError>(
      [] { jsonl("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\",\"text\":}\n"); });
  EXPECT_NE(m.find("line 2"), std::string::npos) << m;
  EXPECT_THROW(jsonl("{\"text\":\"x\"}\n"), koti::ParseError);
  EXPECT_THROW(jsonl("{\"id\":\"a\",\"text\":3}\n"), koti::ParseError);
  EXPECT_THROW(jsonl("[1,2]\n"), koti::ParseError);
  EXPECT_THROW(jsonl("{\"id\":\"a\",\"text\":\"x\",\"label\":1}\n"), koti::ParseError);
}

TEST(Jsonl, DuplicateIdsRejected) {
  EXPECT_THROW(jsonl("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n"),
               koti::DuplicateId);
}

TEST(Csv, QuotedFieldsWithCommasQuotesAndNewlines) {
  const auto notes = csv(
      "id,label,text\r\n"
      "a,Yes,\"Reports cramps, severe.\"\r\n"
      "b,,\"He said \"\"no\"\".\nNext line.\"\n");
  ASSERT_EQ(notes.size(), 2u);
  EXPECT_EQ(notes[0].text, "Reports cramps, severe.");
  EXPECT_EQ(notes[0].label, "Yes");
  EXPECT_EQ(notes[1].text, "He said \"no\".\nNext line.");
  EXPECT_FALSE(notes[1].label);
}

TEST(Csv, Errors) {
  EXPECT_THROW(csv("id,text\na,\"open\n"), koti::ParseError);
  EXPECT_THROW(csv("ident,text\na,b\n"), koti::ParseError);
  const auto m = message_of<koti::ParseError>([] { csv("id,text\na,b\nc,d,e\n"); });
  EXPECT_NE(m.find("line 3"), std::string::npos) << m;
  EXPECT_THROW(csv("id,text\na,x\na,y\n"), koti::DuplicateId);
  EXPECT_THROW(csv("id,text\na,x\"y\n"), koti::ParseError);
}

TEST(Dataset, RoundTripsThroughBothFormats) {
  const std::vector<Note> notes = {{"a", "Line one.\nLine \"two\", ok.", "Yes"},
                                   {"b", "", std::nullopt},
                                   {"c", "x,y", "No"}};
  std::ostringstream j, c;
  koti::write_jsonl(j, notes);
  koti::write_csv(c, notes);
  EXPECT_EQ(jsonl(j.str()), notes);
  EXPECT_EQ(csv(c.str()), notes);
}

TEST(Dataset, FormatFromPathAndLookup) {
  EXPECT_EQ(koti::format_from_path("x/notes.CSV"), koti::DataFormat::Csv);
  EXPECT_EQ(koti::format_from_path("notes.jsonl"), koti::DataFormat::Jsonl);
  EXPECT_THROW(koti::format_from_path("notes.txt"), koti::ConfigError);
  EXPECT_THROW(koti::load_dataset("/nonexistent/notes.jsonl"), koti::IoError);
  const std::vector<Note> notes = {{"a", "x", std::nullopt}};
  EXPECT_EQ(koti::find_note(notes, "a").text, "x");
  EXPECT_THROW(koti::find_note(notes, "z"), koti::UnknownNoteId);
}

TEST(TaskConfig, ShippedConfigsLoad) {
  for (const char* name : {"dys", "oa", "dep", "pvd", "smk"}) {
    const auto t = koti::testing::shipped_task(name);
    EXPECT_EQ(t.name, name);
    EXPECT_EQ(t.label_words.size(), t.classes.size());
  }
  const auto smk = koti::testing::shipped_task("smk");
  EXPECT_EQ(smk.classes.size(), 4u);
}

TEST(TaskConfig, AsPrintedKeywordsSwapInWhenRequested) {
  const auto fixed = koti::testing::shipped_task("oa");
  const auto printed = koti::testing::shipped_task("oa", true);
  EXPECT_TRUE(fixed.keywords.matches("osteoarthritis of the knee"));
  EXPECT_FALSE(printed.keywords.matches("osteoarthritis of the knee"));
  EXPECT_TRUE(printed.keywords.matches("depressed mood"));
  // tasks without an alternative list are unchanged
  EXPECT_EQ(koti::testing::shipped_task("dys", true).keywords.patterns(),
            koti::testing::dys().keywords.patterns());
}

TEST(TaskConfig, InvalidConfigsRejected) {
  const auto base = koti::to_json(koti::testing::dys());
  EXPECT_NO_THROW(koti::parse_task_config(base));
  auto j = base;
  j["label_words"] = {"yes", "no"};
  EXPECT_THROW(koti::parse_task_config(j), koti::ConfigError);
  j = base;
  j["keywords"] = nlohmann::json::array();
  EXPECT_THROW(koti::parse_task_config(j), koti::ConfigError);
  j = base;
  j["affirmative_class"] = "Maybe";
  EXPECT_THROW(koti::parse_task_config(j), koti::ConfigError);
  j = base;
  j.erase("classes");
  EXPECT_THROW(koti::parse_task_config(j), koti::ConfigError);
  j = base;
  j["template"] = {{"before_mask", ""}};
  EXPECT_THROW(koti::parse_task_config(j), koti::ConfigError);
  EXPECT_THROW(koti::load_task_config("/nonexistent.json"), koti::IoError);
}

TEST(Stats, ChunkRuns) {
  EXPECT_EQ(koti::chunk_runs(1568, 512), 4u);
  EXPECT_EQ(koti::chunk_runs(512, 512), 1u);
  EXPECT_EQ(koti::chunk_runs(513, 512), 2u);
  EXPECT_EQ(koti::chunk_runs(0, 512), 1u);
  EXPECT_EQ(koti::chunk_runs(1, 512), 1u);
}

TEST(Stats, SmallCorpusByHand) {
  const auto task = koti::testing::dys();
  const koti::ToyScorer scorer(task);
  // token counts 2, 4, 6 with limit 3
  const std::vector<Note> notes = {{"a", "a b", std::nullopt},
                                   {"b", "cramps a b c", std::nullopt},
                                   {"c", "a b c d e f", std::nullopt}};
  const auto s = koti::compute_stats(notes, task, scorer, 3);
  EXPECT_EQ(s.notes, 3u);
  EXPECT_DOUBLE_EQ(s.mean_tokens, 4.0);
  EXPECT_DOUBLE_EQ(s.sd_tokens, std::sqrt(8.0 / 3.0));
  EXPECT_DOUBLE_EQ(s.proportion_over_limit, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.mean_chunk_runs, (1.0 + 2.0 + 2.0) / 3.0);
  EXPECT_DOUBLE_EQ(s.keyword_hit_rate, 1.0 / 3.0);
}

TEST(Stats, EmptyCorpusAndOrderIndependence) {
  const auto task = koti::testing::dys();
  const koti::ToyScorer scorer(task);
  EXPECT_EQ(koti::compute_stats({}, task, scorer).notes, 0u);
  auto notes = koti::generate_synthetic([] {
    auto s = koti::dysmenorrhea_shaped_spec(3);
    s.note_tokens = 300;
    s.salient_depth = 100;
    return s;
  }());
  for (std::size_t i = 0; i < notes.size(); i += 3) notes[i].text += " extra words here";
  const auto a = koti::compute_stats(notes, task, scorer, 256);
  std::mt19937_64 rng(1);
  std::shuffle(notes.begin(), notes.end(), rng);
  const auto b = koti::compute_stats(notes, task, scorer, 256);
  EXPECT_EQ(a.mean_tokens, b.mean_tokens);
  EXPECT_EQ(a.sd_tokens, b.sd_tokens);
}

TEST(Synthetic, ExactLengthsLabelsAndDepth) {
  const auto spec = koti::dysmenorrhea_shaped_spec(5);
  const auto notes = koti::generate_synthetic(spec);
  ASSERT_EQ(notes.size(), 150u);
  const koti::ToyTokenizer tok("[MASK]");
  const koti::KeywordSet kw(spec.keywords);
  std::map<std::string, int> counts;
  for (const auto& n : notes) {
    ++counts[*n.label];
    const auto t = tok.tokenize(n.text);
    ASSERT_EQ(t.size(), 1000u) << n.id;
    const auto split = koti::split_at_first_flagged(n.text, kw);
    if (*n.label == "Unknown") {
      ASSERT_FALSE(split) << n.id;
      continue;
    }
    ASSERT_TRUE(split);
    const auto a = tok.tokenize(split->text_a);
    // "patient <verb> <kw> ." ends the flagged sentence, starting at depth 600
    const auto verb = *n.label == "Yes" ? "reports" : "denies";
    const auto it = std::find(a.begin() + 600, a.end(), verb);
    ASSERT_EQ(it - a.begin(), 601) << n.id;
    ASSERT_EQ(a[600], "patient");
    ASSERT_EQ(a.back(), ".");
  }
  EXPECT_EQ(counts, (std::map<std::string, int>{{"No", 52}, {"Unknown", 64}, {"Yes", 34}}));
  EXPECT_EQ(notes[7].id, "syn-007");
}

TEST(Synthetic, DeterministicAndSeedSensitive) {
  const auto a = koti::generate_synthetic(koti::dysmenorrhea_shaped_spec(1));
  EXPECT_EQ(a, koti::generate_synthetic(koti::dysmenorrhea_shaped_spec(1)));
  EXPECT_NE(a, koti::generate_synthetic(koti::dysmenorrhea_shaped_spec(2)));
}

TEST(Synthetic, DepthZeroPutsKeywordFirst) {
  auto spec = koti::dysmenorrhea_shaped_spec(2);
  spec.salient_depth = 0;
  spec.note_tokens = 50;
  for (const auto& n : koti::generate_synthetic(spec))
    if (*n.label == "Yes") {
      EXPECT_EQ(n.text.rfind("patient reports ", 0), 0u) << n.text;
    }
}

TEST(Synthetic, DeepKeywordIsLostUnderTailTruncation) {
  const auto task = koti::testing::dys();
  const koti::ToyScorer scorer(task);
  const koti::KeywordSet kw(task.keywords.patterns());
  for (const auto& n : koti::generate_synthetic(koti::dysmenorrhea_shaped_spec(3))) {
    const auto p = koti::build_sti_s(n, task, scorer);
    const auto kept = koti::note_tokens_of(p);
    ASSERT_FALSE(kw.matches(scorer.detokenize(kept))) << n.id;
  }
}

TEST(Synthetic, DistractorsFollowTheSalientSentence) {
  auto spec = koti::dysmenorrhea_shaped_spec(4);
  spec.distractor_rate = 1.0;
  const koti::ToyTokenizer tok("[MASK]");
  for (const auto& n : koti::generate_synthetic(spec)) {
    const auto t = tok.tokenize(n.text);
    ASSERT_EQ(t.size(), 1000u);
    if (*n.label == "Unknown") continue;
    const auto first = *n.label == "Yes" ? "reports" : "denies";
    const auto second = *n.label == "Yes" ? "denies" : "reports";
    const auto a = std::find(t.begin(), t.end(), first) - t.begin();
    const auto b = std::find(t.begin(), t.end(), second) - t.begin();
    EXPECT_EQ(a, 601);
    EXPECT_GE(b - a, 40 + 3);
    EXPECT_LE(b - a, 150 + 6);
  }
}

TEST(Synthetic, InvalidSpecs) {
  auto spec = koti::dysmenorrhea_shaped_spec();
  spec.salient_depth = 1000;
  EXPECT_THROW(koti::generate_synthetic(spec), koti::InvalidSpec);
  spec = koti::dysmenorrhea_shaped_spec();
  spec.salient_depth = 998;
  EXPECT_THROW(koti::generate_synthetic(spec), koti::InvalidSpec);
  spec = koti::dysmenorrhea_shaped_spec();
  spec.keywords.clear();
  EXPECT_THROW(koti::generate_synthetic(spec), koti::InvalidSpec);
  spec = koti::dysmenorrhea_shaped_spec();
  spec.distractor_rate = 1.5;
  EXPECT_THROW(koti::generate_synthetic(spec), koti::InvalidSpec);
}

}  // namespace
