#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <string>

#include "seqgraph/corpus.hpp"

using namespace seqgraph;

namespace {

QuestionInstance tiny_instance() {
  QuestionInstance inst;
  inst.id = "q0";
  inst.question = "where is the cat ?";
  inst.answer = "on the mat";
  Passage p1;
  p1.title = "Cat";
  p1.sentences = {"the cat sat .", "it links to Mat often ."};
  EntitySpan span;
  span.sentence_idx = 1;
  span.char_start = 12;
  span.char_end = 15;
  span.target_title = "Mat";
  p1.entity_spans.push_back(span);
  Passage p2;
  p2.title = "Mat";
  p2.sentences = {"the mat is on the floor ."};
  inst.passages = {p1, p2};
  inst.gold_supports = {{"Cat", 2}, {"Mat", 1}};
  inst.decomposition = {{"what does cat link to ?", "Mat"},
                        {"where is the mat ?", "on the mat"}};
  inst.hop_count = 2;
  inst.num_distractors = 0;
  return inst;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/seqgraph_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("dataset round-trips through JSON") {
  auto inst = tiny_instance();
  TempFile data("corpus_rt.json");
  TempFile side("corpus_rt.spans.json");
  save_dataset(data.path, {inst});
  save_sidecar(side.path, {inst});
  auto loaded = load_dataset(data.path, DatasetStyle::Hotpot);
  load_sidecar(side.path, loaded);
  REQUIRE(loaded.size() == 1);
  const auto& got = loaded[0];
  CHECK(got.id == inst.id);
  CHECK(got.question == inst.question);
  CHECK(got.answer == inst.answer);
  REQUIRE(got.passages.size() == 2);
  CHECK(got.passages[0].title == "Cat");
  CHECK(got.passages[0].sentences == inst.passages[0].sentences);
  REQUIRE(got.passages[0].entity_spans.size() == 1);
  CHECK(got.passages[0].entity_spans[0].target_title == "Mat");
  CHECK(got.passages[0].entity_spans[0].char_start == 12);
  CHECK(got.gold_supports == inst.gold_supports);
  REQUIRE(got.decomposition.size() == 2);
  CHECK(got.decomposition[1].intermediate_answer == "on the mat");
  CHECK(got.hop_count == 2);
  CHECK(got.question_type == QuestionType::Bridge);
}

TEST_CASE("musique-style supports carry no fact index") {
  auto inst = tiny_instance();
  inst.style = DatasetStyle::Musique;
  inst.gold_supports = {{"Cat", -1}, {"Mat", -1}};
  TempFile data("corpus_mu.json");
  save_dataset(data.path, {inst});
  auto loaded = load_dataset(data.path, DatasetStyle::Musique);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].gold_supports[0].fact_idx == -1);
  CHECK(loaded[0].style == DatasetStyle::Musique);
}

TEST_CASE("loading rejects malformed JSON and bad records") {
  TempFile data("corpus_bad.json");
  {
    std::ofstream out(data.path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_dataset(data.path, DatasetStyle::Hotpot), ParseError);
  {
    std::ofstream out(data.path);
    out << R"([{"id":"x"}])";
  }
  CHECK_THROWS_AS(load_dataset(data.path, DatasetStyle::Hotpot), ParseError);
  CHECK_THROWS_AS(load_dataset("/nonexistent/nope.json", DatasetStyle::Hotpot), ParseError);
}

TEST_CASE("validate flags every broken invariant") {
  auto good = tiny_instance();
  CHECK(validate(good).empty());

  auto inst = good;
  inst.passages[0].entity_spans[0].sentence_idx = 9;
  CHECK(validate(inst).size() == 1);

  inst = good;
  inst.passages[0].entity_spans[0].char_end = 999;
  inst.gold_supports.push_back({"Ghost", 1});
  inst.hop_count = 3;
  auto v = validate(inst);
  CHECK(v.size() == 2);

  inst = good;
  inst.num_distractors = 5;
  CHECK(validate(inst).size() == 1);

  inst = good;
  inst.hop_count = 7;
  CHECK(validate(inst).size() == 1);
}

TEST_CASE("sidecar referencing an unknown id is rejected") {
  auto inst = tiny_instance();
  TempFile side("corpus_side_bad.json");
  {
    std::ofstream out(side.path);
    out << R"({"ghost":[{"passage_idx":0,"sentence_idx":0,"start":0,"end":3,"target_title":"Mat"}]})";
  }
  std::vector<QuestionInstance> data = {inst};
  CHECK_THROWS_AS(load_sidecar(side.path, data), ValidationError);
}

TEST_CASE("synthetic generation is deterministic in the seed") {
  SyntheticConfig cfg;
  cfg.num_questions = 20;
  cfg.seed = 7;
  cfg.shortcut_rate = 0.5;
  auto a = generate_synthetic(cfg);
  auto b = generate_synthetic(cfg);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].question == b[i].question);
    CHECK(a[i].answer == b[i].answer);
    REQUIRE(a[i].passages.size() == b[i].passages.size());
    for (size_t p = 0; p < a[i].passages.size(); ++p) {
      CHECK(a[i].passages[p].title == b[i].passages[p].title);
      CHECK(a[i].passages[p].sentences == b[i].passages[p].sentences);
    }
  }
  cfg.seed = 8;
  auto c = generate_synthetic(cfg);
  bool any_diff = false;
  for (size_t i = 0; i < a.size() && !any_diff; ++i)
    any_diff = a[i].passages[0].title != c[i].passages[0].title;
  CHECK(any_diff);
}

TEST_CASE("synthetic instances pass validation and have well-formed chains") {
  SyntheticConfig cfg;
  cfg.num_questions = 50;
  cfg.min_hops = 2;
  cfg.max_hops = 3;
  cfg.passages_per_question = 6;
  cfg.seed = 11;
  auto data = generate_synthetic(cfg);
  REQUIRE(data.size() == 50);
  for (const auto& inst : data) {
    CHECK(validate(inst).empty());
    CHECK(inst.hop_count >= 2);
    CHECK(inst.hop_count <= 3);
    CHECK(inst.passages.size() == 6);
    CHECK(inst.gold_supports.size() == static_cast<size_t>(inst.hop_count));
    CHECK(inst.decomposition.size() == static_cast<size_t>(inst.hop_count));
    // the answer sentence lives in the final gold passage
    const std::string& last_title = inst.gold_supports.back().title;
    bool found = false;
    for (const auto& p : inst.passages) {
      if (p.title != last_title) continue;
      for (const auto& s : p.sentences)
        if (s.find("answer is " + inst.answer) != std::string::npos) found = true;
    }
    CHECK(found);
  }
}

TEST_CASE("shortcut_rate controls answer leakage into the first-hop passage") {
  SyntheticConfig cfg;
  cfg.num_questions = 400;
  cfg.seed = 3;

  auto leaked = [](const QuestionInstance& inst) {
    const std::string& first_title = inst.gold_supports.front().title;
    const std::string needle = "answer is " + inst.answer;
    for (const auto& p : inst.passages) {
      if (p.title != first_title) continue;
      for (const auto& s : p.sentences)
        if (s.find(needle) != std::string::npos) return true;
    }
    return false;
  };

  cfg.shortcut_rate = 0.0;
  int n0 = 0;
  for (const auto& inst : generate_synthetic(cfg)) n0 += leaked(inst);
  CHECK(n0 == 0);

  cfg.shortcut_rate = 1.0;
  int n1 = 0;
  for (const auto& inst : generate_synthetic(cfg)) n1 += leaked(inst);
  CHECK(n1 == 400);

  cfg.shortcut_rate = 0.5;
  int nh = 0;
  for (const auto& inst : generate_synthetic(cfg)) nh += leaked(inst);
  CHECK(nh > 130);
  CHECK(nh < 270);
}

TEST_CASE("synthetic config errors are rejected") {
  SyntheticConfig cfg;
  cfg.shortcut_rate = 1.5;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
  cfg.shortcut_rate = 0.0;
  cfg.min_hops = 1;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
  cfg.min_hops = 3;
  cfg.max_hops = 2;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
  cfg.max_hops = 3;
  cfg.passages_per_question = 2;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
  cfg.passages_per_question = 6;
  cfg.num_questions = -5;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
  cfg.num_questions = 1;
  cfg.vocab_size = 0;
  CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
}
