#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <set>

#include "seqgraph/eval.hpp"
#include "seqgraph/graph.hpp"

using namespace seqgraph;

namespace {

QuestionInstance bridge_instance(const std::string& id = "q0") {
  QuestionInstance inst;
  inst.id = id;
  inst.question = "where does the river end ?";
  inst.answer = "North Sea";
  Passage a;
  a.title = "River";
  a.sentences = {"the river is long .", "it flows into Delta country ."};
  Passage b;
  b.title = "Delta";
  b.sentences = {"the delta opens into the North Sea ."};
  Passage c;
  c.title = "Moon";
  c.sentences = {"the moon is far away ."};
  inst.passages = {a, b, c};
  inst.gold_supports = {{"River", 2}, {"Delta", 1}};
  inst.hop_count = 2;
  inst.num_distractors = 1;
  return inst;
}

}  // namespace

TEST_CASE("answer normalization strips case, punctuation and articles") {
  CHECK(normalize_answer("The   Cat!") == "cat");
  CHECK(normalize_answer("an Apple a day") == "apple day");
  CHECK(normalize_answer("Ronald Shusett") == "ronald shusett");
  CHECK(normalize_answer("a-b") == "b");  // punctuation split leaves "a" to strip
  CHECK(normalize_answer("") == "");
  CHECK(normalize_answer("THE") == "");
}

TEST_CASE("answer EM and bag-of-tokens F1") {
  auto [em, f1] = answer_scores("the cat sat", "cat sat down");
  CHECK(em == 0.0);
  CHECK(f1 == doctest::Approx(2.0 / 3.0));

  CHECK(answer_scores("North Sea", "north sea.").first == 1.0);
  CHECK(answer_scores("", "").first == 1.0);
  CHECK(answer_scores("", "").second == 1.0);
  CHECK(answer_scores("x", "").second == 0.0);
  CHECK(answer_scores("", "x").second == 0.0);
  CHECK(answer_scores("dog", "cat").second == 0.0);
  // duplicate tokens are matched with multiplicity
  auto [em2, f12] = answer_scores("b b", "b");
  CHECK(em2 == 0.0);
  CHECK(f12 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("support scores compare fact sets for hotpot, title sets for musique") {
  auto inst = bridge_instance();

  ReasoningPath exact;
  exact.variant = PathVariant::HOTPOT;
  exact.hops = {{"River", {2}, {}, {}}, {"Delta", {1}, {}, {}}};
  exact.final_answer = "North Sea";
  CHECK(support_scores(exact, inst) == std::pair{1.0, 1.0});

  // one of two gold facts predicted: {A} vs {A, B}
  ReasoningPath half;
  half.variant = PathVariant::HOTPOT;
  half.hops = {{"River", {2}, {}, {}}};
  half.final_answer = "North Sea";
  auto [em, f1] = support_scores(half, inst);
  CHECK(em == 0.0);
  CHECK(f1 == doctest::Approx(2.0 / 3.0));

  // same prediction under title-set scoring
  auto mu = inst;
  mu.style = DatasetStyle::Musique;
  mu.gold_supports = {{"River", -1}, {"Delta", -1}};
  auto [mem, mf1] = support_scores(half, mu);
  CHECK(mem == 0.0);
  CHECK(mf1 == doctest::Approx(2.0 / 3.0));

  ReasoningPath wrong;
  wrong.variant = PathVariant::HOTPOT;
  wrong.hops = {{"Moon", {1}, {}, {}}};
  wrong.final_answer = "x";
  CHECK(support_scores(wrong, inst) == std::pair{0.0, 0.0});
  CHECK(support_scores(ReasoningPath{}, inst) == std::pair{0.0, 0.0});
}

TEST_CASE("prediction files round-trip as line-delimited JSON") {
  std::string path = "/tmp/seqgraph_test_preds.jsonl";
  write_predictions(path, {{"q0", "[title-1] River [facts-1] [f2] [answer] North Sea"},
                           {"q1", "garbage"}});
  auto preds = read_predictions(path, PathVariant::HOTPOT);
  std::remove(path.c_str());
  REQUIRE(preds.size() == 2);
  CHECK(preds[0].id == "q0");
  CHECK(preds[0].path.final_answer == "North Sea");
  CHECK(preds[0].diagnostics.empty());
  CHECK(preds[1].answer_missing);
  CHECK_FALSE(preds[1].diagnostics.empty());
  CHECK_THROWS_AS(read_predictions("/nonexistent/p.jsonl", PathVariant::HOTPOT), ParseError);
}

TEST_CASE("faithfulness rates scan normalized passage and fact text") {
  auto inst = bridge_instance();
  // prediction names the right titles/facts and an answer present in them
  auto good = make_prediction(
      "q0", "[title-1] River [facts-1] [f2] [title-2] Delta [facts-2] [f1] [answer] North Sea",
      PathVariant::HOTPOT);
  auto rates = faithfulness({good}, {inst});
  CHECK(rates.eligible == 1);
  CHECK(rates.pred_answer_in_pred_titles == 1.0);
  CHECK(rates.pred_answer_in_pred_facts == 1.0);
  CHECK(rates.gold_answer_in_pred_titles == 1.0);
  CHECK(rates.pred_answer_in_gold_titles == 1.0);
  CHECK(rates.pred_answer_in_gold_facts == 1.0);

  // answer not present in the predicted support: unfaithful
  auto bad = make_prediction("q0", "[title-1] Moon [facts-1] [f1] [answer] North Sea",
                             PathVariant::HOTPOT);
  auto r2 = faithfulness({bad}, {inst});
  CHECK(r2.pred_answer_in_pred_titles == 0.0);
  CHECK(r2.pred_answer_in_pred_facts == 0.0);
  CHECK(r2.pred_answer_in_gold_titles == 1.0);  // gold chain does contain it

  // comparison questions are excluded
  auto comp = inst;
  comp.question_type = QuestionType::Comparison;
  CHECK(faithfulness({good}, {comp}).eligible == 0);
}

TEST_CASE("probe construction keeps exactly one gold support passage per probe") {
  auto inst = bridge_instance();
  std::vector<std::string> skipped;
  auto probes = build_dire_probe({inst}, &skipped);
  CHECK(skipped.empty());
  REQUIRE(probes.size() == 2);
  std::set<std::string> kept;
  for (const auto& probe : probes) {
    CHECK(probe.hop_count == 1);
    CHECK(probe.question == inst.question);
    CHECK(probe.answer == inst.answer);
    CHECK(probe.passages.size() == 2);  // one support + the distractor
    // exactly one passage title appears in the original gold set
    int gold_present = 0;
    for (const auto& p : probe.passages)
      for (const auto& s : inst.gold_supports)
        if (normalize_title(p.title) == normalize_title(s.title)) ++gold_present;
    CHECK(gold_present == 1);
    REQUIRE(!probe.gold_supports.empty());
    kept.insert(normalize_title(probe.gold_supports.front().title));
    CHECK(validate(probe).empty());
  }
  CHECK(kept == std::set<std::string>{"river", "delta"});
  CHECK(probes[0].id == "q0#p0");
  CHECK(probes[1].id == "q0#p1");

  // non-2-hop instances are skipped and reported
  auto three = inst;
  three.id = "q3";
  three.gold_supports.push_back({"Moon", 1});
  three.hop_count = 3;
  skipped.clear();
  auto none = build_dire_probe({three}, &skipped);
  CHECK(none.empty());
  CHECK(skipped == std::vector<std::string>{"q3"});
}

TEST_CASE("cheating rate takes the per-original minimum over the two probes") {
  auto inst = bridge_instance();
  auto probes = build_dire_probe({inst});
  REQUIRE(probes.size() == 2);

  auto pred_for = [&](const QuestionInstance& probe) {
    std::string title = probe.gold_supports.front().title;
    int fact = probe.gold_supports.front().fact_idx;
    return make_prediction(probe.id,
                           "[title-1] " + title + " [facts-1] [f" + std::to_string(fact) +
                               "] [answer] " + inst.answer,
                           PathVariant::HOTPOT);
  };

  // correct on BOTH probes: full cheating credit on every column
  auto both = dire_scores({pred_for(probes[0]), pred_for(probes[1])}, probes);
  CHECK(both.originals == 1);
  CHECK(both.answer == 1.0);
  CHECK(both.supp_p == 1.0);
  CHECK(both.supp_s == 1.0);
  CHECK(both.ans_supp_p == 1.0);

  // correct on only one probe: the min clears every rate
  auto miss = make_prediction(probes[1].id, "[title-1] Moon [facts-1] [f1] [answer] wrong",
                              PathVariant::HOTPOT);
  auto one = dire_scores({pred_for(probes[0]), miss}, probes);
  CHECK(one.originals == 1);
  CHECK(one.answer == 0.0);
  CHECK(one.supp_p == 0.0);
  CHECK(one.ans_supp_s == 0.0);

  // a missing prediction counts as failure on that probe
  auto partial = dire_scores({pred_for(probes[0])}, probes);
  CHECK(partial.originals == 1);
  CHECK(partial.answer == 0.0);
}

TEST_CASE("hop breakdown groups by hop count") {
  auto two = bridge_instance("a");
  auto three = bridge_instance("b");
  three.gold_supports.push_back({"Moon", 1});
  three.hop_count = 3;
  auto p_a = make_prediction("a", "[title-1] River [facts-1] [f2] [title-2] Delta [facts-2] "
                                  "[f1] [answer] North Sea",
                             PathVariant::HOTPOT);
  auto p_b = make_prediction("b", "[answer] wrong", PathVariant::HOTPOT);
  auto rows = hop_breakdown({p_a, p_b}, {two, three});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].hops == 2);
  CHECK(rows[0].count == 1);
  CHECK(rows[0].answer_em == 1.0);
  CHECK(rows[0].support_f1 == 1.0);
  CHECK(rows[1].hops == 3);
  CHECK(rows[1].answer_em == 0.0);
}

TEST_CASE("aggregate report averages over predictions and serializes") {
  auto inst = bridge_instance();
  auto good = make_prediction(
      "q0", "[title-1] River [facts-1] [f2] [title-2] Delta [facts-2] [f1] [answer] North Sea",
      PathVariant::HOTPOT);
  auto other = bridge_instance("q1");
  auto bad = make_prediction("q1", "[answer] wrong", PathVariant::HOTPOT);
  auto report = evaluate({good, bad}, {inst, other});
  CHECK(report.count == 2);
  CHECK(report.answer_em == doctest::Approx(0.5));
  CHECK(report.support_f1 == doctest::Approx(0.5));
  CHECK(report.hop_table.size() == 1);

  auto j = report.to_json();
  CHECK(j.find("\"answer\"") != std::string::npos);
  CHECK(j.find("\"dire\"") == std::string::npos);  // not attached unless probed
  report.has_dire = true;
  CHECK(report.to_json().find("\"dire\"") != std::string::npos);

  auto csv = report.faithfulness_csv();
  CHECK(csv.find("category,rate") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}
