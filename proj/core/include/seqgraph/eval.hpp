#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "seqgraph/codec.hpp"
#include "seqgraph/corpus.hpp"

namespace seqgraph {

struct Prediction {
  std::string id;
  std::string raw;
  ReasoningPath path;  // lenient parse, present even for malformed output
  std::vector<std::string> diagnostics;
  bool answer_missing = false;
};

Prediction make_prediction(const std::string& id, const std::string& raw, PathVariant variant);

// Line-delimited JSON {"id", "output"}.
void write_predictions(const std::string& path,
                       const std::vector<std::pair<std::string, std::string>>& preds);
std::vector<Prediction> read_predictions(const std::string& path, PathVariant variant);

// SQuAD-style: lowercase, strip punctuation and articles, collapse whitespace.
std::string normalize_answer(const std::string& text);

std::pair<double, double> answer_scores(const std::string& pred, const std::string& gold);
std::pair<double, double> support_scores(const ReasoningPath& pred_path,
                                         const QuestionInstance& instance);

struct FaithfulnessRates {
  double pred_answer_in_pred_titles = 0.0;
  double pred_answer_in_pred_facts = 0.0;
  double gold_answer_in_pred_titles = 0.0;
  double gold_answer_in_pred_facts = 0.0;
  double pred_answer_in_gold_titles = 0.0;
  double pred_answer_in_gold_facts = 0.0;
  int eligible = 0;  // bridge-type questions only
};

struct DireBlock {
  double answer = 0.0;
  double supp_p = 0.0;
  double supp_s = 0.0;
  double ans_supp_p = 0.0;
  double ans_supp_s = 0.0;
  int originals = 0;
};

struct HopRow {
  int hops = 0;
  int count = 0;
  double answer_em = 0.0, answer_f1 = 0.0;
  double support_em = 0.0, support_f1 = 0.0;
};

struct EvalReport {
  double answer_em = 0.0, answer_f1 = 0.0;
  double support_em = 0.0, support_f1 = 0.0;
  int count = 0;
  FaithfulnessRates faithfulness;
  std::vector<HopRow> hop_table;
  DireBlock dire;
  bool has_dire = false;

  std::string to_json() const;
  std::string faithfulness_csv() const;
};

FaithfulnessRates faithfulness(const std::vector<Prediction>& preds,
                               const std::vector<QuestionInstance>& instances);

// Splits each 2-hop instance into two reduced-context probes (one gold
// support kept each). Instances without exactly 2 support passages are
// skipped and recorded in skipped_ids.
std::vector<QuestionInstance> build_dire_probe(const std::vector<QuestionInstance>& dataset,
                                               std::vector<std::string>* skipped_ids = nullptr);

// Cheating rate per Table-3 column: an original counts under a metric by the
// worse (min) of its two probes' F1 on that metric.
DireBlock dire_scores(const std::vector<Prediction>& probe_preds,
                      const std::vector<QuestionInstance>& probe_dataset);

std::vector<HopRow> hop_breakdown(const std::vector<Prediction>& preds,
                                  const std::vector<QuestionInstance>& instances);

EvalReport evaluate(const std::vector<Prediction>& preds,
                    const std::vector<QuestionInstance>& instances);

}  // namespace seqgraph
