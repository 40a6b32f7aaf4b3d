#include "seqgraph/eval.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "seqgraph/graph.hpp"

using nlohmann::json;

namespace seqgraph {

Prediction make_prediction(const std::string& id, const std::string& raw, PathVariant variant) {
  Prediction p;
  p.id = id;
  p.raw = raw;
  ParsedPath parsed = parse_path(raw, variant);
  p.path = std::move(parsed.path);
  p.diagnostics = std::move(parsed.diagnostics);
  p.answer_missing = parsed.answer_missing;
  return p;
}

void write_predictions(const std::string& path,
                       const std::vector<std::pair<std::string, std::string>>& preds) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write predictions: " + path);
  for (const auto& [id, output] : preds) {
    json line = {{"id", id}, {"output", output}};
    out << line.dump() << "\n";
  }
}

std::vector<Prediction> read_predictions(const std::string& path, PathVariant variant) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open predictions: " + path);
  std::vector<Prediction> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json rec = json::parse(line);
      out.push_back(make_prediction(rec.at("id"), rec.at("output"), variant));
    } catch (const json::exception& e) {
      throw ParseError("bad prediction at " + path + ":" + std::to_string(lineno) + ": " +
                       e.what());
    }
  }
  return out;
}

std::string normalize_answer(const std::string& text) {
  std::string lowered;
  for (unsigned char c : text)
    lowered.push_back(std::ispunct(c) ? ' ' : static_cast<char>(std::tolower(c)));
  std::istringstream in(lowered);
  std::string tok, out;
  while (in >> tok) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

namespace {

std::vector<std::string> split_ws(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double bag_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
  std::map<std::string, int> gold_counts;
  for (const auto& t : gold) ++gold_counts[t];
  int overlap = 0;
  for (const auto& t : pred) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      ++overlap;
      --it->second;
    }
  }
  if (overlap == 0) return 0.0;
  double p = static_cast<double>(overlap) / pred.size();
  double r = static_cast<double>(overlap) / gold.size();
  return 2.0 * p * r / (p + r);
}

template <typename T>
std::pair<double, double> set_scores(const std::set<T>& pred, const std::set<T>& gold) {
  if (pred.empty() || gold.empty())
    return pred.empty() && gold.empty() ? std::pair{1.0, 1.0} : std::pair{0.0, 0.0};
  int overlap = 0;
  for (const T& x : pred) overlap += gold.count(x);
  double em = pred == gold ? 1.0 : 0.0;
  if (overlap == 0) return {em, 0.0};
  double p = static_cast<double>(overlap) / pred.size();
  double r = static_cast<double>(overlap) / gold.size();
  return {em, 2.0 * p * r / (p + r)};
}

using TitleSet = std::set<std::string>;
using FactSet = std::set<std::pair<std::string, int>>;

TitleSet pred_title_set(const ReasoningPath& path) {
  TitleSet out;
  for (const auto& hop : path.hops)
    if (!hop.title.empty()) out.insert(normalize_title(hop.title));
  return out;
}

FactSet pred_fact_set(const ReasoningPath& path) {
  FactSet out;
  for (const auto& hop : path.hops)
    for (int f : hop.fact_indices)
      if (!hop.title.empty()) out.insert({normalize_title(hop.title), f});
  return out;
}

TitleSet gold_title_set(const QuestionInstance& inst) {
  TitleSet out;
  for (const auto& s : inst.gold_supports) out.insert(normalize_title(s.title));
  return out;
}

FactSet gold_fact_set(const QuestionInstance& inst) {
  FactSet out;
  for (const auto& s : inst.gold_supports)
    if (s.fact_idx >= 0) out.insert({normalize_title(s.title), s.fact_idx});
  return out;
}

}  // namespace

namespace {

// F1 tokens keep articles: lowercase and strip punctuation only. Dropping
// articles from the bags would change the token counts and with them the
// hand-checked overlap ratios.
std::vector<std::string> f1_tokens(const std::string& text) {
  std::string lowered;
  for (unsigned char c : text)
    lowered.push_back(std::ispunct(c) ? ' ' : static_cast<char>(std::tolower(c)));
  return split_ws(lowered);
}

}  // namespace

std::pair<double, double> answer_scores(const std::string& pred, const std::string& gold) {
  std::string np = normalize_answer(pred), ng = normalize_answer(gold);
  double em = np == ng ? 1.0 : 0.0;
  double f1 = bag_f1(f1_tokens(pred), f1_tokens(gold));
  return {em, f1};
}

std::pair<double, double> support_scores(const ReasoningPath& pred_path,
                                         const QuestionInstance& inst) {
  if (inst.style == DatasetStyle::Hotpot) {
    return set_scores(pred_fact_set(pred_path), gold_fact_set(inst));
  }
  return set_scores(pred_title_set(pred_path), gold_title_set(inst));
}

FaithfulnessRates faithfulness(const std::vector<Prediction>& preds,
                               const std::vector<QuestionInstance>& instances) {
  std::unordered_map<std::string, const QuestionInstance*> by_id;
  for (const auto& inst : instances) by_id[inst.id] = &inst;

  FaithfulnessRates rates;
  int counts[6] = {0, 0, 0, 0, 0, 0};
  for (const auto& pred : preds) {
    auto it = by_id.find(pred.id);
    if (it == by_id.end()) continue;
    const QuestionInstance& inst = *it->second;
    if (inst.question_type != QuestionType::Bridge) continue;  // comparison excluded
    ++rates.eligible;

    auto passage_text = [&](const TitleSet& titles) {
      std::string text;
      for (const auto& p : inst.passages) {
        if (!titles.count(normalize_title(p.title))) continue;
        for (const auto& s : p.sentences) {
          text += s;
          text.push_back(' ');
        }
      }
      return normalize_answer(text);
    };
    auto fact_text = [&](const FactSet& facts) {
      std::string text;
      for (const auto& p : inst.passages) {
        std::string norm = normalize_title(p.title);
        for (int k = 0; k < static_cast<int>(p.sentences.size()); ++k) {
          if (!facts.count({norm, k + 1})) continue;
          text += p.sentences[k];
          text.push_back(' ');
        }
      }
      return normalize_answer(text);
    };
    auto contains = [](const std::string& haystack, const std::string& needle) {
      return !needle.empty() && haystack.find(needle) != std::string::npos;
    };

    std::string pred_ans = normalize_answer(pred.path.final_answer);
    std::string gold_ans = normalize_answer(inst.answer);
    std::string pred_titles = passage_text(pred_title_set(pred.path));
    std::string pred_facts = fact_text(pred_fact_set(pred.path));
    std::string gold_titles = passage_text(gold_title_set(inst));
    std::string gold_facts = fact_text(gold_fact_set(inst));

    counts[0] += contains(pred_titles, pred_ans);
    counts[1] += contains(pred_facts, pred_ans);
    counts[2] += contains(pred_titles, gold_ans);
    counts[3] += contains(pred_facts, gold_ans);
    counts[4] += contains(gold_titles, pred_ans);
    counts[5] += contains(gold_facts, pred_ans);
  }
  if (rates.eligible > 0) {
    double denom = rates.eligible;
    rates.pred_answer_in_pred_titles = counts[0] / denom;
    rates.pred_answer_in_pred_facts = counts[1] / denom;
    rates.gold_answer_in_pred_titles = counts[2] / denom;
    rates.gold_answer_in_pred_facts = counts[3] / denom;
    rates.pred_answer_in_gold_titles = counts[4] / denom;
    rates.pred_answer_in_gold_facts = counts[5] / denom;
  }
  return rates;
}

std::vector<QuestionInstance> build_dire_probe(const std::vector<QuestionInstance>& dataset,
                                               std::vector<std::string>* skipped_ids) {
  std::vector<QuestionInstance> probes;
  for (const auto& inst : dataset) {
    TitleSet supports = gold_title_set(inst);
    if (inst.hop_count != 2 || supports.size() != 2) {
      if (skipped_ids) skipped_ids->push_back(inst.id);
      continue;
    }
    std::vector<std::string> support_titles(supports.begin(), supports.end());
    // keep support j, drop the other, retain every distractor
    for (int j = 0; j < 2; ++j) {
      QuestionInstance probe;
      probe.id = inst.id + "#p" + std::to_string(j);
      probe.question = inst.question;
      probe.answer = inst.answer;
      probe.style = inst.style;
      probe.question_type = inst.question_type;
      probe.decomposition = inst.decomposition;
      const std::string& kept = support_titles[j];
      const std::string& dropped = support_titles[1 - j];
      for (const auto& p : inst.passages) {
        std::string norm = normalize_title(p.title);
        if (norm == dropped) continue;
        probe.passages.push_back(p);
      }
      for (const auto& s : inst.gold_supports)
        if (normalize_title(s.title) == kept) probe.gold_supports.push_back(s);
      probe.hop_count = 1;
      probe.num_distractors = static_cast<int>(probe.passages.size()) - 1;
      probes.push_back(std::move(probe));
    }
  }
  return probes;
}

DireBlock dire_scores(const std::vector<Prediction>& probe_preds,
                      const std::vector<QuestionInstance>& probe_dataset) {
  std::unordered_map<std::string, const Prediction*> preds;
  for (const auto& p : probe_preds) preds[p.id] = &p;

  struct ProbeScores {
    double ans = 0.0, supp_p = 0.0, supp_s = 0.0;
    bool seen = false;
  };
  std::map<std::string, std::array<ProbeScores, 2>> by_original;
  for (const auto& probe : probe_dataset) {
    auto hash = probe.id.rfind("#p");
    if (hash == std::string::npos) continue;
    std::string orig = probe.id.substr(0, hash);
    int j = probe.id.back() - '0';
    if (j < 0 || j > 1) continue;
    ProbeScores scores;
    scores.seen = true;
    auto it = preds.find(probe.id);
    if (it != preds.end()) {  // missing prediction scores as failure
      const Prediction& pred = *it->second;
      scores.ans = answer_scores(pred.path.final_answer, probe.answer).second;
      scores.supp_p = set_scores(pred_title_set(pred.path), gold_title_set(probe)).second;
      scores.supp_s = set_scores(pred_fact_set(pred.path), gold_fact_set(probe)).second;
    }
    by_original[orig][static_cast<size_t>(j)] = scores;
  }

  DireBlock block;
  for (const auto& [orig, pair] : by_original) {
    if (!pair[0].seen || !pair[1].seen) continue;
    ++block.originals;
    block.answer += std::min(pair[0].ans, pair[1].ans);
    block.supp_p += std::min(pair[0].supp_p, pair[1].supp_p);
    block.supp_s += std::min(pair[0].supp_s, pair[1].supp_s);
    block.ans_supp_p += std::min(std::min(pair[0].ans, pair[0].supp_p),
                                 std::min(pair[1].ans, pair[1].supp_p));
    block.ans_supp_s += std::min(std::min(pair[0].ans, pair[0].supp_s),
                                 std::min(pair[1].ans, pair[1].supp_s));
  }
  if (block.originals > 0) {
    block.answer /= block.originals;
    block.supp_p /= block.originals;
    block.supp_s /= block.originals;
    block.ans_supp_p /= block.originals;
    block.ans_supp_s /= block.originals;
  }
  return block;
}

std::vector<HopRow> hop_breakdown(const std::vector<Prediction>& preds,
                                  const std::vector<QuestionInstance>& instances) {
  std::unordered_map<std::string, const QuestionInstance*> by_id;
  for (const auto& inst : instances) by_id[inst.id] = &inst;
  std::map<int, HopRow> rows;
  for (const auto& pred : preds) {
    auto it = by_id.find(pred.id);
    if (it == by_id.end()) continue;
    const QuestionInstance& inst = *it->second;
    HopRow& row = rows[inst.hop_count];
    row.hops = inst.hop_count;
    ++row.count;
    auto [aem, af1] = answer_scores(pred.path.final_answer, inst.answer);
    auto [sem, sf1] = support_scores(pred.path, inst);
    row.answer_em += aem;
    row.answer_f1 += af1;
    row.support_em += sem;
    row.support_f1 += sf1;
  }
  std::vector<HopRow> out;
  for (auto& [hops, row] : rows) {
    row.answer_em /= row.count;
    row.answer_f1 /= row.count;
    row.support_em /= row.count;
    row.support_f1 /= row.count;
    out.push_back(row);
  }
  return out;
}

EvalReport evaluate(const std::vector<Prediction>& preds,
                    const std::vector<QuestionInstance>& instances) {
  std::unordered_map<std::string, const QuestionInstance*> by_id;
  for (const auto& inst : instances) by_id[inst.id] = &inst;
  EvalReport report;
  for (const auto& pred : preds) {
    auto it = by_id.find(pred.id);
    if (it == by_id.end()) continue;
    const QuestionInstance& inst = *it->second;
    auto [aem, af1] = answer_scores(pred.path.final_answer, inst.answer);
    auto [sem, sf1] = support_scores(pred.path, inst);
    report.answer_em += aem;
    report.answer_f1 += af1;
    report.support_em += sem;
    report.support_f1 += sf1;
    ++report.count;
  }
  if (report.count > 0) {
    report.answer_em /= report.count;
    report.answer_f1 /= report.count;
    report.support_em /= report.count;
    report.support_f1 /= report.count;
  }
  report.faithfulness = faithfulness(preds, instances);
  report.hop_table = hop_breakdown(preds, instances);
  return report;
}

std::string EvalReport::to_json() const {
  json j;
  j["count"] = count;
  j["answer"] = {{"em", answer_em}, {"f1", answer_f1}};
  j["support"] = {{"em", support_em}, {"f1", support_f1}};
  j["faithfulness"] = {
      {"eligible", faithfulness.eligible},
      {"pred_answer_in_pred_titles", faithfulness.pred_answer_in_pred_titles},
      {"pred_answer_in_pred_facts", faithfulness.pred_answer_in_pred_facts},
      {"gold_answer_in_pred_titles", faithfulness.gold_answer_in_pred_titles},
      {"gold_answer_in_pred_facts", faithfulness.gold_answer_in_pred_facts},
      {"pred_answer_in_gold_titles", faithfulness.pred_answer_in_gold_titles},
      {"pred_answer_in_gold_facts", faithfulness.pred_answer_in_gold_facts}};
  json hops = json::array();
  for (const auto& row : hop_table)
    hops.push_back({{"hops", row.hops},
                    {"count", row.count},
                    {"answer_em", row.answer_em},
                    {"answer_f1", row.answer_f1},
                    {"support_em", row.support_em},
                    {"support_f1", row.support_f1}});
  j["per_hop"] = std::move(hops);
  if (has_dire)
    j["dire"] = {{"answer", dire.answer},
                 {"supp_p", dire.supp_p},
                 {"supp_s", dire.supp_s},
                 {"ans_supp_p", dire.ans_supp_p},
                 {"ans_supp_s", dire.ans_supp_s},
                 {"originals", dire.originals}};
  return j.dump(1);
}

std::string EvalReport::faithfulness_csv() const {
  std::ostringstream out;
  out << "category,rate\n";
  out << "pred_answer_in_pred_titles," << faithfulness.pred_answer_in_pred_titles << "\n";
  out << "pred_answer_in_pred_facts," << faithfulness.pred_answer_in_pred_facts << "\n";
  out << "gold_answer_in_pred_titles," << faithfulness.gold_answer_in_pred_titles << "\n";
  out << "gold_answer_in_pred_facts," << faithfulness.gold_answer_in_pred_facts << "\n";
  out << "pred_answer_in_gold_titles," << faithfulness.pred_answer_in_gold_titles << "\n";
  out << "pred_answer_in_gold_facts," << faithfulness.pred_answer_in_gold_facts << "\n";
  return out.str();
}

}  // namespace seqgraph
