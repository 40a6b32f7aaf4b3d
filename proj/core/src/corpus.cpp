#include "seqgraph/corpus.hpp"
#include "seqgraph/graph.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

using nlohmann::json;

namespace seqgraph {

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed JSON in " + path + ": " + e.what());
  }
}

QuestionInstance instance_from_json(const json& rec, DatasetStyle style) {
  QuestionInstance inst;
  inst.style = style;
  try {
    inst.id = rec.at("id").get<std::string>();
    inst.question = rec.at("question").get<std::string>();
    inst.answer = rec.at("answer").get<std::string>();
    for (const auto& ctx : rec.at("context")) {
      Passage p;
      p.title = ctx.at(0).get<std::string>();
      for (const auto& s : ctx.at(1)) p.sentences.push_back(s.get<std::string>());
      inst.passages.push_back(std::move(p));
    }
    if (rec.contains("supporting_facts")) {
      for (const auto& sf : rec["supporting_facts"]) {
        SupportRef ref;
        ref.title = sf.at(0).get<std::string>();
        if (sf.size() > 1 && !sf.at(1).is_null()) ref.fact_idx = sf.at(1).get<int>();
        inst.gold_supports.push_back(std::move(ref));
      }
    }
    if (rec.contains("decomposition") && !rec["decomposition"].is_null()) {
      for (const auto& d : rec["decomposition"]) {
        inst.decomposition.push_back(
            {d.at("sub_question").get<std::string>(),
             d.at("intermediate_answer").get<std::string>()});
      }
    }
    if (rec.contains("type"))
      inst.question_type = rec["type"].get<std::string>() == "comparison"
                               ? QuestionType::Comparison
                               : QuestionType::Bridge;
    if (rec.contains("num_distractors"))
      inst.num_distractors = rec["num_distractors"].get<int>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad dataset record: ") + e.what());
  }

  // hop count = number of distinct gold support passages
  std::unordered_set<std::string> distinct;
  for (const auto& s : inst.gold_supports) distinct.insert(normalize_title(s.title));
  inst.hop_count = static_cast<int>(distinct.size());
  return inst;
}

json instance_to_json(const QuestionInstance& inst) {
  json rec;
  rec["id"] = inst.id;
  rec["question"] = inst.question;
  rec["answer"] = inst.answer;
  json ctx = json::array();
  for (const auto& p : inst.passages) {
    ctx.push_back(json::array({p.title, p.sentences}));
  }
  rec["context"] = std::move(ctx);
  json sfs = json::array();
  for (const auto& s : inst.gold_supports) {
    if (s.fact_idx >= 0)
      sfs.push_back(json::array({s.title, s.fact_idx}));
    else
      sfs.push_back(json::array({s.title, nullptr}));
  }
  rec["supporting_facts"] = std::move(sfs);
  if (!inst.decomposition.empty()) {
    json dec = json::array();
    for (const auto& d : inst.decomposition)
      dec.push_back({{"sub_question", d.sub_question},
                     {"intermediate_answer", d.intermediate_answer}});
    rec["decomposition"] = std::move(dec);
  }
  rec["type"] = inst.question_type == QuestionType::Comparison ? "comparison" : "bridge";
  rec["num_distractors"] = inst.num_distractors;
  return rec;
}

}  // namespace

std::vector<QuestionInstance> load_dataset(const std::string& path, DatasetStyle format) {
  json root = read_json_file(path);
  if (!root.is_array()) throw ParseError("dataset root must be a JSON array: " + path);
  std::vector<QuestionInstance> out;
  out.reserve(root.size());
  for (const auto& rec : root) {
    QuestionInstance inst = instance_from_json(rec, format);
    auto violations = validate(inst);
    if (!violations.empty())
      throw ValidationError("instance '" + inst.id + "': " + violations.front());
    out.push_back(std::move(inst));
  }
  return out;
}

void save_dataset(const std::string& path, const std::vector<QuestionInstance>& data) {
  json root = json::array();
  for (const auto& inst : data) root.push_back(instance_to_json(inst));
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << root.dump(1) << "\n";
}

void load_sidecar(const std::string& path, std::vector<QuestionInstance>& data) {
  json root = read_json_file(path);
  std::unordered_map<std::string, QuestionInstance*> by_id;
  for (auto& inst : data) by_id[inst.id] = &inst;
  for (auto it = root.begin(); it != root.end(); ++it) {
    auto found = by_id.find(it.key());
    if (found == by_id.end())
      throw ValidationError("sidecar references unknown instance id '" + it.key() + "'");
    QuestionInstance& inst = *found->second;
    for (const auto& span : it.value()) {
      int pidx = span.at("passage_idx").get<int>();
      if (pidx < 0 || pidx >= static_cast<int>(inst.passages.size()))
        throw ValidationError("sidecar for '" + it.key() + "' has passage_idx out of range");
      EntitySpan es;
      es.sentence_idx = span.at("sentence_idx").get<int>();
      es.char_start = span.at("start").get<int>();
      es.char_end = span.at("end").get<int>();
      es.target_title = span.at("target_title").get<std::string>();
      inst.passages[pidx].entity_spans.push_back(std::move(es));
    }
  }
  for (auto& inst : data) {
    auto violations = validate(inst);
    if (!violations.empty())
      throw ValidationError("instance '" + inst.id + "' after sidecar: " + violations.front());
  }
}

void save_sidecar(const std::string& path, const std::vector<QuestionInstance>& data) {
  json root = json::object();
  for (const auto& inst : data) {
    json spans = json::array();
    for (size_t pi = 0; pi < inst.passages.size(); ++pi) {
      for (const auto& es : inst.passages[pi].entity_spans) {
        spans.push_back({{"passage_idx", static_cast<int>(pi)},
                         {"sentence_idx", es.sentence_idx},
                         {"start", es.char_start},
                         {"end", es.char_end},
                         {"target_title", es.target_title}});
      }
    }
    root[inst.id] = std::move(spans);
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << root.dump(1) << "\n";
}

std::vector<std::string> validate(const QuestionInstance& inst) {
  std::vector<std::string> violations;
  if (inst.passages.empty()) violations.push_back("passage list is empty");
  for (size_t pi = 0; pi < inst.passages.size(); ++pi) {
    const Passage& p = inst.passages[pi];
    if (p.sentences.empty())
      violations.push_back("passage " + std::to_string(pi) + " has no sentences");
    for (const auto& es : p.entity_spans) {
      std::ostringstream where;
      where << "passage " << pi << " span [" << es.char_start << "," << es.char_end << ")";
      if (es.sentence_idx < 0 || es.sentence_idx >= static_cast<int>(p.sentences.size())) {
        violations.push_back(where.str() + " has sentence_idx out of range");
        continue;
      }
      const std::string& sent = p.sentences[es.sentence_idx];
      if (es.char_start < 0 || es.char_end > static_cast<int>(sent.size()) ||
          es.char_start >= es.char_end)
        violations.push_back(where.str() + " exceeds sentence bounds");
      if (es.target_title.empty())
        violations.push_back(where.str() + " has empty target_title");
    }
  }
  // every gold support must resolve to a passage title (modulo normalization)
  std::unordered_set<std::string> titles;
  for (const auto& p : inst.passages) titles.insert(normalize_title(p.title));
  std::unordered_set<std::string> distinct_supports;
  for (const auto& s : inst.gold_supports) {
    std::string norm = normalize_title(s.title);
    distinct_supports.insert(norm);
    if (!titles.count(norm))
      violations.push_back("gold support title '" + s.title + "' matches no passage");
  }
  if (!inst.gold_supports.empty() &&
      inst.hop_count != static_cast<int>(distinct_supports.size()))
    violations.push_back("hop_count does not equal distinct gold support passages");
  if (inst.num_distractors < 0 ||
      inst.num_distractors >= static_cast<int>(inst.passages.size()))
    violations.push_back("num_distractors out of range");
  return violations;
}

}  // namespace seqgraph
