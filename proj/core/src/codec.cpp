#include "seqgraph/codec.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace seqgraph {

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  const int n = static_cast<int>(text.size());
  int i = 0;
  auto is_word = [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '#'; };
  while (i < n) {
    unsigned char c = text[i];
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (c == '[') {
      // bracketed marker: no spaces or nested brackets inside
      int j = i + 1;
      while (j < n && text[j] != ']' && text[j] != '[' && !std::isspace((unsigned char)text[j]))
        ++j;
      if (j < n && text[j] == ']' && j > i + 1) {
        out.push_back({text.substr(i, j - i + 1), i, j + 1});
        i = j + 1;
        continue;
      }
    }
    if (is_word(c)) {
      int j = i;
      while (j < n && is_word((unsigned char)text[j])) ++j;
      out.push_back({text.substr(i, j - i), i, j});
      i = j;
      continue;
    }
    out.push_back({std::string(1, text[i]), i, i + 1});
    ++i;
  }
  return out;
}

namespace {

std::vector<std::string> marker_tokens(const CodecConfig& cfg) {
  std::vector<std::string> m = {"[pad]", "[bos]", "[eos]", "[unk]",
                                "[Question]", "[Title]", "[Content]", "[answer]"};
  for (int k = 1; k <= cfg.max_fact_index; ++k) m.push_back("[f" + std::to_string(k) + "]");
  for (const char* stem : {"title", "facts", "question", "answer"})
    for (int h = 1; h <= cfg.max_hops; ++h)
      m.push_back("[" + std::string(stem) + "-" + std::to_string(h) + "]");
  return m;
}

}  // namespace

Vocabulary Vocabulary::build(const std::vector<QuestionInstance>& corpus, const CodecConfig& cfg) {
  Vocabulary v;
  v.cfg_ = cfg;
  v.tokens_ = marker_tokens(cfg);
  v.first_content_id_ = static_cast<int>(v.tokens_.size());
  std::set<std::string> content;
  auto add_text = [&](const std::string& text) {
    for (const auto& t : tokenize(text)) content.insert(t.text);
  };
  for (const auto& inst : corpus) {
    add_text(inst.question);
    add_text(inst.answer);
    for (const auto& p : inst.passages) {
      add_text(p.title);
      for (const auto& s : p.sentences) add_text(s);
    }
    for (const auto& d : inst.decomposition) {
      add_text(d.sub_question);
      add_text(d.intermediate_answer);
    }
  }
  for (const auto& tok : content) {
    // a content token spelled like a marker would collide; skip, it will map to [unk]
    if (std::find(v.tokens_.begin(), v.tokens_.end(), tok) == v.tokens_.end())
      v.tokens_.push_back(tok);
  }
  v.index_tokens();
  return v;
}

void Vocabulary::index_tokens() {
  ids_.clear();
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) ids_[tokens_[i]] = i;
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  return tokens_.at(static_cast<size_t>(id));
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& t : tokenize(text)) ids.push_back(id(t.text));
  return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int i : ids) {
    if (i == kPad || i == kBos || i == kEos) continue;
    if (!out.empty()) out.push_back(' ');
    out += token(i);
  }
  return out;
}

void Vocabulary::serialize(std::ostream& out) const {
  out << cfg_.max_fact_index << " " << cfg_.max_hops << " " << cfg_.max_len << " "
      << tokens_.size() << " " << first_content_id_ << "\n";
  for (const auto& t : tokens_) out << t << "\n";
}

Vocabulary Vocabulary::deserialize(std::istream& in) {
  Vocabulary v;
  size_t count = 0;
  in >> v.cfg_.max_fact_index >> v.cfg_.max_hops >> v.cfg_.max_len >> count >>
      v.first_content_id_;
  std::string line;
  std::getline(in, line);
  for (size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw ParseError("truncated vocabulary file");
    v.tokens_.push_back(line);
  }
  v.index_tokens();
  return v;
}

EncodedSequence assemble_input(const std::string& question, const QuestionInstance& inst,
                               int passage_idx, const LocalGraph& graph,
                               const Vocabulary& vocab, int max_len) {
  const Passage& passage = inst.passages.at(passage_idx);
  const CodecConfig& cfg = vocab.config();

  EncodedSequence seq;
  seq.passage_idx = passage_idx;

  auto push = [&](int id) { seq.token_ids.push_back(id); };
  push(vocab.id("[Question]"));
  for (int id : vocab.encode(question)) push(id);
  push(vocab.id("[Title]"));
  int title_begin = static_cast<int>(seq.token_ids.size());
  for (int id : vocab.encode(passage.title)) push(id);
  int title_end = static_cast<int>(seq.token_ids.size()) - 1;
  push(vocab.id("[Content]"));
  int header_len = static_cast<int>(seq.token_ids.size());
  if (header_len > max_len)
    throw ConfigError("max_len " + std::to_string(max_len) +
                      " is smaller than the question+title header (" +
                      std::to_string(header_len) + " tokens)");

  // token range per (sentence, char range) for entity span lookup
  struct SentSpan {
    int sentence_idx, char_start, char_end, tok_begin, tok_end;
  };
  std::vector<SentSpan> sent_spans;

  int n_sents = std::min<int>(static_cast<int>(passage.sentences.size()), cfg.max_fact_index);
  for (int k = 0; k < n_sents; ++k) {
    push(vocab.id("[f" + std::to_string(k + 1) + "]"));
    auto toks = tokenize(passage.sentences[k]);
    for (const auto& t : toks) {
      int pos = static_cast<int>(seq.token_ids.size());
      push(vocab.id(t.text));
      sent_spans.push_back({k, t.char_start, t.char_end, pos, pos});
    }
  }
  if (static_cast<int>(seq.token_ids.size()) > max_len) seq.token_ids.resize(max_len);

  // title node span (title tokens always fit: header fits by the check above)
  int title_node = graph.title_node(passage_idx);
  if (title_end >= title_begin && title_node < static_cast<int>(graph.nodes.size()) &&
      graph.nodes[title_node].kind == NodeKind::PassageTitle)
    seq.spans[title_node] = {title_begin, title_end};

  // entity span nodes: a node survives only if all of its tokens survived truncation
  for (int ni = 0; ni < static_cast<int>(graph.nodes.size()); ++ni) {
    const GraphNode& node = graph.nodes[ni];
    if (node.kind != NodeKind::EntitySpan || node.passage_idx != passage_idx) continue;
    int a = -1, b = -1;
    for (const auto& ss : sent_spans) {
      if (ss.sentence_idx != node.sentence_idx) continue;
      if (ss.char_start < node.char_end && node.char_start < ss.char_end) {
        if (a < 0) a = ss.tok_begin;
        b = ss.tok_end;
      }
    }
    if (a >= 0 && b < static_cast<int>(seq.token_ids.size())) seq.spans[ni] = {a, b};
  }
  return seq;
}

std::string variant_name(PathVariant v) {
  switch (v) {
    case PathVariant::HOTPOT: return "HOTPOT";
    case PathVariant::DA: return "DA";
    case PathVariant::SA: return "SA";
    case PathVariant::SIA: return "SIA";
    case PathVariant::DSIA: return "DSIA";
  }
  return "HOTPOT";
}

PathVariant variant_from_name(const std::string& name) {
  if (name == "HOTPOT" || name == "hotpot") return PathVariant::HOTPOT;
  if (name == "DA" || name == "da") return PathVariant::DA;
  if (name == "SA" || name == "sa") return PathVariant::SA;
  if (name == "SIA" || name == "sia") return PathVariant::SIA;
  if (name == "DSIA" || name == "dsia") return PathVariant::DSIA;
  throw ConfigError("unknown path variant: " + name);
}

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw CodecError(msg);
}

}  // namespace

std::string linearize_path(const ReasoningPath& path) {
  require(!path.final_answer.empty(), "final_answer is empty");
  require(!path.hops.empty(), "path has no hops");
  std::ostringstream out;
  const int n = static_cast<int>(path.hops.size());
  for (int i = 0; i < n; ++i) {
    const PathHop& hop = path.hops[i];
    const std::string tag = std::to_string(i + 1);
    const bool last = i == n - 1;
    switch (path.variant) {
      case PathVariant::HOTPOT:
        require(!hop.title.empty(), "HOTPOT hop missing title");
        require(!hop.intermediate_answer && !hop.sub_question,
                "HOTPOT hop carries non-HOTPOT fields");
        out << "[title-" << tag << "] " << hop.title << " [facts-" << tag << "]";
        for (int f : hop.fact_indices) out << " [f" << f << "]";
        out << " ";
        break;
      case PathVariant::DA:
        require(hop.sub_question && !hop.sub_question->empty(), "DA hop missing sub_question");
        require(hop.title.empty() && hop.fact_indices.empty() && !hop.intermediate_answer,
                "DA hop carries non-DA fields");
        out << "[question-" << tag << "] " << *hop.sub_question << " ";
        break;
      case PathVariant::SA:
        require(!hop.title.empty(), "SA hop missing title");
        require(hop.fact_indices.empty() && !hop.intermediate_answer && !hop.sub_question,
                "SA hop carries non-SA fields");
        out << "[title-" << tag << "] " << hop.title << " ";
        break;
      case PathVariant::SIA:
        require(!hop.title.empty(), "SIA hop missing title");
        require(hop.fact_indices.empty() && !hop.sub_question, "SIA hop carries non-SIA fields");
        require(last ? !hop.intermediate_answer : hop.intermediate_answer.has_value(),
                "SIA intermediate answers must cover all hops but the last");
        out << "[title-" << tag << "] " << hop.title << " ";
        if (hop.intermediate_answer) out << "[answer-" << tag << "] " << *hop.intermediate_answer << " ";
        break;
      case PathVariant::DSIA:
        require(hop.sub_question && !hop.sub_question->empty(), "DSIA hop missing sub_question");
        require(!hop.title.empty(), "DSIA hop missing title");
        require(hop.fact_indices.empty(), "DSIA hop carries fact indices");
        require(last ? !hop.intermediate_answer : hop.intermediate_answer.has_value(),
                "DSIA intermediate answers must cover all hops but the last");
        out << "[question-" << tag << "] " << *hop.sub_question << " [title-" << tag << "] "
            << hop.title << " ";
        if (hop.intermediate_answer) out << "[answer-" << tag << "] " << *hop.intermediate_answer << " ";
        break;
    }
  }
  out << "[answer] " << path.final_answer;
  return out.str();
}

namespace {

enum class MarkerKind { None, Title, Facts, Question, InterAnswer, FinalAnswer, Fact };

struct Marker {
  MarkerKind kind = MarkerKind::None;
  int index = 0;  // hop number or fact number
};

Marker classify_marker(const std::string& tok) {
  if (tok.size() < 3 || tok.front() != '[' || tok.back() != ']') return {};
  std::string body = tok.substr(1, tok.size() - 2);
  if (body == "answer") return {MarkerKind::FinalAnswer, 0};
  if (body.size() >= 2 && body[0] == 'f' && std::isdigit((unsigned char)body[1])) {
    bool digits = std::all_of(body.begin() + 1, body.end(),
                              [](unsigned char c) { return std::isdigit(c); });
    if (digits) return {MarkerKind::Fact, std::stoi(body.substr(1))};
  }
  auto dash = body.rfind('-');
  if (dash == std::string::npos) return {};
  std::string stem = body.substr(0, dash);
  std::string num = body.substr(dash + 1);
  if (num.empty() || !std::all_of(num.begin(), num.end(),
                                  [](unsigned char c) { return std::isdigit(c); }))
    return {};
  int n = std::stoi(num);
  if (stem == "title") return {MarkerKind::Title, n};
  if (stem == "facts") return {MarkerKind::Facts, n};
  if (stem == "question") return {MarkerKind::Question, n};
  if (stem == "answer") return {MarkerKind::InterAnswer, n};
  return {};
}

std::vector<std::string> whitespace_split(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string join(const std::vector<std::string>& toks, size_t a, size_t b) {
  std::string out;
  for (size_t i = a; i < b; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += toks[i];
  }
  return out;
}

}  // namespace

ParsedPath parse_path(const std::string& text, PathVariant variant) {
  ParsedPath result;
  result.path.variant = variant;
  std::vector<std::string> toks = whitespace_split(text);

  // final answer = everything after the LAST [answer]
  int answer_pos = -1;
  for (int i = 0; i < static_cast<int>(toks.size()); ++i)
    if (toks[i] == "[answer]") answer_pos = i;
  if (answer_pos < 0) {
    result.answer_missing = true;
    result.diagnostics.push_back("missing [answer] marker; answer is empty");
  } else {
    result.path.final_answer = join(toks, answer_pos + 1, toks.size());
    if (result.path.final_answer.empty())
      result.diagnostics.push_back("[answer] marker with empty answer");
  }

  size_t body_end = answer_pos < 0 ? toks.size() : static_cast<size_t>(answer_pos);

  std::map<int, PathHop> hops;  // keyed by hop number
  std::map<std::string, int> marker_count;
  std::map<MarkerKind, int> last_index;
  MarkerKind field = MarkerKind::None;
  int field_hop = 0;
  std::vector<std::string> field_text;

  auto flush = [&]() {
    if (field == MarkerKind::None) return;
    std::string joined = join(field_text, 0, field_text.size());
    PathHop& hop = hops[field_hop];
    switch (field) {
      case MarkerKind::Title: hop.title = joined; break;
      case MarkerKind::Question: hop.sub_question = joined; break;
      case MarkerKind::InterAnswer: hop.intermediate_answer = joined; break;
      case MarkerKind::Facts: break;  // fact markers collected inline
      default: break;
    }
    field_text.clear();
  };

  for (size_t i = 0; i < body_end; ++i) {
    Marker m = classify_marker(toks[i]);
    if (m.kind == MarkerKind::Fact) {
      if (field == MarkerKind::Facts) {
        hops[field_hop].fact_indices.push_back(m.index);
      } else {
        result.diagnostics.push_back("stray fact marker " + toks[i]);
      }
      continue;
    }
    if (m.kind == MarkerKind::None || m.kind == MarkerKind::FinalAnswer) {
      if (m.kind == MarkerKind::FinalAnswer) {
        result.diagnostics.push_back("extra [answer] marker before the final one");
        flush();
        field = MarkerKind::None;
        continue;
      }
      if (field == MarkerKind::None && hops.empty())
        continue;  // preamble text before any marker
      field_text.push_back(toks[i]);
      continue;
    }
    flush();
    if (++marker_count[toks[i]] == 2)
      result.diagnostics.push_back("duplicate marker " + toks[i]);
    auto it = last_index.find(m.kind);
    if (it != last_index.end() && m.index <= it->second && marker_count[toks[i]] == 1)
      result.diagnostics.push_back("out-of-order marker " + toks[i]);
    last_index[m.kind] = std::max(last_index.count(m.kind) ? last_index[m.kind] : 0, m.index);
    field = m.kind;
    field_hop = m.index;
    (void)hops[field_hop];
  }
  flush();

  int expect = 1;
  for (auto& [num, hop] : hops) {
    if (num != expect)
      result.diagnostics.push_back("gap in hop numbering at hop " + std::to_string(num));
    expect = num + 1;
    result.path.hops.push_back(std::move(hop));
  }
  if (result.path.hops.empty()) result.diagnostics.push_back("no hops");
  return result;
}

ReasoningPath gold_path(const QuestionInstance& inst, PathVariant variant) {
  ReasoningPath path;
  path.variant = variant;
  path.final_answer = inst.answer;

  // support titles grouped in order of first appearance
  std::vector<std::string> titles;
  std::vector<std::vector<int>> facts;
  for (const auto& s : inst.gold_supports) {
    std::string norm = normalize_title(s.title);
    int idx = -1;
    for (size_t i = 0; i < titles.size(); ++i)
      if (normalize_title(titles[i]) == norm) idx = static_cast<int>(i);
    if (idx < 0) {
      titles.push_back(s.title);
      facts.emplace_back();
      idx = static_cast<int>(titles.size()) - 1;
    }
    if (s.fact_idx >= 0) facts[idx].push_back(s.fact_idx);
  }
  for (auto& f : facts) std::sort(f.begin(), f.end());

  const int n = static_cast<int>(titles.size());
  switch (variant) {
    case PathVariant::HOTPOT:
      for (int i = 0; i < n; ++i) {
        PathHop hop;
        hop.title = titles[i];
        hop.fact_indices = facts[i];
        path.hops.push_back(std::move(hop));
      }
      break;
    case PathVariant::SA:
      for (int i = 0; i < n; ++i) {
        PathHop hop;
        hop.title = titles[i];
        path.hops.push_back(std::move(hop));
      }
      break;
    case PathVariant::DA:
      if (inst.decomposition.empty())
        throw CodecError("instance '" + inst.id + "' has no decomposition for DA path");
      for (const auto& d : inst.decomposition) {
        PathHop hop;
        hop.sub_question = d.sub_question;
        path.hops.push_back(std::move(hop));
      }
      break;
    case PathVariant::SIA:
      for (int i = 0; i < n; ++i) {
        PathHop hop;
        hop.title = titles[i];
        if (i + 1 < n) {
          if (static_cast<int>(inst.decomposition.size()) <= i)
            throw CodecError("instance '" + inst.id + "' lacks intermediate answers for SIA path");
          hop.intermediate_answer = inst.decomposition[i].intermediate_answer;
        }
        path.hops.push_back(std::move(hop));
      }
      break;
    case PathVariant::DSIA:
      if (static_cast<int>(inst.decomposition.size()) < n)
        throw CodecError("instance '" + inst.id + "' lacks decomposition for DSIA path");
      for (int i = 0; i < n; ++i) {
        PathHop hop;
        hop.sub_question = inst.decomposition[i].sub_question;
        hop.title = titles[i];
        if (i + 1 < n) hop.intermediate_answer = inst.decomposition[i].intermediate_answer;
        path.hops.push_back(std::move(hop));
      }
      break;
  }
  return path;
}

}  // namespace seqgraph
