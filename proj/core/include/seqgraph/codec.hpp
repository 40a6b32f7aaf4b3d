#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "seqgraph/corpus.hpp"
#include "seqgraph/graph.hpp"

namespace seqgraph {

struct CodecConfig {
  int max_fact_index = 16;  // K: [f1]..[fK]
  int max_hops = 4;         // H: [title-1]..[title-H] etc.
  int max_len = 256;        // input truncation
};

struct Token {
  std::string text;
  int char_start = 0;
  int char_end = 0;
};

// Word-level tokenizer: runs of alphanumerics, single punctuation characters,
// and bracketed markers like "[f1]" as single tokens.
std::vector<Token> tokenize(const std::string& text);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  static Vocabulary build(const std::vector<QuestionInstance>& corpus, const CodecConfig& cfg);

  int id(const std::string& token) const;    // kUnk when absent
  const std::string& token(int id) const;
  bool is_marker(int id) const { return id >= 4 && id < first_content_id_; }
  int size() const { return static_cast<int>(tokens_.size()); }
  const CodecConfig& config() const { return cfg_; }

  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;  // space-joined

  void serialize(std::ostream& out) const;
  static Vocabulary deserialize(std::istream& in);

 private:
  Vocabulary() = default;
  void index_tokens();
  CodecConfig cfg_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  int first_content_id_ = 4;
};

// Token ids for one passage sequence S_i plus, for every graph node homed in
// this passage, the inclusive token range [a, b] its surface occupies.
struct EncodedSequence {
  std::vector<int> token_ids;
  std::map<int, std::pair<int, int>> spans;  // graph node idx -> [a, b]
  int passage_idx = 0;
};

EncodedSequence assemble_input(const std::string& question, const QuestionInstance& instance,
                               int passage_idx, const LocalGraph& graph,
                               const Vocabulary& vocab, int max_len);

enum class PathVariant { HOTPOT, DA, SA, SIA, DSIA };

std::string variant_name(PathVariant v);
PathVariant variant_from_name(const std::string& name);

struct PathHop {
  std::string title;
  std::vector<int> fact_indices;  // 1-based, HOTPOT only
  std::optional<std::string> intermediate_answer;
  std::optional<std::string> sub_question;
  bool operator==(const PathHop&) const = default;
};

struct ReasoningPath {
  PathVariant variant = PathVariant::HOTPOT;
  std::vector<PathHop> hops;
  std::string final_answer;
  bool operator==(const ReasoningPath&) const = default;
};

struct CodecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Canonical single-space-separated marker string. Throws CodecError when the
// hops carry fields the variant does not admit.
std::string linearize_path(const ReasoningPath& path);

struct ParsedPath {
  ReasoningPath path;
  std::vector<std::string> diagnostics;
  bool answer_missing = false;
};

// Lenient: always returns a path, recovering the final answer after the last
// [answer] marker even when the hop structure is malformed.
ParsedPath parse_path(const std::string& text, PathVariant variant);

// Ground-truth reasoning path for a training target.
ReasoningPath gold_path(const QuestionInstance& instance, PathVariant variant);

}  // namespace seqgraph
