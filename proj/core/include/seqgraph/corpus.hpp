#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqgraph {

// Error hierarchy shared across the library. The CLI maps these to exit codes.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A span of characters inside one sentence, annotated with the title of the
// passage the entity links to.
struct EntitySpan {
  int sentence_idx = 0;
  int char_start = 0;
  int char_end = 0;  // exclusive
  std::string target_title;
};

struct Passage {
  std::string title;
  std::vector<std::string> sentences;  // sentence k carries fact index k+1 (1-based)
  std::vector<EntitySpan> entity_spans;
};

// (title, fact index) pair; fact_idx is 1-based for sentence-level supports
// and -1 for title-only (Musique-style) supports.
struct SupportRef {
  std::string title;
  int fact_idx = -1;
  bool operator==(const SupportRef&) const = default;
};

struct DecompositionStep {
  std::string sub_question;
  std::string intermediate_answer;
};

enum class DatasetStyle { Hotpot, Musique };
enum class QuestionType { Bridge, Comparison };

struct QuestionInstance {
  std::string id;
  std::string question;
  std::string answer;
  std::vector<Passage> passages;
  std::vector<SupportRef> gold_supports;
  std::vector<DecompositionStep> decomposition;
  int num_distractors = 0;
  int hop_count = 2;
  DatasetStyle style = DatasetStyle::Hotpot;
  QuestionType question_type = QuestionType::Bridge;
};

struct SyntheticConfig {
  int num_questions = 100;
  int min_hops = 2;
  int max_hops = 2;
  int passages_per_question = 6;  // N; distractors = N - hops
  int vocab_size = 200;           // filler word pool
  int entity_pool_size = 64;      // distinct titles available
  double shortcut_rate = 0.0;     // fraction of questions with the answer leaked
                                  // into the first-hop passage
  uint64_t seed = 0;
  DatasetStyle style = DatasetStyle::Hotpot;
};

std::vector<QuestionInstance> load_dataset(const std::string& path, DatasetStyle format);
void save_dataset(const std::string& path, const std::vector<QuestionInstance>& data);

// The entity sidecar lives in its own file next to the dataset.
void load_sidecar(const std::string& path, std::vector<QuestionInstance>& data);
void save_sidecar(const std::string& path, const std::vector<QuestionInstance>& data);

std::vector<QuestionInstance> generate_synthetic(const SyntheticConfig& config);

// Lists every violated invariant; empty for a valid instance.
std::vector<std::string> validate(const QuestionInstance& instance);

}  // namespace seqgraph
