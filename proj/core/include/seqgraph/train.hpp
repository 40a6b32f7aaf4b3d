#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "seqgraph/net.hpp"

namespace seqgraph {

struct TrainConfig {
  double learning_rate = 1e-4;
  int warmup_steps = 2000;  // 1000 for Musique-style runs
  int total_steps = 16000;
  int effective_batch_size = 64;  // implemented with gradient accumulation
  double grad_clip_norm = 1.0;
  double weight_decay = 0.01;
  uint64_t seed = 0;
  int checkpoint_every = 0;  // 0 disables periodic checkpoints
  int log_every = 1;

  void check() const;
};

// Linear warmup to learning_rate, then linear decay to zero at total_steps.
double lr_at(int step, const TrainConfig& cfg);

// One training example: per-passage inputs, the local graph, target token ids
// (ending in [eos]).
struct TrainExample {
  std::string id;
  std::vector<EncodedSequence> sequences;
  LocalGraph graph;
  std::vector<int> target_ids;
  bool target_truncated = false;
};

// Target for the configured mode: the linearized gold reasoning path, or
// "[answer] a" for answer-only (fid) models.
std::string target_string(const QuestionInstance& inst, ModelMode mode, PathVariant variant);

std::vector<TrainExample> make_examples(const std::vector<QuestionInstance>& data,
                                        const Vocabulary& vocab, ModelMode mode,
                                        PathVariant variant, int max_len, int max_out_len);

struct StepRecord {
  int step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;  // post-clip
};

struct TrainLog {
  std::vector<StepRecord> steps;
};

// AdamW with decoupled weight decay; decay skipped for parameters flagged
// decay=false (biases, normalization).
class AdamW {
 public:
  AdamW(std::vector<ad::Param*> params, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);
  void step(double lr, double weight_decay);

 private:
  std::vector<ad::Param*> params_;
  std::vector<ad::Mat> m_, v_;
  double beta1_, beta2_, eps_;
  int t_ = 0;
};

TrainLog fit(QaModel& model, const Vocabulary& vocab, const std::vector<TrainExample>& examples,
             const TrainConfig& cfg, std::ostream* log_stream = nullptr,
             const std::string& checkpoint_path = "");

// Teacher-forced argmax accuracy over non-pad target tokens.
double token_accuracy(const QaModel& model, const std::vector<TrainExample>& examples);

}  // namespace seqgraph
