#include "seqgraph/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "json.hpp"

using nlohmann::json;

namespace seqgraph {

void TrainConfig::check() const {
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (warmup_steps < 0 || warmup_steps > total_steps)
    throw ConfigError("warmup_steps must lie in [0, total_steps]");
  if (effective_batch_size < 1) throw ConfigError("effective_batch_size must be >= 1");
  if (grad_clip_norm <= 0.0) throw ConfigError("grad_clip_norm must be positive");
}

double lr_at(int step, const TrainConfig& cfg) {
  if (step < 0) throw ConfigError("step must be non-negative");
  if (step >= cfg.total_steps) return 0.0;
  if (cfg.warmup_steps > 0 && step < cfg.warmup_steps)
    return cfg.learning_rate * static_cast<double>(step) / cfg.warmup_steps;
  const double remaining = cfg.total_steps - cfg.warmup_steps;
  if (remaining <= 0.0) return cfg.learning_rate;
  return cfg.learning_rate * static_cast<double>(cfg.total_steps - step) / remaining;
}

std::string target_string(const QuestionInstance& inst, ModelMode mode, PathVariant variant) {
  if (mode == ModelMode::Fid) return "[answer] " + inst.answer;
  return linearize_path(gold_path(inst, variant));
}

std::vector<TrainExample> make_examples(const std::vector<QuestionInstance>& data,
                                        const Vocabulary& vocab, ModelMode mode,
                                        PathVariant variant, int max_len, int max_out_len) {
  std::vector<TrainExample> out;
  out.reserve(data.size());
  for (const auto& inst : data) {
    TrainExample ex;
    ex.id = inst.id;
    ex.graph = build_local_graph(inst);
    for (int pi = 0; pi < static_cast<int>(inst.passages.size()); ++pi)
      ex.sequences.push_back(assemble_input(inst.question, inst, pi, ex.graph, vocab, max_len));
    ex.target_ids = vocab.encode(target_string(inst, mode, variant));
    ex.target_ids.push_back(Vocabulary::kEos);
    if (static_cast<int>(ex.target_ids.size()) > max_out_len) {
      ex.target_ids.resize(static_cast<size_t>(max_out_len));
      ex.target_ids.back() = Vocabulary::kEos;
      ex.target_truncated = true;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

AdamW::AdamW(std::vector<ad::Param*> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const ad::Param* p : params_) {
    m_.push_back(ad::Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(ad::Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamW::step(double lr, double weight_decay) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (size_t i = 0; i < params_.size(); ++i) {
    ad::Param& p = *params_[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    ad::Mat m_hat = m_[i] / bc1;
    ad::Mat v_hat = v_[i] / bc2;
    p.value -= lr * (m_hat.array() / (v_hat.array().sqrt() + eps_)).matrix();
    if (p.decay && weight_decay > 0.0) p.value -= lr * weight_decay * p.value;
  }
}

TrainLog fit(QaModel& model, const Vocabulary& vocab, const std::vector<TrainExample>& examples,
             const TrainConfig& cfg, std::ostream* log_stream,
             const std::string& checkpoint_path) {
  cfg.check();
  if (examples.empty()) throw ConfigError("training set is empty");

  std::mt19937_64 rng(cfg.seed);
  AdamW opt(model.params().all());
  TrainLog log;

  // seeded shuffle, re-drawn each epoch
  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  auto reshuffle = [&]() {
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  };
  reshuffle();
  size_t cursor = 0;

  model.params().zero_grads();
  for (int step = 1; step <= cfg.total_steps; ++step) {
    double step_loss = 0.0;
    for (int b = 0; b < cfg.effective_batch_size; ++b) {
      if (cursor >= order.size()) {
        reshuffle();
        cursor = 0;
      }
      const TrainExample& ex = examples[order[cursor++]];
      ad::Tape tape;
      ad::Expr loss = model.loss(tape, ex.sequences, &ex.graph, ex.target_ids, true, rng);
      double value = loss.val()(0, 0);
      if (!std::isfinite(value))
        throw NumericError("non-finite loss at step " + std::to_string(step) +
                           " on example '" + ex.id + "'");
      step_loss += value;
      tape.backward(loss);
    }
    step_loss /= cfg.effective_batch_size;

    // mean over the accumulated batch, then global-norm clipping
    auto params = model.params().all();
    double sq = 0.0;
    for (ad::Param* p : params) {
      p->grad /= static_cast<double>(cfg.effective_batch_size);
      sq += p->grad.squaredNorm();
    }
    double norm = std::sqrt(sq);
    if (norm > cfg.grad_clip_norm) {
      const double scale = cfg.grad_clip_norm / norm;
      for (ad::Param* p : params) p->grad *= scale;
      norm = cfg.grad_clip_norm;
    }

    const double lr = lr_at(step, cfg);
    opt.step(lr, cfg.weight_decay);
    model.params().zero_grads();

    if (step % cfg.log_every == 0 || step == cfg.total_steps) {
      log.steps.push_back({step, step_loss, lr, norm});
      if (log_stream) {
        json line = {{"step", step}, {"loss", step_loss}, {"lr", lr}, {"grad_norm", norm}};
        *log_stream << line.dump() << "\n";
      }
    }
    if (cfg.checkpoint_every > 0 && !checkpoint_path.empty() &&
        (step % cfg.checkpoint_every == 0 || step == cfg.total_steps))
      model.save(checkpoint_path, vocab);
  }
  if (!checkpoint_path.empty()) model.save(checkpoint_path, vocab);
  return log;
}

double token_accuracy(const QaModel& model, const std::vector<TrainExample>& examples) {
  size_t correct = 0, total = 0;
  std::mt19937_64 rng(0);
  for (const auto& ex : examples) {
    ad::Tape tape;
    ad::Expr enc = model.encode(tape, ex.sequences, &ex.graph, false, rng);
    ad::Expr logits = model.transformer().decode_logits(tape, enc, ex.target_ids, false, rng);
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      int target = ex.target_ids[static_cast<size_t>(r)];
      if (target == Vocabulary::kPad) continue;
      Eigen::Index pred;
      logits.val().row(r).maxCoeff(&pred);
      correct += pred == target;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace seqgraph
