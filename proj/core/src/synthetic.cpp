#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "seqgraph/corpus.hpp"
#include "seqgraph/graph.hpp"

namespace seqgraph {

namespace {

// Deterministic helpers over std::mt19937_64. Distribution objects from the
// standard library are not portable across implementations, so index draws
// use plain modulo on the raw engine.
uint64_t draw(std::mt19937_64& rng, uint64_t bound) { return rng() % bound; }

std::string filler_word(std::mt19937_64& rng, int vocab_size) {
  return "w" + std::to_string(draw(rng, vocab_size));
}

std::string filler_sentence(std::mt19937_64& rng, int vocab_size, int min_words = 4,
                            int max_words = 7) {
  int n = min_words + static_cast<int>(draw(rng, max_words - min_words + 1));
  std::ostringstream out;
  for (int i = 0; i < n; ++i) {
    if (i) out << " ";
    out << filler_word(rng, vocab_size);
  }
  out << " .";
  return out.str();
}

}  // namespace

std::vector<QuestionInstance> generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.num_questions < 0) throw ConfigError("num_questions must be non-negative");
  if (cfg.vocab_size < 1) throw ConfigError("vocab_size must be positive");
  if (cfg.shortcut_rate < 0.0 || cfg.shortcut_rate > 1.0)
    throw ConfigError("shortcut_rate must lie in [0, 1]");
  if (cfg.min_hops < 2 || cfg.max_hops < cfg.min_hops)
    throw ConfigError("hop range must satisfy 2 <= min_hops <= max_hops");
  if (cfg.passages_per_question < cfg.max_hops)
    throw ConfigError("passages_per_question must cover max_hops chain passages");

  // Entity titles are two-word names over a word pool; a chain of k hops plus
  // one confusable decoy per bridge must fit into the pool.
  int name_words = std::max(4, cfg.entity_pool_size);
  if (cfg.entity_pool_size < 2 * cfg.passages_per_question)
    throw ConfigError("entity pool too small to produce " +
                      std::to_string(cfg.passages_per_question) + " distinct titles");

  std::mt19937_64 rng(cfg.seed);
  const int answer_pool = 32;

  std::vector<QuestionInstance> out;
  out.reserve(cfg.num_questions);

  for (int qi = 0; qi < cfg.num_questions; ++qi) {
    QuestionInstance inst;
    inst.id = "syn-" + std::to_string(qi);
    inst.style = cfg.style;
    inst.question_type = QuestionType::Bridge;

    const int hops =
        cfg.min_hops + static_cast<int>(draw(rng, cfg.max_hops - cfg.min_hops + 1));
    const int n_passages = cfg.passages_per_question;

    // distinct two-word titles: chain titles first, then decoys sharing the
    // head word of the title they shadow, then unrelated distractor titles
    std::set<std::pair<int, int>> used;
    auto fresh_name = [&](int forced_head) {
      for (int tries = 0; tries < 1000; ++tries) {
        int a = forced_head >= 0 ? forced_head : static_cast<int>(draw(rng, name_words));
        int b = static_cast<int>(draw(rng, name_words));
        if (a == b) continue;
        if (used.insert({a, b}).second) return std::pair<int, int>{a, b};
      }
      throw ConfigError("entity pool exhausted while generating titles");
    };
    auto name_text = [](std::pair<int, int> name) {
      return "e" + std::to_string(name.first) + " e" + std::to_string(name.second);
    };

    std::vector<std::pair<int, int>> chain;
    for (int h = 0; h < hops; ++h) chain.push_back(fresh_name(-1));

    // fixed-width answer names: no answer is a substring of another, which
    // keeps brute-force substring scans over passages exact
    auto answer_name = [](uint64_t k) {
      std::string num = std::to_string(k);
      return "ans" + std::string(2 - std::min<size_t>(2, num.size()), '0') + num;
    };
    std::string answer = answer_name(draw(rng, answer_pool));
    inst.answer = answer;
    inst.question = "which answer follows from " + name_text(chain[0]) + " ?";

    struct Draft {
      Passage passage;
      bool gold = false;
      int support_fact = 0;  // 1-based index of the support sentence
    };
    std::vector<Draft> drafts;

    // gold chain passages
    for (int h = 0; h < hops; ++h) {
      Draft d;
      d.gold = true;
      d.passage.title = name_text(chain[h]);
      int n_sents = 3;
      int support = static_cast<int>(draw(rng, n_sents));
      for (int s = 0; s < n_sents; ++s) {
        if (s != support) {
          d.passage.sentences.push_back(filler_sentence(rng, cfg.vocab_size));
          continue;
        }
        if (h + 1 < hops) {
          // bridge sentence mentions only the HEAD word of the next title;
          // the hyperlink target carries the full title
          std::string mention = "e" + std::to_string(chain[h + 1].first);
          std::string prefix = filler_word(rng, cfg.vocab_size) + " links to ";
          std::string sent = prefix + mention + " " + filler_word(rng, cfg.vocab_size) + " .";
          EntitySpan span;
          span.sentence_idx = s;
          span.char_start = static_cast<int>(prefix.size());
          span.char_end = span.char_start + static_cast<int>(mention.size());
          span.target_title = name_text(chain[h + 1]);
          d.passage.sentences.push_back(sent);
          d.passage.entity_spans.push_back(span);
        } else {
          d.passage.sentences.push_back(filler_word(rng, cfg.vocab_size) + " answer is " +
                                        answer + " .");
        }
        d.support_fact = s + 1;
      }
      drafts.push_back(std::move(d));
    }

    // confusable decoys: for each bridge target, one distractor sharing the
    // mentioned head word and carrying a different answer-pool word
    int budget = n_passages - hops;
    for (int h = 1; h < hops && budget > 0; ++h, --budget) {
      Draft d;
      d.passage.title = name_text(fresh_name(chain[h].first));
      std::string decoy_answer;
      do {
        decoy_answer = answer_name(draw(rng, answer_pool));
      } while (decoy_answer == answer);
      int n_sents = 3;
      int slot = static_cast<int>(draw(rng, n_sents));
      for (int s = 0; s < n_sents; ++s) {
        if (s == slot)
          d.passage.sentences.push_back(filler_word(rng, cfg.vocab_size) + " answer is " +
                                        decoy_answer + " .");
        else
          d.passage.sentences.push_back(filler_sentence(rng, cfg.vocab_size));
      }
      drafts.push_back(std::move(d));
    }

    // unrelated distractors: unconnected titles, but still article-like —
    // each states its own (wrong) answer so answer sentences alone never
    // identify the gold passage
    while (budget > 0) {
      Draft d;
      d.passage.title = name_text(fresh_name(-1));
      std::string stray_answer;
      do {
        stray_answer = answer_name(draw(rng, answer_pool));
      } while (stray_answer == answer);
      int n_sents = 3;
      int slot = static_cast<int>(draw(rng, n_sents));
      for (int s = 0; s < n_sents; ++s) {
        if (s == slot)
          d.passage.sentences.push_back(filler_word(rng, cfg.vocab_size) + " answer is " +
                                        stray_answer + " .");
        else
          d.passage.sentences.push_back(filler_sentence(rng, cfg.vocab_size));
      }
      drafts.push_back(std::move(d));
      --budget;
    }

    // plant the shortcut: leak the answer into the first-hop passage
    bool shortcut = (static_cast<double>(draw(rng, 1u << 24)) / double(1u << 24)) <
                    cfg.shortcut_rate;
    if (shortcut && hops >= 2)
      drafts[0].passage.sentences.push_back(filler_word(rng, cfg.vocab_size) +
                                            " answer is " + answer + " .");

    // shuffle passage order (Fisher-Yates on the raw engine)
    std::vector<int> order(drafts.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[draw(rng, i)]);

    for (int idx : order) inst.passages.push_back(drafts[idx].passage);

    // gold supports in hop order, pointing at the shuffled positions' titles
    for (int h = 0; h < hops; ++h) {
      SupportRef ref;
      ref.title = drafts[h].passage.title;
      ref.fact_idx = cfg.style == DatasetStyle::Hotpot ? drafts[h].support_fact : -1;
      inst.gold_supports.push_back(ref);
    }

    for (int h = 0; h + 1 < hops; ++h)
      inst.decomposition.push_back({"which page does " + name_text(chain[h]) + " point to ?",
                                    name_text(chain[h + 1])});
    inst.decomposition.push_back(
        {"what is the answer in " + name_text(chain[hops - 1]) + " ?", answer});

    inst.hop_count = hops;
    inst.num_distractors = n_passages - hops;
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace seqgraph
