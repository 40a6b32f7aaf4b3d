#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "seqgraph/net.hpp"
#include "seqgraph/train.hpp"

using namespace seqgraph;
using ad::Mat;

namespace {

struct Pipeline {
  std::vector<QuestionInstance> data;
  Vocabulary vocab;
  LocalGraph graph;
  std::vector<EncodedSequence> seqs;

  explicit Pipeline(uint64_t seed = 1)
      : data(make_data(seed)), vocab(Vocabulary::build(data, CodecConfig{})) {
    graph = build_local_graph(data[0]);
    for (size_t pi = 0; pi < data[0].passages.size(); ++pi)
      seqs.push_back(assemble_input(data[0].question, data[0], static_cast<int>(pi), graph,
                                    vocab, 128));
  }

  static std::vector<QuestionInstance> make_data(uint64_t seed) {
    SyntheticConfig cfg;
    cfg.num_questions = 3;
    cfg.passages_per_question = 3;
    cfg.seed = seed;
    return generate_synthetic(cfg);
  }

  ModelConfig model_config(ModelMode, int d = 16) const {
    ModelConfig mc;
    mc.d_model = d;
    mc.enc_layers = 2;
    mc.dec_layers = 2;
    mc.heads = 2;
    mc.d_ff = 32;
    mc.fusion_layer = 1;
    mc.dropout = 0.0;
    mc.vocab_size = vocab.size();
    mc.max_positions = 128;
    mc.max_out_len = 12;
    return mc;
  }
};

}  // namespace

TEST_CASE("model configuration validation covers every constraint") {
  ModelConfig cfg;
  cfg.vocab_size = 100;
  CHECK_NOTHROW(cfg.check());
  cfg.fusion_layer = 0;  // graph features straight after the embeddings
  CHECK_NOTHROW(cfg.check());
  cfg.fusion_layer = cfg.enc_layers;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg.fusion_layer = -1;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg.fusion_layer = 2;
  cfg.heads = 3;  // 64 % 3 != 0
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg.heads = 4;
  cfg.vocab_size = 0;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
  cfg.vocab_size = 100;
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(cfg.check(), ConfigError);
}

TEST_CASE("mode names round-trip and reject junk") {
  for (ModelMode m : {ModelMode::Fid, ModelMode::PathFid, ModelMode::SeqGraph})
    CHECK(mode_from_name(mode_name(m)) == m);
  CHECK_THROWS_AS(mode_from_name("t5"), ConfigError);
}

TEST_CASE("same seed builds identical models; different seeds differ") {
  Pipeline p;
  auto cfg = p.model_config(ModelMode::SeqGraph);
  QaModel m1(cfg, GnnConfig{}, ModelMode::SeqGraph, 42);
  QaModel m2(cfg, GnnConfig{}, ModelMode::SeqGraph, 42);
  QaModel m3(cfg, GnnConfig{}, ModelMode::SeqGraph, 43);
  CHECK(m1.params().total_size() == m2.params().total_size());
  for (auto* a : m1.params().all()) {
    auto* b = m2.params().find(a->name);
    REQUIRE(b != nullptr);
    CHECK(a->value == b->value);
  }
  bool differs = false;
  for (auto* a : m1.params().all()) {
    auto* c = m3.params().find(a->name);
    if (c && a->value != c->value) differs = true;
  }
  CHECK(differs);
  // only the seqgraph mode owns graph-attention parameters
  QaModel plain(cfg, GnnConfig{}, ModelMode::PathFid, 42);
  CHECK(plain.gat_network() == nullptr);
  CHECK(plain.params().total_size_with_prefix("gat.") == 0);
  CHECK(m1.params().total_size_with_prefix("gat.") > 0);
}

TEST_CASE("encoding is deterministic outside training and has the right shape") {
  Pipeline p;
  QaModel model(p.model_config(ModelMode::SeqGraph), GnnConfig{}, ModelMode::SeqGraph, 7);
  std::mt19937_64 rng(0);
  ad::Tape t1, t2;
  Mat e1 = model.encode(t1, p.seqs, &p.graph, false, rng).val();
  Mat e2 = model.encode(t2, p.seqs, &p.graph, false, rng).val();
  CHECK(e1 == e2);
  Eigen::Index total = 0;
  for (const auto& s : p.seqs) total += static_cast<Eigen::Index>(s.token_ids.size());
  CHECK(e1.rows() == total);
  CHECK(e1.cols() == 16);

  auto blocks = [&] {
    ad::Tape t;
    auto b = model.encode_blocks(t, p.seqs, &p.graph, false, rng);
    std::vector<Eigen::Index> rows;
    for (const auto& e : b) rows.push_back(e.rows());
    return rows;
  }();
  REQUIRE(blocks.size() == p.seqs.size());
  for (size_t i = 0; i < blocks.size(); ++i)
    CHECK(blocks[i] == static_cast<Eigen::Index>(p.seqs[i].token_ids.size()));
}

TEST_CASE("null and empty graphs produce bit-identical encoder output") {
  Pipeline p;
  QaModel model(p.model_config(ModelMode::SeqGraph), GnnConfig{}, ModelMode::SeqGraph, 9);
  std::mt19937_64 rng(0);
  LocalGraph empty;
  ad::Tape t1, t2;
  Mat with_null = model.encode(t1, p.seqs, nullptr, false, rng).val();
  Mat with_empty = model.encode(t2, p.seqs, &empty, false, rng).val();
  CHECK(with_null == with_empty);
}

TEST_CASE("fusion at layer zero applies graph features to raw embeddings") {
  Pipeline p;
  auto cfg = p.model_config(ModelMode::SeqGraph);
  cfg.fusion_layer = 0;
  QaModel model(cfg, GnnConfig{}, ModelMode::SeqGraph, 11);
  std::mt19937_64 rng(0);
  ad::Tape t1, t2;
  Mat fused = model.encode(t1, p.seqs, &p.graph, false, rng).val();
  Mat plain = model.encode(t2, p.seqs, nullptr, false, rng).val();
  CHECK(fused.rows() == plain.rows());
  CHECK((fused - plain).cwiseAbs().maxCoeff() > 1e-9);  // the graph actually contributes
}

TEST_CASE("teacher-forced logits cover every target position") {
  Pipeline p;
  QaModel model(p.model_config(ModelMode::PathFid), GnnConfig{}, ModelMode::PathFid, 3);
  std::mt19937_64 rng(0);
  ad::Tape tape;
  ad::Expr enc = model.encode(tape, p.seqs, nullptr, false, rng);
  std::vector<int> target = p.vocab.encode(p.data[0].answer);
  target.push_back(Vocabulary::kEos);
  ad::Expr logits = model.transformer().decode_logits(tape, enc, target, false, rng);
  CHECK(logits.rows() == static_cast<Eigen::Index>(target.size()));
  CHECK(logits.cols() == p.vocab.size());

  ad::Expr l = model.loss(tape, p.seqs, nullptr, target, false, rng);
  CHECK(l.val().size() == 1);
  CHECK(l.val()(0, 0) > 0.0);
  CHECK(std::isfinite(l.val()(0, 0)));
}

TEST_CASE("beam width one reproduces greedy decoding exactly") {
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    Pipeline p(seed);
    QaModel model(p.model_config(ModelMode::PathFid), GnnConfig{}, ModelMode::PathFid, seed);
    auto greedy = model.predict(p.seqs, nullptr, 8, DecodeStrategy::Greedy);
    auto beam1 = model.predict(p.seqs, nullptr, 8, DecodeStrategy::Beam, 1);
    CHECK(greedy == beam1);
    CHECK(greedy.size() <= 8);
    auto beam3 = model.predict(p.seqs, nullptr, 8, DecodeStrategy::Beam, 3);
    CHECK(beam3.size() <= 8);  // wider beams still respect the length budget
  }
}

TEST_CASE("generation rejects nonsensical settings") {
  Pipeline p;
  QaModel model(p.model_config(ModelMode::Fid), GnnConfig{}, ModelMode::Fid, 2);
  CHECK_THROWS_AS(model.predict(p.seqs, nullptr, 0, DecodeStrategy::Greedy), ConfigError);
  CHECK_THROWS_AS(model.predict(p.seqs, nullptr, 8, DecodeStrategy::Beam, 0), ConfigError);
}

TEST_CASE("embedding rejects out-of-range ids and over-long sequences") {
  Pipeline p;
  auto cfg = p.model_config(ModelMode::Fid);
  QaModel model(cfg, GnnConfig{}, ModelMode::Fid, 2);
  std::mt19937_64 rng(0);
  auto bad = p.seqs;
  bad[0].token_ids[0] = cfg.vocab_size + 5;
  ad::Tape tape;
  CHECK_THROWS_AS(model.encode(tape, bad, nullptr, false, rng), NumericError);
  auto long_seq = p.seqs;
  long_seq[0].token_ids.assign(cfg.max_positions + 1, 4);
  CHECK_THROWS_AS(model.encode(tape, long_seq, nullptr, false, rng), ConfigError);
}

TEST_CASE("checkpoints restore parameters, configuration and vocabulary") {
  Pipeline p;
  auto cfg = p.model_config(ModelMode::SeqGraph);
  GnnConfig gnn;
  gnn.heads = 4;
  gnn.add_self_loops = false;
  QaModel model(cfg, gnn, ModelMode::SeqGraph, 21);
  std::string path = "/tmp/seqgraph_test_ckpt.bin";
  model.save(path, p.vocab);
  auto loaded = QaModel::load(path);
  std::remove(path.c_str());

  CHECK(loaded.model->mode() == ModelMode::SeqGraph);
  CHECK(loaded.model->config().d_model == cfg.d_model);
  CHECK(loaded.model->gnn_config().heads == 4);
  CHECK_FALSE(loaded.model->gnn_config().add_self_loops);
  CHECK(loaded.vocab.size() == p.vocab.size());
  CHECK(loaded.vocab.id("[answer]") == p.vocab.id("[answer]"));
  for (auto* a : model.params().all()) {
    auto* b = loaded.model->params().find(a->name);
    REQUIRE(b != nullptr);
    CHECK(a->value == b->value);
  }
  // restored model predicts identically
  auto before = model.predict(p.seqs, &p.graph, 8, DecodeStrategy::Greedy);
  auto after = loaded.model->predict(p.seqs, &p.graph, 8, DecodeStrategy::Greedy);
  CHECK(before == after);
}

TEST_CASE("corrupt checkpoints are rejected") {
  std::string path = "/tmp/seqgraph_test_ckpt_bad.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTACKPT garbage";
  }
  CHECK_THROWS_AS(QaModel::load(path), ParseError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(QaModel::load("/nonexistent/x.bin"), ConfigError);
}
