#include <benchmark/benchmark.h>

#include <random>

#include "seqgraph/fusion.hpp"
#include "seqgraph/graph.hpp"
#include "seqgraph/net.hpp"

using namespace seqgraph;

namespace {

std::vector<QuestionInstance> fixture_data(int n, int passages) {
  SyntheticConfig cfg;
  cfg.num_questions = n;
  cfg.passages_per_question = passages;
  cfg.seed = 42;
  return generate_synthetic(cfg);
}

void bm_graph_build(benchmark::State& state) {
  auto data = fixture_data(64, static_cast<int>(state.range(0)));
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_local_graph(data[i++ % data.size()]));
  }
}
BENCHMARK(bm_graph_build)->Arg(4)->Arg(8);

void bm_assemble_input(benchmark::State& state) {
  auto data = fixture_data(64, 6);
  Vocabulary vocab = Vocabulary::build(data, CodecConfig{});
  std::vector<LocalGraph> graphs;
  for (const auto& inst : data) graphs.push_back(build_local_graph(inst));
  size_t i = 0;
  for (auto _ : state) {
    const auto& inst = data[i % data.size()];
    const auto& g = graphs[i % data.size()];
    for (int pi = 0; pi < static_cast<int>(inst.passages.size()); ++pi)
      benchmark::DoNotOptimize(assemble_input(inst.question, inst, pi, g, vocab, 256));
    ++i;
  }
}
BENCHMARK(bm_assemble_input);

void bm_encode(benchmark::State& state) {
  auto data = fixture_data(16, 4);
  Vocabulary vocab = Vocabulary::build(data, CodecConfig{});

  ModelConfig cfg;
  cfg.d_model = static_cast<int>(state.range(0));
  cfg.enc_layers = 4;
  cfg.dec_layers = 4;
  cfg.heads = 4;
  cfg.d_ff = 2 * cfg.d_model;
  cfg.fusion_layer = 2;
  cfg.dropout = 0.0;
  cfg.vocab_size = vocab.size();
  cfg.max_positions = 256;
  QaModel model(cfg, GnnConfig{}, ModelMode::SeqGraph, 1);

  const auto& inst = data[0];
  LocalGraph graph = build_local_graph(inst);
  std::vector<EncodedSequence> seqs;
  for (int pi = 0; pi < static_cast<int>(inst.passages.size()); ++pi)
    seqs.push_back(assemble_input(inst.question, inst, pi, graph, vocab, 256));

  std::mt19937_64 rng(0);
  for (auto _ : state) {
    ad::Tape tape;
    benchmark::DoNotOptimize(model.encode(tape, seqs, &graph, false, rng));
  }
}
BENCHMARK(bm_encode)->Arg(32)->Arg(64);

void bm_gat_propagate(benchmark::State& state) {
  auto data = fixture_data(16, 8);
  Vocabulary vocab = Vocabulary::build(data, CodecConfig{});

  ModelConfig cfg;
  cfg.d_model = 64;
  cfg.enc_layers = 2;
  cfg.dec_layers = 1;
  cfg.heads = 4;
  cfg.d_ff = 128;
  cfg.fusion_layer = 1;
  cfg.dropout = 0.0;
  cfg.vocab_size = vocab.size();
  cfg.max_positions = 256;
  QaModel model(cfg, GnnConfig{}, ModelMode::SeqGraph, 1);

  const auto& inst = data[0];
  LocalGraph graph = build_local_graph(inst);
  std::vector<EncodedSequence> seqs;
  for (int pi = 0; pi < static_cast<int>(inst.passages.size()); ++pi)
    seqs.push_back(assemble_input(inst.question, inst, pi, graph, vocab, 256));

  std::mt19937_64 rng(0);
  for (auto _ : state) {
    ad::Tape tape;
    HiddenBlock lower = model.transformer().encode_lower(tape, seqs, false, rng);
    gat::NodeState nodes = gat::init_nodes(tape, lower, graph, seqs);
    benchmark::DoNotOptimize(model.gat_network()->propagate(tape, nodes, graph, false, rng));
  }
}
BENCHMARK(bm_gat_propagate);

}  // namespace

BENCHMARK_MAIN();
