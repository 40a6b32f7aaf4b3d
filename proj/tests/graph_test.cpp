#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>
#include <set>

#include "seqgraph/corpus.hpp"
#include "seqgraph/graph.hpp"

using namespace seqgraph;

namespace {

// Brute-force oracle: enumerate every (entity span, passage title) pair and
// connect on normalized-title equality. Independent of build_local_graph's
// indexing scheme; edges are identified structurally.
struct OracleEdge {
  int src_passage;
  int sentence_idx;
  int char_start;
  int char_end;
  int dst_passage;
  auto operator<=>(const OracleEdge&) const = default;
};

std::set<OracleEdge> oracle_edges(const QuestionInstance& inst) {
  std::set<OracleEdge> out;
  for (size_t pi = 0; pi < inst.passages.size(); ++pi) {
    for (const auto& es : inst.passages[pi].entity_spans) {
      for (size_t pj = 0; pj < inst.passages.size(); ++pj) {
        if (normalize_title(es.target_title) == normalize_title(inst.passages[pj].title))
          out.insert({static_cast<int>(pi), es.sentence_idx, es.char_start, es.char_end,
                      static_cast<int>(pj)});
      }
    }
  }
  return out;
}

std::set<OracleEdge> built_edges(const QuestionInstance& inst, const LocalGraph& g) {
  std::set<OracleEdge> out;
  for (auto [src, dst] : g.edges) {
    const GraphNode& s = g.nodes[src];
    const GraphNode& d = g.nodes[dst];
    REQUIRE(s.kind == NodeKind::EntitySpan);
    REQUIRE(d.kind == NodeKind::PassageTitle);
    out.insert({s.passage_idx, s.sentence_idx, s.char_start, s.char_end, d.passage_idx});
  }
  (void)inst;
  return out;
}

}  // namespace

TEST_CASE("normalize_title case-folds, collapses whitespace and is idempotent") {
  CHECK(normalize_title("  The  QUICK\tFox ") == "the quick fox");
  CHECK(normalize_title("Alien (film)") == "alien (film)");
  CHECK(normalize_title("") == "");
  for (const char* s : {"A  B", " x ", "MiXeD Case  Words", "a\nb\tc"}) {
    std::string once = normalize_title(s);
    CHECK(normalize_title(once) == once);
  }
}

TEST_CASE("node layout: title nodes first in passage order, then spans in document order") {
  QuestionInstance inst;
  inst.id = "g0";
  Passage a;
  a.title = "Alpha";
  a.sentences = {"x Beta y .", "z Beta w ."};
  a.entity_spans.push_back({1, 2, 6, "Beta"});
  a.entity_spans.push_back({0, 2, 6, "Beta"});
  Passage b;
  b.title = "Beta";
  b.sentences = {"beta text ."};
  inst.passages = {a, b};

  auto g = build_local_graph(inst);
  REQUIRE(g.nodes.size() == 4);
  CHECK(g.nodes[0].kind == NodeKind::PassageTitle);
  CHECK(g.nodes[1].kind == NodeKind::PassageTitle);
  CHECK(g.title_node(0) == 0);
  CHECK(g.title_node(1) == 1);
  CHECK(g.nodes[0].label == "alpha");
  CHECK(g.nodes[1].label == "beta");
  // spans sorted by (sentence, char_start) regardless of annotation order
  CHECK(g.nodes[2].sentence_idx == 0);
  CHECK(g.nodes[3].sentence_idx == 1);
  // duplicate mentions get distinct nodes and distinct edges
  REQUIRE(g.edges.size() == 2);
  CHECK(g.edges[0] != g.edges[1]);
}

TEST_CASE("edges require normalized-title equality, not substring match") {
  QuestionInstance inst;
  inst.id = "g1";
  Passage a;
  a.title = "Source";
  a.sentences = {"see BETA  here ."};
  a.entity_spans.push_back({0, 4, 8, "BETA "});   // matches after normalization
  a.entity_spans.push_back({0, 4, 8, "Beta x"});  // no passage has this title
  Passage b;
  b.title = " beta";
  b.sentences = {"content ."};
  inst.passages = {a, b};
  auto g = build_local_graph(inst);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.nodes[g.edges[0].second].passage_idx == 1);
}

TEST_CASE("a span linking a duplicated title connects to every copy") {
  QuestionInstance inst;
  inst.id = "g2";
  Passage a;
  a.title = "Home";
  a.sentences = {"go to Twin now ."};
  a.entity_spans.push_back({0, 6, 10, "Twin"});
  Passage b;
  b.title = "Twin";
  b.sentences = {"one ."};
  Passage c;
  c.title = "twin";
  c.sentences = {"two ."};
  inst.passages = {a, b, c};
  auto g = build_local_graph(inst);
  CHECK(g.edges.size() == 2);
  std::set<int> dsts;
  for (auto [s, d] : g.edges) dsts.insert(g.nodes[d].passage_idx);
  CHECK(dsts == std::set<int>{1, 2});
}

TEST_CASE("built graph matches the brute-force pairing oracle on random corpora") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    SyntheticConfig cfg;
    cfg.num_questions = 5;
    cfg.min_hops = 2;
    cfg.max_hops = 2 + static_cast<int>(rng() % 2);
    cfg.passages_per_question = cfg.max_hops + 2 + static_cast<int>(rng() % 3);
    cfg.seed = rng();
    for (const auto& inst : generate_synthetic(cfg)) {
      auto g = build_local_graph(inst);
      CHECK(built_edges(inst, g) == oracle_edges(inst));
    }
  }
}

TEST_CASE("graph construction is invariant to passage permutation up to relabeling") {
  SyntheticConfig cfg;
  cfg.num_questions = 10;
  cfg.seed = 5;
  std::mt19937_64 rng(17);
  for (auto inst : generate_synthetic(cfg)) {
    auto before = oracle_edges(inst);
    auto g0 = build_local_graph(inst);
    CHECK(built_edges(inst, g0) == before);

    std::vector<int> perm(inst.passages.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    std::shuffle(perm.begin(), perm.end(), rng);
    QuestionInstance shuffled = inst;
    for (size_t i = 0; i < perm.size(); ++i) shuffled.passages[i] = inst.passages[perm[i]];
    auto g1 = build_local_graph(shuffled);
    // same number of structural edges; endpoints follow the permutation
    CHECK(g1.edges.size() == g0.edges.size());
    CHECK(built_edges(shuffled, g1) == oracle_edges(shuffled));
  }
}

TEST_CASE("edge list dump names both endpoints with passage positions") {
  QuestionInstance inst;
  inst.id = "g3";
  Passage a;
  a.title = "From";
  a.sentences = {"link To here ."};
  a.entity_spans.push_back({0, 5, 7, "To"});
  Passage b;
  b.title = "To";
  b.sentences = {"x ."};
  inst.passages = {a, b};
  auto g = build_local_graph(inst);
  CHECK(dump_edge_list(g) == "To@p0 -> to@p1\n");
}
