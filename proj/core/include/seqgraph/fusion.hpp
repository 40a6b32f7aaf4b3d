#pragma once

#include <random>
#include <vector>

#include "seqgraph/autodiff.hpp"
#include "seqgraph/codec.hpp"
#include "seqgraph/graph.hpp"

namespace seqgraph {

struct GnnConfig {
  int layers = 2;
  int heads = 2;
  double dropout = 0.2;
  double leaky_slope = 0.2;
  bool add_reverse_edges = true;
  bool add_self_loops = true;

  void check() const;
};

namespace gat {

// Node embeddings aligned with LocalGraph node order plus an activity flag:
// nodes whose span was truncated away hold zeros and send no messages.
struct NodeState {
  ad::Expr matrix;  // num_nodes x d_model
  std::vector<bool> active;
};

// Span-average initialization of graph node embeddings from the lower
// encoder blocks (one block per passage, aligned with seqs).
NodeState init_nodes(ad::Tape& tape, const std::vector<ad::Expr>& blocks,
                     const LocalGraph& graph, const std::vector<EncodedSequence>& seqs);

// Multi-head graph attention network over the entity-passage graph.
class Network {
 public:
  Network(int d_model, const GnnConfig& cfg, ad::ParamStore& store, std::mt19937_64& rng);

  ad::Expr propagate(ad::Tape& tape, const NodeState& nodes, const LocalGraph& graph,
                     bool train, std::mt19937_64& rng) const;

  // edge set after augmentation (reverse edges / self loops / truncation)
  std::vector<std::pair<int, int>> message_edges(const LocalGraph& graph,
                                                 const std::vector<bool>& active) const;

  // attention coefficients per layer/head for the debug dump, laid out as one
  // row per edge: src dst coeff
  std::vector<ad::Mat> attention_coefficients(ad::Tape& tape, const NodeState& nodes,
                                              const LocalGraph& graph) const;

  const GnnConfig& config() const { return cfg_; }

 private:
  struct Layer {
    struct Head {
      ad::Param* w;      // d_in x d_head
      ad::Param* a_src;  // d_head x 1
      ad::Param* a_dst;  // d_head x 1
    };
    std::vector<Head> heads;
  };

  ad::Expr layer_forward(ad::Tape& tape, const Layer& layer, ad::Expr h,
                         const std::vector<std::pair<int, int>>& edges,
                         const std::vector<int>& seg, int n_nodes, bool last, bool train,
                         std::mt19937_64& rng, std::vector<ad::Expr>* coeff_out) const;

  int d_model_;
  GnnConfig cfg_;
  std::vector<Layer> layers_;
};

// Z_i^L + Z_i^G: node outputs broadcast over their recorded token ranges,
// zeros elsewhere. Non-span rows of the result equal block exactly.
ad::Expr scatter_fuse(ad::Tape& tape, ad::Expr block, ad::Expr node_out,
                      const EncodedSequence& seq);

}  // namespace gat
}  // namespace seqgraph
