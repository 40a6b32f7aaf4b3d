#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "seqgraph/autodiff.hpp"
#include "seqgraph/codec.hpp"
#include "seqgraph/corpus.hpp"
#include "seqgraph/fusion.hpp"
#include "seqgraph/graph.hpp"

namespace seqgraph {

struct ModelConfig {
  int d_model = 64;
  int enc_layers = 4;   // M
  int dec_layers = 4;
  int heads = 4;
  int d_ff = 128;
  int fusion_layer = 2;  // L, 0 <= L < M; graph features enter after layer L
  double dropout = 0.1;
  int vocab_size = 0;
  int max_positions = 512;
  int max_out_len = 48;

  void check() const;
};

enum class ModelMode { Fid, PathFid, SeqGraph };
std::string mode_name(ModelMode m);
ModelMode mode_from_name(const std::string& name);

// One hidden matrix (tokens x d_model) per passage, passage order preserved.
using HiddenBlock = std::vector<ad::Expr>;

enum class DecodeStrategy { Greedy, Beam };

// Encoder-decoder transformer with the encoder split at fusion_layer. The
// token embedding table is shared between encoder and decoder; positions are
// learned absolute and reset per passage.
class Transformer {
 public:
  Transformer(const ModelConfig& cfg, ad::ParamStore& store, std::mt19937_64& rng);

  // first L encoder layers (embeddings only when L == 0)
  HiddenBlock encode_lower(ad::Tape& tape, const std::vector<EncodedSequence>& seqs,
                           bool train, std::mt19937_64& rng) const;
  // layers L+1..M plus the final encoder norm
  HiddenBlock encode_upper(ad::Tape& tape, const HiddenBlock& fused, bool train,
                           std::mt19937_64& rng) const;

  // teacher-forced decoder logits over the concatenated encoder states
  ad::Expr decode_logits(ad::Tape& tape, ad::Expr enc_concat,
                         const std::vector<int>& target_ids, bool train,
                         std::mt19937_64& rng) const;

  std::vector<int> generate(ad::Tape& tape, ad::Expr enc_concat, int max_out_len,
                            DecodeStrategy strategy, int beam_width = 1) const;

  const ModelConfig& config() const { return cfg_; }

 private:
  struct Attention {
    ad::Param *wq, *wk, *wv, *wo, *bq, *bk, *bv, *bo;
  };
  struct Norm {
    ad::Param *g, *b;
  };
  struct EncLayer {
    Norm ln1, ln2;
    Attention attn;
    ad::Param *w1, *b1, *w2, *b2;
  };
  struct DecLayer {
    Norm ln1, ln2, ln3;
    Attention self_attn, cross_attn;
    ad::Param *w1, *b1, *w2, *b2;
  };

  ad::Expr embed(ad::Tape& tape, const std::vector<int>& ids, ad::Param* pos_table,
                 bool train, std::mt19937_64& rng) const;
  ad::Expr attention(ad::Tape& tape, const Attention& p, ad::Expr q_in, ad::Expr kv_in,
                     const ad::Mat* additive_mask, bool train, std::mt19937_64& rng) const;
  ad::Expr enc_layer(ad::Tape& tape, const EncLayer& l, ad::Expr x, bool train,
                     std::mt19937_64& rng) const;
  ad::Expr decoder_hidden(ad::Tape& tape, ad::Expr enc_concat,
                          const std::vector<int>& input_ids, bool train,
                          std::mt19937_64& rng) const;

  ModelConfig cfg_;
  ad::Param* embedding_;  // vocab x d
  ad::Param* pos_enc_;
  ad::Param* pos_dec_;
  ad::Param* lm_head_;  // vocab x d
  Norm enc_final_, dec_final_;
  std::vector<EncLayer> enc_;
  std::vector<DecLayer> dec_;
};

// Full pipeline: FiD encoding, optional graph fusion, decoding.
class QaModel {
 public:
  QaModel(const ModelConfig& cfg, const GnnConfig& gnn, ModelMode mode, uint64_t seed);

  // concatenated per-passage encoder outputs [S_1; ...; S_N]
  ad::Expr encode(ad::Tape& tape, const std::vector<EncodedSequence>& seqs,
                  const LocalGraph* graph, bool train, std::mt19937_64& rng) const;
  // per-passage fused blocks (before concatenation), for equivariance checks
  HiddenBlock encode_blocks(ad::Tape& tape, const std::vector<EncodedSequence>& seqs,
                            const LocalGraph* graph, bool train, std::mt19937_64& rng) const;

  ad::Expr loss(ad::Tape& tape, const std::vector<EncodedSequence>& seqs,
                const LocalGraph* graph, const std::vector<int>& target_ids, bool train,
                std::mt19937_64& rng) const;

  std::vector<int> predict(const std::vector<EncodedSequence>& seqs, const LocalGraph* graph,
                           int max_out_len, DecodeStrategy strategy, int beam_width = 1) const;

  const Transformer& transformer() const { return *transformer_; }
  const gat::Network* gat_network() const { return gat_.get(); }
  ModelMode mode() const { return mode_; }
  const ModelConfig& config() const { return cfg_; }
  const GnnConfig& gnn_config() const { return gnn_cfg_; }
  ad::ParamStore& params() { return store_; }
  const ad::ParamStore& params() const { return store_; }

  void save(const std::string& path, const Vocabulary& vocab) const;
  struct Loaded {
    std::unique_ptr<QaModel> model;
    Vocabulary vocab;
  };
  static Loaded load(const std::string& path);

 private:
  ModelConfig cfg_;
  GnnConfig gnn_cfg_;
  ModelMode mode_;
  ad::ParamStore store_;
  std::unique_ptr<Transformer> transformer_;
  std::unique_ptr<gat::Network> gat_;
};

}  // namespace seqgraph
