#include "seqgraph/net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

using nlohmann::json;

namespace seqgraph {

void ModelConfig::check() const {
  if (d_model <= 0 || enc_layers <= 0 || dec_layers <= 0 || heads <= 0 || d_ff <= 0)
    throw ConfigError("model dimensions must be positive");
  if (d_model % heads != 0) throw ConfigError("d_model must be divisible by heads");
  if (fusion_layer < 0 || fusion_layer >= enc_layers)
    throw ConfigError("fusion_layer must satisfy 0 <= L < encoder layers");
  if (vocab_size <= 0) throw ConfigError("vocab_size must be set");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
}

std::string mode_name(ModelMode m) {
  switch (m) {
    case ModelMode::Fid: return "fid";
    case ModelMode::PathFid: return "pathfid";
    case ModelMode::SeqGraph: return "seqgraph";
  }
  return "fid";
}

ModelMode mode_from_name(const std::string& name) {
  if (name == "fid") return ModelMode::Fid;
  if (name == "pathfid") return ModelMode::PathFid;
  if (name == "seqgraph") return ModelMode::SeqGraph;
  throw ConfigError("unknown mode: " + name + " (expected fid|pathfid|seqgraph)");
}

namespace {
constexpr double kWeightInit = 0.05;
constexpr double kEmbedInit = 0.05;
}  // namespace

Transformer::Transformer(const ModelConfig& cfg, ad::ParamStore& store, std::mt19937_64& rng)
    : cfg_(cfg) {
  cfg.check();
  const int d = cfg.d_model;
  embedding_ = &store.create("embedding", cfg.vocab_size, d, kEmbedInit, rng);
  pos_enc_ = &store.create("pos_enc", cfg.max_positions, d, kEmbedInit, rng);
  pos_dec_ = &store.create("pos_dec", cfg.max_positions, d, kEmbedInit, rng);
  lm_head_ = &store.create("lm_head", cfg.vocab_size, d, kWeightInit, rng);

  auto make_norm = [&](const std::string& base) {
    Norm n;
    n.g = &store.create_const(base + ".g", 1, d, 1.0);
    n.b = &store.create_const(base + ".b", 1, d, 0.0);
    return n;
  };
  auto make_attn = [&](const std::string& base) {
    Attention a;
    a.wq = &store.create(base + ".wq", d, d, kWeightInit, rng);
    a.wk = &store.create(base + ".wk", d, d, kWeightInit, rng);
    a.wv = &store.create(base + ".wv", d, d, kWeightInit, rng);
    a.wo = &store.create(base + ".wo", d, d, kWeightInit, rng);
    a.bq = &store.create_const(base + ".bq", 1, d, 0.0);
    a.bk = &store.create_const(base + ".bk", 1, d, 0.0);
    a.bv = &store.create_const(base + ".bv", 1, d, 0.0);
    a.bo = &store.create_const(base + ".bo", 1, d, 0.0);
    return a;
  };

  for (int l = 0; l < cfg.enc_layers; ++l) {
    std::string base = "enc." + std::to_string(l);
    EncLayer layer;
    layer.ln1 = make_norm(base + ".ln1");
    layer.ln2 = make_norm(base + ".ln2");
    layer.attn = make_attn(base + ".attn");
    layer.w1 = &store.create(base + ".ffn.w1", d, cfg.d_ff, kWeightInit, rng);
    layer.b1 = &store.create_const(base + ".ffn.b1", 1, cfg.d_ff, 0.0);
    layer.w2 = &store.create(base + ".ffn.w2", cfg.d_ff, d, kWeightInit, rng);
    layer.b2 = &store.create_const(base + ".ffn.b2", 1, d, 0.0);
    enc_.push_back(layer);
  }
  enc_final_ = make_norm("enc.final_ln");

  for (int l = 0; l < cfg.dec_layers; ++l) {
    std::string base = "dec." + std::to_string(l);
    DecLayer layer;
    layer.ln1 = make_norm(base + ".ln1");
    layer.ln2 = make_norm(base + ".ln2");
    layer.ln3 = make_norm(base + ".ln3");
    layer.self_attn = make_attn(base + ".self");
    layer.cross_attn = make_attn(base + ".cross");
    layer.w1 = &store.create(base + ".ffn.w1", d, cfg.d_ff, kWeightInit, rng);
    layer.b1 = &store.create_const(base + ".ffn.b1", 1, cfg.d_ff, 0.0);
    layer.w2 = &store.create(base + ".ffn.w2", cfg.d_ff, d, kWeightInit, rng);
    layer.b2 = &store.create_const(base + ".ffn.b2", 1, d, 0.0);
    dec_.push_back(layer);
  }
  dec_final_ = make_norm("dec.final_ln");
}

ad::Expr Transformer::embed(ad::Tape& tape, const std::vector<int>& ids, ad::Param* pos_table,
                            bool train, std::mt19937_64& rng) const {
  for (int id : ids)
    if (id < 0 || id >= cfg_.vocab_size)
      throw NumericError("token id out of vocabulary range: " + std::to_string(id));
  if (static_cast<int>(ids.size()) > cfg_.max_positions)
    throw ConfigError("sequence longer than max_positions");
  std::vector<int> pos(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) pos[i] = static_cast<int>(i);
  ad::Expr x = tape.add(tape.gather_rows(tape.leaf(*embedding_), ids),
                        tape.gather_rows(tape.leaf(*pos_table), pos));
  return tape.dropout(x, cfg_.dropout, rng, train);
}

ad::Expr Transformer::attention(ad::Tape& tape, const Attention& p, ad::Expr q_in,
                                ad::Expr kv_in, const ad::Mat* additive_mask, bool train,
                                std::mt19937_64& rng) const {
  const int d = cfg_.d_model;
  const int dh = d / cfg_.heads;
  ad::Expr q = tape.add_row(tape.matmul(q_in, tape.leaf(*p.wq)), tape.leaf(*p.bq));
  ad::Expr k = tape.add_row(tape.matmul(kv_in, tape.leaf(*p.wk)), tape.leaf(*p.bk));
  ad::Expr v = tape.add_row(tape.matmul(kv_in, tape.leaf(*p.wv)), tape.leaf(*p.bv));
  std::vector<ad::Expr> ctx;
  for (int h = 0; h < cfg_.heads; ++h) {
    ad::Expr qh = tape.cols(q, h * dh, dh);
    ad::Expr kh = tape.cols(k, h * dh, dh);
    ad::Expr vh = tape.cols(v, h * dh, dh);
    ad::Expr scores = tape.scale(tape.matmul_nt(qh, kh), 1.0 / std::sqrt(double(dh)));
    if (additive_mask) scores = tape.add(scores, tape.constant(*additive_mask));
    ctx.push_back(tape.matmul(tape.softmax_rows(scores), vh));
  }
  ad::Expr cat = cfg_.heads == 1 ? ctx.front() : tape.hcat(ctx);
  ad::Expr out = tape.add_row(tape.matmul(cat, tape.leaf(*p.wo)), tape.leaf(*p.bo));
  return tape.dropout(out, cfg_.dropout, rng, train);
}

ad::Expr Transformer::enc_layer(ad::Tape& tape, const EncLayer& l, ad::Expr x, bool train,
                                std::mt19937_64& rng) const {
  ad::Expr h = tape.layer_norm(x, tape.leaf(*l.ln1.g), tape.leaf(*l.ln1.b));
  x = tape.add(x, attention(tape, l.attn, h, h, nullptr, train, rng));
  ad::Expr h2 = tape.layer_norm(x, tape.leaf(*l.ln2.g), tape.leaf(*l.ln2.b));
  ad::Expr f = tape.add_row(
      tape.matmul(tape.relu(tape.add_row(tape.matmul(h2, tape.leaf(*l.w1)), tape.leaf(*l.b1))),
                  tape.leaf(*l.w2)),
      tape.leaf(*l.b2));
  return tape.add(x, tape.dropout(f, cfg_.dropout, rng, train));
}

HiddenBlock Transformer::encode_lower(ad::Tape& tape, const std::vector<EncodedSequence>& seqs,
                                      bool train, std::mt19937_64& rng) const {
  HiddenBlock blocks;
  for (const auto& seq : seqs) {
    ad::Expr x = embed(tape, seq.token_ids, pos_enc_, train, rng);
    for (int l = 0; l < cfg_.fusion_layer; ++l) x = enc_layer(tape, enc_[l], x, train, rng);
    blocks.push_back(x);
  }
  return blocks;
}

HiddenBlock Transformer::encode_upper(ad::Tape& tape, const HiddenBlock& fused, bool train,
                                      std::mt19937_64& rng) const {
  HiddenBlock out;
  for (ad::Expr x : fused) {
    if (x.cols() != cfg_.d_model) throw NumericError("encode_upper: block width mismatch");
    for (int l = cfg_.fusion_layer; l < cfg_.enc_layers; ++l)
      x = enc_layer(tape, enc_[l], x, train, rng);
    out.push_back(tape.layer_norm(x, tape.leaf(*enc_final_.g), tape.leaf(*enc_final_.b)));
  }
  return out;
}

ad::Expr Transformer::decoder_hidden(ad::Tape& tape, ad::Expr enc_concat,
                                     const std::vector<int>& input_ids, bool train,
                                     std::mt19937_64& rng) const {
  const Eigen::Index t = static_cast<Eigen::Index>(input_ids.size());
  ad::Mat causal = ad::Mat::Zero(t, t);
  for (Eigen::Index r = 0; r < t; ++r)
    for (Eigen::Index c = r + 1; c < t; ++c) causal(r, c) = -1e30;
  ad::Expr x = embed(tape, input_ids, pos_dec_, train, rng);
  for (const auto& l : dec_) {
    ad::Expr h = tape.layer_norm(x, tape.leaf(*l.ln1.g), tape.leaf(*l.ln1.b));
    x = tape.add(x, attention(tape, l.self_attn, h, h, &causal, train, rng));
    ad::Expr h2 = tape.layer_norm(x, tape.leaf(*l.ln2.g), tape.leaf(*l.ln2.b));
    x = tape.add(x, attention(tape, l.cross_attn, h2, enc_concat, nullptr, train, rng));
    ad::Expr h3 = tape.layer_norm(x, tape.leaf(*l.ln3.g), tape.leaf(*l.ln3.b));
    ad::Expr f = tape.add_row(
        tape.matmul(
            tape.relu(tape.add_row(tape.matmul(h3, tape.leaf(*l.w1)), tape.leaf(*l.b1))),
            tape.leaf(*l.w2)),
        tape.leaf(*l.b2));
    x = tape.add(x, tape.dropout(f, cfg_.dropout, rng, train));
  }
  return tape.layer_norm(x, tape.leaf(*dec_final_.g), tape.leaf(*dec_final_.b));
}

ad::Expr Transformer::decode_logits(ad::Tape& tape, ad::Expr enc_concat,
                                    const std::vector<int>& target_ids, bool train,
                                    std::mt19937_64& rng) const {
  std::vector<int> input(target_ids.size());
  input[0] = Vocabulary::kBos;
  for (size_t i = 1; i < target_ids.size(); ++i) input[i] = target_ids[i - 1];
  ad::Expr h = decoder_hidden(tape, enc_concat, input, train, rng);
  return tape.matmul_nt(h, tape.leaf(*lm_head_));
}

std::vector<int> Transformer::generate(ad::Tape& tape, ad::Expr enc_concat, int max_out_len,
                                       DecodeStrategy strategy, int beam_width) const {
  if (max_out_len <= 0) throw ConfigError("max_out_len must be positive");
  if (strategy == DecodeStrategy::Greedy) beam_width = 1;
  if (beam_width <= 0) throw ConfigError("beam width must be positive");
  std::mt19937_64 rng(0);  // inference runs without dropout

  struct Beam {
    std::vector<int> ids;  // without the leading bos
    double logp = 0.0;
    bool done = false;
  };
  std::vector<Beam> beams{Beam{}};

  for (int step = 0; step < max_out_len; ++step) {
    bool all_done = true;
    std::vector<Beam> candidates;
    for (const Beam& beam : beams) {
      if (beam.done) {
        candidates.push_back(beam);
        continue;
      }
      all_done = false;
      std::vector<int> input{Vocabulary::kBos};
      input.insert(input.end(), beam.ids.begin(), beam.ids.end());
      ad::Expr h = decoder_hidden(tape, enc_concat, input, false, rng);
      ad::Mat logits = (h.val().bottomRows(1) * lm_head_->value.transpose());
      // log softmax of the final position
      double mx = logits.maxCoeff();
      ad::Mat ex = (logits.array() - mx).exp();
      double lse = mx + std::log(ex.sum());
      // keep the top beam_width continuations, ties to the lower token id
      std::vector<int> order(static_cast<size_t>(logits.cols()));
      for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      std::partial_sort(order.begin(),
                        order.begin() + std::min<size_t>(order.size(), beam_width),
                        order.end(), [&](int a, int b) {
                          if (logits(0, a) != logits(0, b)) return logits(0, a) > logits(0, b);
                          return a < b;
                        });
      for (int k = 0; k < beam_width && k < static_cast<int>(order.size()); ++k) {
        Beam next = beam;
        int tok = order[static_cast<size_t>(k)];
        next.logp += logits(0, tok) - lse;
        if (tok == Vocabulary::kEos) {
          next.done = true;
        } else {
          next.ids.push_back(tok);
          if (static_cast<int>(next.ids.size()) >= max_out_len) next.done = true;
        }
        candidates.push_back(std::move(next));
      }
    }
    if (all_done) break;
    std::stable_sort(candidates.begin(), candidates.end(), [](const Beam& a, const Beam& b) {
      if (a.logp != b.logp) return a.logp > b.logp;
      return a.ids < b.ids;
    });
    if (static_cast<int>(candidates.size()) > beam_width) candidates.resize(beam_width);
    beams = std::move(candidates);
  }
  return beams.front().ids;
}

QaModel::QaModel(const ModelConfig& cfg, const GnnConfig& gnn, ModelMode mode, uint64_t seed)
    : cfg_(cfg), gnn_cfg_(gnn), mode_(mode) {
  std::mt19937_64 rng(seed);
  transformer_ = std::make_unique<Transformer>(cfg, store_, rng);
  if (mode == ModelMode::SeqGraph)
    gat_ = std::make_unique<gat::Network>(cfg.d_model, gnn, store_, rng);
}

HiddenBlock QaModel::encode_blocks(ad::Tape& tape, const std::vector<EncodedSequence>& seqs,
                                   const LocalGraph* graph, bool train,
                                   std::mt19937_64& rng) const {
  HiddenBlock lower = transformer_->encode_lower(tape, seqs, train, rng);
  const bool fuse = mode_ == ModelMode::SeqGraph && gat_ && graph && !graph->nodes.empty();
  if (fuse) {
    gat::NodeState nodes = gat::init_nodes(tape, lower, *graph, seqs);
    ad::Expr node_out = gat_->propagate(tape, nodes, *graph, train, rng);
    for (size_t i = 0; i < lower.size(); ++i)
      lower[i] = gat::scatter_fuse(tape, lower[i], node_out, seqs[i]);
  }
  return transformer_->encode_upper(tape, lower, train, rng);
}

ad::Expr QaModel::encode(ad::Tape& tape, const std::vector<EncodedSequence>& seqs,
                         const LocalGraph* graph, bool train, std::mt19937_64& rng) const {
  return tape.vstack(encode_blocks(tape, seqs, graph, train, rng));
}

ad::Expr QaModel::loss(ad::Tape& tape, const std::vector<EncodedSequence>& seqs,
                       const LocalGraph* graph, const std::vector<int>& target_ids,
                       bool train, std::mt19937_64& rng) const {
  ad::Expr enc = encode(tape, seqs, graph, train, rng);
  ad::Expr logits = transformer_->decode_logits(tape, enc, target_ids, train, rng);
  std::vector<double> mask(target_ids.size(), 1.0);
  for (size_t i = 0; i < target_ids.size(); ++i)
    if (target_ids[i] == Vocabulary::kPad) mask[i] = 0.0;
  return tape.cross_entropy(logits, target_ids, std::move(mask));
}

std::vector<int> QaModel::predict(const std::vector<EncodedSequence>& seqs,
                                  const LocalGraph* graph, int max_out_len,
                                  DecodeStrategy strategy, int beam_width) const {
  ad::Tape tape;
  std::mt19937_64 rng(0);
  ad::Expr enc = encode(tape, seqs, graph, false, rng);
  return transformer_->generate(tape, enc, max_out_len, strategy, beam_width);
}

namespace {
constexpr char kMagic[9] = "SGCKPT01";
}

void QaModel::save(const std::string& path, const Vocabulary& vocab) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  json header;
  header["model"] = {{"d_model", cfg_.d_model},        {"enc_layers", cfg_.enc_layers},
                     {"dec_layers", cfg_.dec_layers},  {"heads", cfg_.heads},
                     {"d_ff", cfg_.d_ff},              {"fusion_layer", cfg_.fusion_layer},
                     {"dropout", cfg_.dropout},        {"vocab_size", cfg_.vocab_size},
                     {"max_positions", cfg_.max_positions}, {"max_out_len", cfg_.max_out_len}};
  header["gnn"] = {{"layers", gnn_cfg_.layers},
                   {"heads", gnn_cfg_.heads},
                   {"dropout", gnn_cfg_.dropout},
                   {"leaky_slope", gnn_cfg_.leaky_slope},
                   {"add_reverse_edges", gnn_cfg_.add_reverse_edges},
                   {"add_self_loops", gnn_cfg_.add_self_loops}};
  header["mode"] = mode_name(mode_);
  std::ostringstream vtext;
  vocab.serialize(vtext);
  header["vocabulary"] = vtext.str();
  std::string htext = header.dump();

  out.write(kMagic, 8);
  uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(hlen));

  auto params = store_.all();
  uint64_t count = params.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const ad::Param* p : params) {
    uint32_t nlen = static_cast<uint32_t>(p->name.size());
    out.write(reinterpret_cast<const char*>(&nlen), sizeof(nlen));
    out.write(p->name.data(), nlen);
    uint64_t rows = static_cast<uint64_t>(p->value.rows());
    uint64_t cols = static_cast<uint64_t>(p->value.cols());
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(sizeof(double) * p->value.size()));
  }
}

QaModel::Loaded QaModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != std::string(kMagic, 8))
    throw ParseError("not a checkpoint file (bad magic): " + path);
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  json header = json::parse(htext);

  ModelConfig cfg;
  const json& m = header.at("model");
  cfg.d_model = m.at("d_model");
  cfg.enc_layers = m.at("enc_layers");
  cfg.dec_layers = m.at("dec_layers");
  cfg.heads = m.at("heads");
  cfg.d_ff = m.at("d_ff");
  cfg.fusion_layer = m.at("fusion_layer");
  cfg.dropout = m.at("dropout");
  cfg.vocab_size = m.at("vocab_size");
  cfg.max_positions = m.at("max_positions");
  cfg.max_out_len = m.at("max_out_len");
  GnnConfig gnn;
  const json& g = header.at("gnn");
  gnn.layers = g.at("layers");
  gnn.heads = g.at("heads");
  gnn.dropout = g.at("dropout");
  gnn.leaky_slope = g.at("leaky_slope");
  gnn.add_reverse_edges = g.at("add_reverse_edges");
  gnn.add_self_loops = g.at("add_self_loops");
  ModelMode mode = mode_from_name(header.at("mode"));

  Loaded result{std::make_unique<QaModel>(cfg, gnn, mode, 0),
                [&header]() {
                  std::istringstream vin(header.at("vocabulary").get<std::string>());
                  return Vocabulary::deserialize(vin);
                }()};

  uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t nlen = 0;
    in.read(reinterpret_cast<char*>(&nlen), sizeof(nlen));
    std::string name(nlen, '\0');
    in.read(name.data(), nlen);
    uint64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    ad::Param* p = result.model->store_.find(name);
    if (!p) throw ParseError("checkpoint parameter '" + name + "' not in model");
    if (p->value.rows() != static_cast<Eigen::Index>(rows) ||
        p->value.cols() != static_cast<Eigen::Index>(cols))
      throw ParseError("checkpoint parameter '" + name + "' has mismatched shape");
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
    if (!in) throw ParseError("truncated checkpoint: " + path);
  }
  return result;
}

}  // namespace seqgraph
