#include "seqgraph/fusion.hpp"

#include <algorithm>
#include <set>

#include "seqgraph/corpus.hpp"

namespace seqgraph {

void GnnConfig::check() const {
  if (layers < 1) throw ConfigError("GNN needs at least one layer");
  if (heads < 1) throw ConfigError("GNN needs at least one attention head");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("GNN dropout must lie in [0, 1)");
}

namespace gat {

NodeState init_nodes(ad::Tape& tape, const std::vector<ad::Expr>& blocks,
                     const LocalGraph& graph, const std::vector<EncodedSequence>& seqs) {
  if (blocks.size() != seqs.size())
    throw NumericError("init_nodes: block/sequence count mismatch");
  const Eigen::Index d = blocks.empty() ? 0 : blocks.front().cols();
  NodeState state;
  state.active.assign(graph.nodes.size(), false);
  std::vector<ad::Expr> rows;
  rows.reserve(graph.nodes.size());
  for (int ni = 0; ni < static_cast<int>(graph.nodes.size()); ++ni) {
    const GraphNode& node = graph.nodes[ni];
    const ad::Expr* found = nullptr;
    std::pair<int, int> range{};
    for (size_t si = 0; si < seqs.size(); ++si) {
      if (seqs[si].passage_idx != node.passage_idx) continue;
      auto it = seqs[si].spans.find(ni);
      if (it != seqs[si].spans.end()) {
        found = &blocks[si];
        range = it->second;
      }
      break;
    }
    if (!found) {
      rows.push_back(tape.zeros(1, d));
      continue;
    }
    auto [a, b] = range;
    if (b >= found->rows())
      throw NumericError("init_nodes: span exceeds block bounds");
    state.active[ni] = true;
    rows.push_back(tape.mean_rows(tape.rows(*found, a, b - a + 1)));
  }
  state.matrix = tape.vstack(rows);
  return state;
}

Network::Network(int d_model, const GnnConfig& cfg, ad::ParamStore& store,
                 std::mt19937_64& rng)
    : d_model_(d_model), cfg_(cfg) {
  cfg.check();
  if (d_model % cfg.heads != 0)
    throw ConfigError("d_model must be divisible by GNN head count");
  const int d_head = d_model / cfg.heads;
  for (int l = 0; l < cfg.layers; ++l) {
    Layer layer;
    for (int h = 0; h < cfg.heads; ++h) {
      std::string base = "gat." + std::to_string(l) + "." + std::to_string(h) + ".";
      Layer::Head head;
      head.w = &store.create(base + "w", d_model, d_head, 0.1, rng);
      head.a_src = &store.create(base + "a_src", d_head, 1, 0.1, rng);
      head.a_dst = &store.create(base + "a_dst", d_head, 1, 0.1, rng);
      layer.heads.push_back(head);
    }
    layers_.push_back(std::move(layer));
  }
}

std::vector<std::pair<int, int>> Network::message_edges(const LocalGraph& graph,
                                                        const std::vector<bool>& active) const {
  std::set<std::pair<int, int>> edges;
  for (const auto& [src, dst] : graph.edges) {
    if (active[src]) edges.insert({src, dst});
    if (cfg_.add_reverse_edges && active[dst]) edges.insert({dst, src});
  }
  if (cfg_.add_self_loops) {
    for (int n = 0; n < static_cast<int>(graph.nodes.size()); ++n)
      if (active[n]) edges.insert({n, n});
  }
  // sorted by (dst, src) so edges with a shared receiver are contiguous
  std::vector<std::pair<int, int>> out(edges.begin(), edges.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.second, a.first) < std::tie(b.second, b.first);
  });
  return out;
}

ad::Expr Network::layer_forward(ad::Tape& tape, const Layer& layer, ad::Expr h,
                                const std::vector<std::pair<int, int>>& edges,
                                const std::vector<int>& seg, int n_nodes, bool last,
                                bool train, std::mt19937_64& rng,
                                std::vector<ad::Expr>* coeff_out) const {
  std::vector<int> srcs, dsts;
  srcs.reserve(edges.size());
  dsts.reserve(edges.size());
  for (const auto& [s, d] : edges) {
    srcs.push_back(s);
    dsts.push_back(d);
  }
  std::vector<ad::Expr> head_out;
  for (const auto& head : layer.heads) {
    ad::Expr wh = tape.matmul(h, tape.leaf(*head.w));
    ad::Expr out;
    if (edges.empty()) {
      out = tape.zeros(n_nodes, wh.cols());
      if (coeff_out) coeff_out->push_back(tape.zeros(0, 1));
    } else {
      ad::Expr s_src = tape.matmul(wh, tape.leaf(*head.a_src));
      ad::Expr s_dst = tape.matmul(wh, tape.leaf(*head.a_dst));
      ad::Expr scores = tape.add(tape.gather_rows(s_src, srcs), tape.gather_rows(s_dst, dsts));
      ad::Expr alpha = tape.segment_softmax(tape.leaky_relu(scores, cfg_.leaky_slope), seg);
      if (coeff_out) coeff_out->push_back(alpha);
      out = tape.edge_weighted_sum(alpha, wh, edges, n_nodes);
    }
    head_out.push_back(out);
  }
  ad::Expr cat = layer.heads.size() == 1 ? head_out.front() : tape.hcat(head_out);
  if (!last) cat = tape.elu(cat);
  if (train) cat = tape.dropout(cat, cfg_.dropout, rng, true);
  return cat;
}

ad::Expr Network::propagate(ad::Tape& tape, const NodeState& nodes, const LocalGraph& graph,
                            bool train, std::mt19937_64& rng) const {
  auto edges = message_edges(graph, nodes.active);
  std::vector<int> seg;
  seg.reserve(edges.size());
  for (const auto& e : edges) seg.push_back(e.second);
  const int n = static_cast<int>(graph.nodes.size());
  ad::Expr h = nodes.matrix;
  for (size_t l = 0; l < layers_.size(); ++l)
    h = layer_forward(tape, layers_[l], h, edges, seg, n, l + 1 == layers_.size(), train,
                      rng, nullptr);
  return h;
}

std::vector<ad::Mat> Network::attention_coefficients(ad::Tape& tape, const NodeState& nodes,
                                                     const LocalGraph& graph) const {
  auto edges = message_edges(graph, nodes.active);
  std::vector<int> seg;
  for (const auto& e : edges) seg.push_back(e.second);
  const int n = static_cast<int>(graph.nodes.size());
  std::mt19937_64 rng(0);
  ad::Expr h = nodes.matrix;
  std::vector<ad::Expr> coeffs;
  for (size_t l = 0; l < layers_.size(); ++l)
    h = layer_forward(tape, layers_[l], h, edges, seg, n, l + 1 == layers_.size(), false,
                      rng, &coeffs);
  std::vector<ad::Mat> out;
  for (const ad::Expr& alpha : coeffs) {
    ad::Mat table(alpha.rows(), 3);
    for (Eigen::Index e = 0; e < alpha.rows(); ++e) {
      table(e, 0) = edges[static_cast<size_t>(e)].first;
      table(e, 1) = edges[static_cast<size_t>(e)].second;
      table(e, 2) = alpha.val()(e, 0);
    }
    out.push_back(std::move(table));
  }
  return out;
}

ad::Expr scatter_fuse(ad::Tape& tape, ad::Expr block, ad::Expr node_out,
                      const EncodedSequence& seq) {
  std::vector<std::tuple<int, int, int>> spans;
  for (const auto& [node_idx, range] : seq.spans) {
    if (range.second >= block.rows())
      throw NumericError("scatter_fuse: span exceeds block length");
    spans.emplace_back(node_idx, range.first, range.second);
  }
  if (spans.empty()) return block;
  return tape.scatter_spans(block, node_out, std::move(spans));
}

}  // namespace gat
}  // namespace seqgraph
