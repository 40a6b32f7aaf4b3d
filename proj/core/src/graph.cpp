#include "seqgraph/graph.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace seqgraph {

std::string normalize_title(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

LocalGraph build_local_graph(const QuestionInstance& inst) {
  LocalGraph g;
  const int n_passages = static_cast<int>(inst.passages.size());
  for (int pi = 0; pi < n_passages; ++pi) {
    GraphNode node;
    node.kind = NodeKind::PassageTitle;
    node.passage_idx = pi;
    node.label = normalize_title(inst.passages[pi].title);
    g.nodes.push_back(std::move(node));
  }
  for (int pi = 0; pi < n_passages; ++pi) {
    // one node per occurrence, in (sentence, char_start) order
    std::vector<EntitySpan> spans = inst.passages[pi].entity_spans;
    std::stable_sort(spans.begin(), spans.end(), [](const EntitySpan& a, const EntitySpan& b) {
      return std::tie(a.sentence_idx, a.char_start, a.char_end) <
             std::tie(b.sentence_idx, b.char_start, b.char_end);
    });
    for (const auto& span : spans) {
      GraphNode node;
      node.kind = NodeKind::EntitySpan;
      node.passage_idx = pi;
      node.sentence_idx = span.sentence_idx;
      node.char_start = span.char_start;
      node.char_end = span.char_end;
      const std::string& sent = inst.passages[pi].sentences[span.sentence_idx];
      node.label = sent.substr(span.char_start, span.char_end - span.char_start);
      int src = static_cast<int>(g.nodes.size());
      g.nodes.push_back(node);
      // one edge per passage whose normalized title equals the target;
      // duplicate titles get distinct links, unresolvable targets get none
      std::string target = normalize_title(span.target_title);
      for (int pj = 0; pj < n_passages; ++pj) {
        if (g.nodes[pj].label == target) g.edges.emplace_back(src, pj);
      }
    }
  }
  return g;
}

std::string dump_edge_list(const LocalGraph& g) {
  std::ostringstream out;
  for (const auto& [src, dst] : g.edges) {
    out << g.nodes[src].label << "@p" << g.nodes[src].passage_idx << " -> "
        << g.nodes[dst].label << "@p" << g.nodes[dst].passage_idx << "\n";
  }
  return out.str();
}

}  // namespace seqgraph
