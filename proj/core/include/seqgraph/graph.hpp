#pragma once

#include <string>
#include <utility>
#include <vector>

#include "seqgraph/corpus.hpp"

namespace seqgraph {

enum class NodeKind { EntitySpan, PassageTitle };

struct GraphNode {
  NodeKind kind = NodeKind::PassageTitle;
  int passage_idx = 0;
  // EntitySpan: position of the annotated span inside its passage.
  int sentence_idx = -1;
  int char_start = -1;
  int char_end = -1;
  std::string label;  // normalized surface / title text
};

// Directed entity->title graph over one question's passages. Node order is
// deterministic: one PassageTitle node per passage (passage order), then
// EntitySpan nodes in (passage, sentence, char_start) order.
struct LocalGraph {
  std::vector<GraphNode> nodes;
  std::vector<std::pair<int, int>> edges;  // (src EntitySpan idx, dst PassageTitle idx)

  int title_node(int passage_idx) const { return passage_idx; }
};

// Case-folds, collapses runs of whitespace and strips the ends. Idempotent.
std::string normalize_title(const std::string& text);

LocalGraph build_local_graph(const QuestionInstance& instance);

// Plain-text edge list: "<entity label>@p<i> -> <title>@p<j>" per line.
std::string dump_edge_list(const LocalGraph& graph);

}  // namespace seqgraph
