#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace seqgraph::ad {

using Mat = Eigen::MatrixXd;

struct Param {
  std::string name;
  Mat value;
  Mat grad;
  bool decay = true;  // false for biases and normalization parameters

  Param(std::string n, Mat v, bool d = true)
      : name(std::move(n)), value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())),
        decay(d) {}
  void zero_grad() { grad.setZero(); }
};

class Tape;

// Named parameter registry shared by the transformer and the GNN.
class ParamStore {
 public:
  Param& create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                double init_scale, std::mt19937_64& rng, bool decay = true);
  Param& create_const(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                      double fill, bool decay = false);
  std::vector<Param*> all() const;
  Param* find(const std::string& name) const;
  size_t total_size() const;
  size_t total_size_with_prefix(const std::string& prefix) const;
  void zero_grads();

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

// Handle to a node on the tape. Valid until Tape::clear().
class Expr {
 public:
  Expr() = default;
  const Mat& val() const;
  Eigen::Index rows() const { return val().rows(); }
  Eigen::Index cols() const { return val().cols(); }

 private:
  Expr(Tape* t, int i) : tape_(t), idx_(i) {}
  Tape* tape_ = nullptr;
  int idx_ = -1;
  friend class Tape;
};

// Reverse-mode tape. Nodes are appended in forward order; backward() walks
// them in reverse. All values are double precision.
class Tape {
 public:
  Expr leaf(Param& p);
  Expr constant(Mat m);
  Expr zeros(Eigen::Index r, Eigen::Index c) { return constant(Mat::Zero(r, c)); }

  Expr add(Expr a, Expr b);
  Expr sub(Expr a, Expr b);
  Expr mul(Expr a, Expr b);  // elementwise
  Expr scale(Expr a, double s);
  Expr matmul(Expr a, Expr b);
  Expr matmul_nt(Expr a, Expr b);      // a * b^T
  Expr add_row(Expr x, Expr bias);     // bias: 1 x cols, broadcast over rows
  Expr relu(Expr x);
  Expr leaky_relu(Expr x, double slope);
  Expr elu(Expr x);
  Expr softmax_rows(Expr x);
  Expr layer_norm(Expr x, Expr gamma, Expr beta, double eps = 1e-6);
  Expr rows(Expr x, int first, int count);
  Expr cols(Expr x, int first, int count);
  Expr hcat(const std::vector<Expr>& xs);
  Expr vstack(const std::vector<Expr>& xs);
  Expr mean_rows(Expr x);  // 1 x d
  Expr gather_rows(Expr x, std::vector<int> idx);
  // base + node rows broadcast over token ranges; spans are (node_row, a, b)
  // with inclusive b. Overlapping spans sum.
  Expr scatter_spans(Expr base, Expr nodes, std::vector<std::tuple<int, int, int>> spans);
  Expr dropout(Expr x, double p, std::mt19937_64& rng, bool enabled);
  // softmax over groups of a column vector: entries sharing seg id normalize
  // together
  Expr segment_softmax(Expr scores, std::vector<int> seg);
  // out.row(dst) += alpha_e * h.row(src) over edges; out has n_out rows
  Expr edge_weighted_sum(Expr alpha, Expr h, std::vector<std::pair<int, int>> edges, int n_out);
  // mean token-level cross entropy with masking; 0 when everything is masked
  Expr cross_entropy(Expr logits, std::vector<int> targets, std::vector<double> mask);

  void backward(Expr loss);
  void clear();
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat val;
    Mat grad;
    std::function<void()> back;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;

  Expr emit(Mat val, bool needs_grad, std::function<void()> back = nullptr);
  Node& at(Expr e) { return nodes_[static_cast<size_t>(e.idx_)]; }
  Mat& grad(Expr e) { return nodes_[static_cast<size_t>(e.idx_)].grad; }
  const Mat& val(Expr e) const { return nodes_[static_cast<size_t>(e.idx_)].val; }
  bool needs(Expr e) const { return nodes_[static_cast<size_t>(e.idx_)].needs_grad; }

  friend class Expr;
};

}  // namespace seqgraph::ad
