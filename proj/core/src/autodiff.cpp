#include "seqgraph/autodiff.hpp"

#include <cmath>

#include "seqgraph/corpus.hpp"

namespace seqgraph::ad {

const Mat& Expr::val() const { return tape_->val(*this); }

Param& ParamStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                          double init_scale, std::mt19937_64& rng, bool decay) {
  Mat m(rows, cols);
  std::normal_distribution<double> normal(0.0, init_scale);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
  params_.push_back(std::make_unique<Param>(name, std::move(m), decay));
  return *params_.back();
}

Param& ParamStore::create_const(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                                double fill, bool decay) {
  params_.push_back(std::make_unique<Param>(name, Mat::Constant(rows, cols, fill), decay));
  return *params_.back();
}

std::vector<Param*> ParamStore::all() const {
  std::vector<Param*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

Param* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

size_t ParamStore::total_size() const {
  size_t n = 0;
  for (const auto& p : params_) n += static_cast<size_t>(p->value.size());
  return n;
}

size_t ParamStore::total_size_with_prefix(const std::string& prefix) const {
  size_t n = 0;
  for (const auto& p : params_)
    if (p->name.rfind(prefix, 0) == 0) n += static_cast<size_t>(p->value.size());
  return n;
}

void ParamStore::zero_grads() {
  for (const auto& p : params_) p->zero_grad();
}

Expr Tape::emit(Mat val, bool needs_grad, std::function<void()> back) {
  Node node;
  node.val = std::move(val);
  node.needs_grad = needs_grad;
  node.back = std::move(back);
  if (needs_grad) node.grad = Mat::Zero(node.val.rows(), node.val.cols());
  nodes_.push_back(std::move(node));
  return Expr(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::clear() { nodes_.clear(); }

void Tape::backward(Expr loss) {
  if (val(loss).size() != 1) throw NumericError("backward() requires a scalar loss");
  grad(loss)(0, 0) = 1.0;
  for (int i = loss.idx_; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.needs_grad && n.back) n.back();
  }
}

Expr Tape::leaf(Param& p) {
  Expr e = emit(p.value, true);
  at(e).back = [this, e, &p]() { p.grad += grad(e); };
  return e;
}

Expr Tape::constant(Mat m) { return emit(std::move(m), false); }

Expr Tape::add(Expr a, Expr b) {
  Expr e = emit(val(a) + val(b), needs(a) || needs(b));
  at(e).back = [this, e, a, b]() {
    if (needs(a)) grad(a) += grad(e);
    if (needs(b)) grad(b) += grad(e);
  };
  return e;
}

Expr Tape::sub(Expr a, Expr b) {
  Expr e = emit(val(a) - val(b), needs(a) || needs(b));
  at(e).back = [this, e, a, b]() {
    if (needs(a)) grad(a) += grad(e);
    if (needs(b)) grad(b) -= grad(e);
  };
  return e;
}

Expr Tape::mul(Expr a, Expr b) {
  Expr e = emit(val(a).cwiseProduct(val(b)), needs(a) || needs(b));
  at(e).back = [this, e, a, b]() {
    if (needs(a)) grad(a) += grad(e).cwiseProduct(val(b));
    if (needs(b)) grad(b) += grad(e).cwiseProduct(val(a));
  };
  return e;
}

Expr Tape::scale(Expr a, double s) {
  Expr e = emit(val(a) * s, needs(a));
  at(e).back = [this, e, a, s]() {
    if (needs(a)) grad(a) += grad(e) * s;
  };
  return e;
}

Expr Tape::matmul(Expr a, Expr b) {
  Expr e = emit(val(a) * val(b), needs(a) || needs(b));
  at(e).back = [this, e, a, b]() {
    if (needs(a)) grad(a) += grad(e) * val(b).transpose();
    if (needs(b)) grad(b) += val(a).transpose() * grad(e);
  };
  return e;
}

Expr Tape::matmul_nt(Expr a, Expr b) {
  Expr e = emit(val(a) * val(b).transpose(), needs(a) || needs(b));
  at(e).back = [this, e, a, b]() {
    if (needs(a)) grad(a) += grad(e) * val(b);
    if (needs(b)) grad(b) += grad(e).transpose() * val(a);
  };
  return e;
}

Expr Tape::add_row(Expr x, Expr bias) {
  Mat out = val(x);
  out.rowwise() += val(bias).row(0);
  Expr e = emit(std::move(out), needs(x) || needs(bias));
  at(e).back = [this, e, x, bias]() {
    if (needs(x)) grad(x) += grad(e);
    if (needs(bias)) grad(bias) += grad(e).colwise().sum();
  };
  return e;
}

Expr Tape::relu(Expr x) {
  Expr e = emit(val(x).cwiseMax(0.0), needs(x));
  at(e).back = [this, e, x]() {
    if (!needs(x)) return;
    grad(x) += grad(e).cwiseProduct((val(x).array() > 0.0).cast<double>().matrix());
  };
  return e;
}

Expr Tape::leaky_relu(Expr x, double slope) {
  Mat out = val(x).unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  Expr e = emit(std::move(out), needs(x));
  at(e).back = [this, e, x, slope]() {
    if (!needs(x)) return;
    Mat d = val(x).unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
    grad(x) += grad(e).cwiseProduct(d);
  };
  return e;
}

Expr Tape::elu(Expr x) {
  Mat out = val(x).unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
  Expr e = emit(std::move(out), needs(x));
  at(e).back = [this, e, x]() {
    if (!needs(x)) return;
    Mat d = val(x).unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
    grad(x) += grad(e).cwiseProduct(d);
  };
  return e;
}

Expr Tape::softmax_rows(Expr x) {
  Mat out = val(x);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    double mx = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  Expr e = emit(std::move(out), needs(x));
  at(e).back = [this, e, x]() {
    if (!needs(x)) return;
    const Mat& y = val(e);
    const Mat& dy = grad(e);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      double dot = dy.row(r).dot(y.row(r));
      grad(x).row(r) += (dy.row(r).array() - dot).matrix().cwiseProduct(y.row(r));
    }
  };
  return e;
}

Expr Tape::layer_norm(Expr x, Expr gamma, Expr beta, double eps) {
  const Mat& in = val(x);
  const Eigen::Index d = in.cols();
  Mat norm(in.rows(), d);
  Eigen::VectorXd inv_std(in.rows());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    double mean = in.row(r).mean();
    Eigen::RowVectorXd centered = in.row(r).array() - mean;
    double var = centered.squaredNorm() / static_cast<double>(d);
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    norm.row(r) = centered * inv_std(r);
  }
  Mat out = norm;
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    out.row(r) = out.row(r).cwiseProduct(val(gamma).row(0)) + val(beta).row(0);
  Expr e = emit(std::move(out), needs(x) || needs(gamma) || needs(beta));
  Mat norm_saved = std::move(norm);
  at(e).back = [this, e, x, gamma, beta, norm_saved, inv_std]() {
    const Mat& dy = grad(e);
    const Eigen::Index d = dy.cols();
    if (needs(gamma)) grad(gamma) += dy.cwiseProduct(norm_saved).colwise().sum();
    if (needs(beta)) grad(beta) += dy.colwise().sum();
    if (!needs(x)) return;
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
      Eigen::RowVectorXd dn = dy.row(r).cwiseProduct(val(gamma).row(0));
      double mean_dn = dn.mean();
      double mean_dn_n = dn.cwiseProduct(norm_saved.row(r)).mean();
      grad(x).row(r) +=
          inv_std(r) *
          (dn.array() - mean_dn - norm_saved.row(r).array() * mean_dn_n).matrix();
    }
  };
  return e;
}

Expr Tape::rows(Expr x, int first, int count) {
  Expr e = emit(val(x).middleRows(first, count), needs(x));
  at(e).back = [this, e, x, first, count]() {
    if (needs(x)) grad(x).middleRows(first, count) += grad(e);
  };
  return e;
}

Expr Tape::cols(Expr x, int first, int count) {
  Expr e = emit(val(x).middleCols(first, count), needs(x));
  at(e).back = [this, e, x, first, count]() {
    if (needs(x)) grad(x).middleCols(first, count) += grad(e);
  };
  return e;
}

Expr Tape::hcat(const std::vector<Expr>& xs) {
  Eigen::Index r = val(xs.front()).rows(), c = 0;
  bool ng = false;
  for (Expr x : xs) {
    c += val(x).cols();
    ng = ng || needs(x);
  }
  Mat out(r, c);
  Eigen::Index off = 0;
  for (Expr x : xs) {
    out.middleCols(off, val(x).cols()) = val(x);
    off += val(x).cols();
  }
  Expr e = emit(std::move(out), ng);
  std::vector<Expr> parts = xs;
  at(e).back = [this, e, parts]() {
    Eigen::Index off = 0;
    for (Expr x : parts) {
      if (needs(x)) grad(x) += grad(e).middleCols(off, val(x).cols());
      off += val(x).cols();
    }
  };
  return e;
}

Expr Tape::vstack(const std::vector<Expr>& xs) {
  Eigen::Index c = val(xs.front()).cols(), r = 0;
  bool ng = false;
  for (Expr x : xs) {
    r += val(x).rows();
    ng = ng || needs(x);
  }
  Mat out(r, c);
  Eigen::Index off = 0;
  for (Expr x : xs) {
    out.middleRows(off, val(x).rows()) = val(x);
    off += val(x).rows();
  }
  Expr e = emit(std::move(out), ng);
  std::vector<Expr> parts = xs;
  at(e).back = [this, e, parts]() {
    Eigen::Index off = 0;
    for (Expr x : parts) {
      if (needs(x)) grad(x) += grad(e).middleRows(off, val(x).rows());
      off += val(x).rows();
    }
  };
  return e;
}

Expr Tape::mean_rows(Expr x) {
  Expr e = emit(val(x).colwise().mean(), needs(x));
  at(e).back = [this, e, x]() {
    if (!needs(x)) return;
    double inv = 1.0 / static_cast<double>(val(x).rows());
    grad(x) += Eigen::VectorXd::Constant(val(x).rows(), inv) * grad(e).row(0);
  };
  return e;
}

Expr Tape::gather_rows(Expr x, std::vector<int> idx) {
  Mat out(static_cast<Eigen::Index>(idx.size()), val(x).cols());
  for (size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = val(x).row(idx[i]);
  Expr e = emit(std::move(out), needs(x));
  at(e).back = [this, e, x, idx = std::move(idx)]() {
    if (!needs(x)) return;
    for (size_t i = 0; i < idx.size(); ++i)
      grad(x).row(idx[i]) += grad(e).row(static_cast<Eigen::Index>(i));
  };
  return e;
}

Expr Tape::scatter_spans(Expr base, Expr nodes,
                         std::vector<std::tuple<int, int, int>> spans) {
  Mat out = val(base);
  for (const auto& [row, a, b] : spans)
    for (int t = a; t <= b; ++t) out.row(t) += val(nodes).row(row);
  Expr e = emit(std::move(out), needs(base) || needs(nodes));
  at(e).back = [this, e, base, nodes, spans = std::move(spans)]() {
    if (needs(base)) grad(base) += grad(e);
    if (!needs(nodes)) return;
    for (const auto& [row, a, b] : spans)
      for (int t = a; t <= b; ++t) grad(nodes).row(row) += grad(e).row(t);
  };
  return e;
}

Expr Tape::dropout(Expr x, double p, std::mt19937_64& rng, bool enabled) {
  if (!enabled || p <= 0.0) return x;
  Mat mask(val(x).rows(), val(x).cols());
  const double keep = 1.0 - p;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (Eigen::Index r = 0; r < mask.rows(); ++r)
    for (Eigen::Index c = 0; c < mask.cols(); ++c)
      mask(r, c) = uni(rng) < keep ? 1.0 / keep : 0.0;
  return mul(x, constant(std::move(mask)));
}

Expr Tape::segment_softmax(Expr scores, std::vector<int> seg) {
  const Mat& s = val(scores);
  int n_seg = 0;
  for (int g : seg) n_seg = std::max(n_seg, g + 1);
  std::vector<double> mx(static_cast<size_t>(n_seg), -1e300);
  for (size_t i = 0; i < seg.size(); ++i)
    mx[seg[i]] = std::max(mx[seg[i]], s(static_cast<Eigen::Index>(i), 0));
  Mat out(s.rows(), 1);
  std::vector<double> denom(static_cast<size_t>(n_seg), 0.0);
  for (size_t i = 0; i < seg.size(); ++i) {
    out(static_cast<Eigen::Index>(i), 0) = std::exp(s(static_cast<Eigen::Index>(i), 0) - mx[seg[i]]);
    denom[seg[i]] += out(static_cast<Eigen::Index>(i), 0);
  }
  for (size_t i = 0; i < seg.size(); ++i) out(static_cast<Eigen::Index>(i), 0) /= denom[seg[i]];
  Expr e = emit(std::move(out), needs(scores));
  at(e).back = [this, e, scores, seg = std::move(seg), n_seg]() {
    if (!needs(scores)) return;
    const Mat& y = val(e);
    const Mat& dy = grad(e);
    std::vector<double> dot(static_cast<size_t>(n_seg), 0.0);
    for (size_t i = 0; i < seg.size(); ++i)
      dot[seg[i]] += dy(static_cast<Eigen::Index>(i), 0) * y(static_cast<Eigen::Index>(i), 0);
    for (size_t i = 0; i < seg.size(); ++i) {
      auto r = static_cast<Eigen::Index>(i);
      grad(scores)(r, 0) += (dy(r, 0) - dot[seg[i]]) * y(r, 0);
    }
  };
  return e;
}

Expr Tape::edge_weighted_sum(Expr alpha, Expr h, std::vector<std::pair<int, int>> edges,
                             int n_out) {
  Mat out = Mat::Zero(n_out, val(h).cols());
  for (size_t ei = 0; ei < edges.size(); ++ei)
    out.row(edges[ei].second) += val(alpha)(static_cast<Eigen::Index>(ei), 0) * val(h).row(edges[ei].first);
  Expr e = emit(std::move(out), needs(alpha) || needs(h));
  at(e).back = [this, e, alpha, h, edges = std::move(edges)]() {
    for (size_t ei = 0; ei < edges.size(); ++ei) {
      auto r = static_cast<Eigen::Index>(ei);
      const auto& [src, dst] = edges[ei];
      if (needs(alpha)) grad(alpha)(r, 0) += grad(e).row(dst).dot(val(h).row(src));
      if (needs(h)) grad(h).row(src) += val(alpha)(r, 0) * grad(e).row(dst);
    }
  };
  return e;
}

Expr Tape::cross_entropy(Expr logits, std::vector<int> targets, std::vector<double> mask) {
  const Mat& z = val(logits);
  if (static_cast<Eigen::Index>(targets.size()) != z.rows())
    throw NumericError("cross_entropy: target length does not match logit rows");
  double total_mask = 0.0;
  for (double m : mask) total_mask += m;
  Mat probs(z.rows(), z.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    double mx = z.row(r).maxCoeff();
    probs.row(r) = (z.row(r).array() - mx).exp();
    double sum = probs.row(r).sum();
    probs.row(r) /= sum;
    if (mask[static_cast<size_t>(r)] > 0.0)
      loss -= mask[static_cast<size_t>(r)] *
              (z(r, targets[static_cast<size_t>(r)]) - mx - std::log(sum));
  }
  const double denom = total_mask > 0.0 ? total_mask : 1.0;
  loss /= denom;
  Expr e = emit(Mat::Constant(1, 1, loss), needs(logits));
  Mat probs_saved = std::move(probs);
  at(e).back = [this, e, logits, targets = std::move(targets), mask = std::move(mask),
                probs_saved, denom]() {
    if (!needs(logits)) return;
    double g = grad(e)(0, 0) / denom;
    for (Eigen::Index r = 0; r < probs_saved.rows(); ++r) {
      double m = mask[static_cast<size_t>(r)];
      if (m <= 0.0) continue;
      grad(logits).row(r) += g * m * probs_saved.row(r);
      grad(logits)(r, targets[static_cast<size_t>(r)]) -= g * m;
    }
  };
  return e;
}

}  // namespace seqgraph::ad
