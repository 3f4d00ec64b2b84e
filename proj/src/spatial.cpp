#include "clp/spatial.hpp"

#include <algorithm>
#include <cmath>

namespace clp {

namespace {

double leaky_relu(double x) { return x > 0 ? x : kLeakySlope * x; }
double leaky_relu_grad(double x) { return x > 0 ? 1.0 : kLeakySlope; }
double elu(double x) { return x > 0 ? x : std::expm1(x); }
double elu_grad(double x) { return x > 0 ? 1.0 : std::exp(x); }

// Softmax over a contiguous range, in place.
void softmax_inplace(std::span<double> v) {
  if (v.empty()) return;
  const double m = *std::max_element(v.begin(), v.end());
  double total = 0;
  for (double& x : v) {
    x = std::exp(x - m);
    total += x;
  }
  for (double& x : v) x /= total;
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double total = 0;
  for (double x : v) total += std::exp(x - m);
  return m + std::log(total);
}

Mat mean_weight(const NodeLevelParams& params) {
  Mat w = params.W.front();
  for (std::size_t k = 1; k < params.W.size(); ++k) w += params.W[k];
  return w / static_cast<double>(params.W.size());
}

double pair_norm(std::int32_t deg_a, std::int32_t deg_b) {
  return 1.0 / std::sqrt(static_cast<double>(deg_a) * static_cast<double>(deg_b));
}

// Attention for one head given projected features P = X W^T.
void head_attention(const TypedSubgraph& sub, const Mat& P, const Mat& A,
                    std::vector<double>& score, std::vector<double>& alpha) {
  const auto d = P.cols();
  const Vec s_src = P * A.leftCols(d).transpose();
  const Vec s_dst = P * A.rightCols(d).transpose();
  score.resize(sub.neighbors.size());
  alpha.resize(sub.neighbors.size());
  for (std::size_t a = 0; a < sub.size(); ++a) {
    for (auto e = sub.offsets[a]; e < sub.offsets[a + 1]; ++e) {
      const auto b = sub.neighbors[static_cast<std::size_t>(e)];
      const double logit = s_src(static_cast<Eigen::Index>(a)) + s_dst(b);
      score[static_cast<std::size_t>(e)] = logit;
      alpha[static_cast<std::size_t>(e)] = leaky_relu(logit);
    }
    softmax_inplace(std::span<double>(alpha).subspan(
        static_cast<std::size_t>(sub.offsets[a]),
        static_cast<std::size_t>(sub.offsets[a + 1] - sub.offsets[a])));
  }
}

}  // namespace

Mat gather_rows(const Mat& features, std::span<const NodeIndex> rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), features.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
  }
  return out;
}

std::vector<double> attention_weights(const TypedSubgraph& sub, const Mat& features,
                                      const NodeLevelParams& params, int head) {
  const auto k = static_cast<std::size_t>(head);
  const Mat P = gather_rows(features, sub.nodes) * params.W[k].transpose();
  std::vector<double> score, alpha;
  head_attention(sub, P, params.A[k], score, alpha);
  return alpha;
}

NodeLevelCache node_level_forward(const TypedSubgraph& sub, const Mat& features,
                                  const NodeLevelParams& params) {
  NodeLevelCache c;
  const auto n = static_cast<Eigen::Index>(sub.size());
  const auto d = features.cols();
  const auto heads = static_cast<std::size_t>(params.heads());
  c.X = gather_rows(features, sub.nodes);
  c.U = Mat::Zero(n, d);
  c.P.resize(heads);
  c.score.resize(heads);
  c.alpha.resize(heads);
  c.M.resize(heads);
  for (std::size_t k = 0; k < heads; ++k) {
    c.P[k] = c.X * params.W[k].transpose();
    head_attention(sub, c.P[k], params.A[k], c.score[k], c.alpha[k]);
    Mat& M = c.M[k];
    M = Mat::Zero(n, d);
    for (Eigen::Index a = 0; a < n; ++a) {
      for (auto e = sub.offsets[static_cast<std::size_t>(a)];
           e < sub.offsets[static_cast<std::size_t>(a) + 1]; ++e) {
        M.row(a) += c.alpha[k][static_cast<std::size_t>(e)] *
                    c.P[k].row(sub.neighbors[static_cast<std::size_t>(e)]);
      }
    }
    c.U += M.unaryExpr(&elu);
  }
  c.U /= static_cast<double>(heads);

  c.Q = c.X * mean_weight(params).transpose();
  c.H = c.Q;
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    for (auto e = sub.offsets[ua]; e < sub.offsets[ua + 1]; ++e) {
      const auto b = sub.neighbors[static_cast<std::size_t>(e)];
      if (b == a) continue;
      c.H.row(a) += pair_norm(sub.degree[ua], sub.degree[static_cast<std::size_t>(b)]) * c.Q.row(b);
    }
  }
  return c;
}

void node_level_backward(const TypedSubgraph& sub, const NodeLevelParams& params,
                         const NodeLevelCache& c, const Mat& grad_U, const Mat& grad_H,
                         Mat& grad_features, NodeLevelParams& grad_params) {
  const auto n = static_cast<Eigen::Index>(sub.size());
  const auto d = c.X.cols();
  const auto heads = static_cast<std::size_t>(params.heads());
  Mat grad_X = Mat::Zero(n, d);

  // Linear view: H = Q + S Q with S the normalised off-diagonal adjacency.
  Mat grad_Q = grad_H;
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    for (auto e = sub.offsets[ua]; e < sub.offsets[ua + 1]; ++e) {
      const auto b = sub.neighbors[static_cast<std::size_t>(e)];
      if (b == a) continue;
      grad_Q.row(b) += pair_norm(sub.degree[ua], sub.degree[static_cast<std::size_t>(b)]) *
                       grad_H.row(a);
    }
  }
  const Mat grad_Wbar = grad_Q.transpose() * c.X;
  grad_X += grad_Q * mean_weight(params);

  std::vector<double> grad_alpha;
  for (std::size_t k = 0; k < heads; ++k) {
    grad_params.W[k] += grad_Wbar / static_cast<double>(heads);
    const Mat& P = c.P[k];
    const auto& alpha = c.alpha[k];
    const auto& score = c.score[k];
    const Mat grad_M =
        (grad_U / static_cast<double>(heads)).cwiseProduct(c.M[k].unaryExpr(&elu_grad));

    Mat grad_P = Mat::Zero(n, d);
    Vec grad_src = Vec::Zero(n);
    Vec grad_dst = Vec::Zero(n);
    grad_alpha.assign(alpha.size(), 0.0);
    for (Eigen::Index a = 0; a < n; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      const auto begin = static_cast<std::size_t>(sub.offsets[ua]);
      const auto end = static_cast<std::size_t>(sub.offsets[ua + 1]);
      double weighted = 0;
      for (std::size_t e = begin; e < end; ++e) {
        const auto b = sub.neighbors[e];
        grad_P.row(b) += alpha[e] * grad_M.row(a);
        grad_alpha[e] = grad_M.row(a).dot(P.row(b));
        weighted += alpha[e] * grad_alpha[e];
      }
      for (std::size_t e = begin; e < end; ++e) {
        const double grad_logit = alpha[e] * (grad_alpha[e] - weighted) * leaky_relu_grad(score[e]);
        grad_src(a) += grad_logit;
        grad_dst(sub.neighbors[e]) += grad_logit;
      }
    }
    const Mat& A = params.A[k];
    grad_params.A[k].leftCols(d) += grad_src.transpose() * P;
    grad_params.A[k].rightCols(d) += grad_dst.transpose() * P;
    grad_P += grad_src * A.leftCols(d) + grad_dst * A.rightCols(d);

    grad_params.W[k] += grad_P.transpose() * c.X;
    grad_X += grad_P * params.W[k];
  }

  for (Eigen::Index a = 0; a < n; ++a) {
    grad_features.row(sub.nodes[static_cast<std::size_t>(a)]) += grad_X.row(a);
  }
}

Mat gat_aggregate(const TypedSubgraph& sub, const Mat& features, const NodeLevelParams& params) {
  return node_level_forward(sub, features, params).U;
}

Mat mean_aggregate(const TypedSubgraph& sub, const Mat& features, const NodeLevelParams& params) {
  return node_level_forward(sub, features, params).H;
}

ContrastiveTerms neighborhood_infonce(const Mat& U, const Mat& H, const Neighborhood& nbrs,
                                      double tau) {
  if (!(tau > 0)) throw ParameterError("temperature must be positive");
  ContrastiveTerms out;
  std::vector<double> sims;
  for (std::size_t a = 0; a < nbrs.size(); ++a) {
    const auto list = nbrs.of(a);
    const auto ua = U.row(static_cast<Eigen::Index>(a));
    sims.resize(list.size());

    double own = 0;
    for (std::size_t i = 0; i < list.size(); ++i) sims[i] = ua.dot(H.row(list[i])) / tau;
    own = ua.dot(H.row(static_cast<Eigen::Index>(a))) / tau;
    out.pos += log_sum_exp(sims) - own;

    if (list.size() < 2) continue;
    double off_diagonal = 0;
    for (std::size_t i = 0; i < list.size(); ++i) {
      sims[i] = ua.dot(U.row(list[i])) / tau;
      if (list[i] != static_cast<std::int32_t>(a)) off_diagonal += sims[i];
    }
    out.neg += static_cast<double>(list.size() - 1) * log_sum_exp(sims) - off_diagonal;
  }
  return out;
}

void neighborhood_infonce_backward(const Mat& U, const Mat& H, const Neighborhood& nbrs,
                                   double tau, double weight_pos, double weight_neg,
                                   Mat& grad_U, Mat& grad_H) {
  if (!(tau > 0)) throw ParameterError("temperature must be positive");
  std::vector<double> p;
  for (std::size_t a = 0; a < nbrs.size(); ++a) {
    const auto list = nbrs.of(a);
    const auto ia = static_cast<Eigen::Index>(a);
    const RowVec ua = U.row(ia);
    p.resize(list.size());

    if (weight_pos != 0) {
      for (std::size_t i = 0; i < list.size(); ++i) p[i] = ua.dot(H.row(list[i])) / tau;
      softmax_inplace(p);
      // d/ds_b = p_b - [b == a]; s_b = u_a . h_b / tau.
      for (std::size_t i = 0; i < list.size(); ++i) {
        const double coef = weight_pos * (p[i] - (list[i] == ia ? 1.0 : 0.0)) / tau;
        grad_U.row(ia) += coef * H.row(list[i]);
        grad_H.row(list[i]) += coef * ua;
      }
    }

    if (weight_neg != 0 && list.size() >= 2) {
      for (std::size_t i = 0; i < list.size(); ++i) p[i] = ua.dot(U.row(list[i])) / tau;
      softmax_inplace(p);
      const double m = static_cast<double>(list.size() - 1);
      for (std::size_t i = 0; i < list.size(); ++i) {
        const auto b = list[i];
        const double coef = weight_neg * (m * p[i] - (b == ia ? 0.0 : 1.0)) / tau;
        if (b == ia) {
          grad_U.row(ia) += 2.0 * coef * ua;
        } else {
          grad_U.row(ia) += coef * U.row(b);
          grad_U.row(b) += coef * ua;
        }
      }
    }
  }
}

std::int32_t SnapshotLayout::local_of(NodeIndex global) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), global);
  if (it == nodes.end() || *it != global) return -1;
  return static_cast<std::int32_t>(it - nodes.begin());
}

SnapshotLayout build_snapshot_layout(std::span<const TypedSubgraph> subs) {
  SnapshotLayout layout;
  for (const auto& sub : subs) layout.nodes.insert(layout.nodes.end(), sub.nodes.begin(), sub.nodes.end());
  std::sort(layout.nodes.begin(), layout.nodes.end());
  layout.nodes.erase(std::unique(layout.nodes.begin(), layout.nodes.end()), layout.nodes.end());

  const std::size_t n = layout.nodes.size();
  std::vector<std::vector<std::pair<std::int32_t, std::int32_t>>> slots(n);
  std::vector<std::vector<std::int32_t>> adj(n);
  for (const auto& sub : subs) {
    for (std::size_t i = 0; i < sub.size(); ++i) {
      const auto me = static_cast<std::size_t>(layout.local_of(sub.nodes[i]));
      slots[me].emplace_back(sub.edge_type, static_cast<std::int32_t>(i));
      for (auto b : sub.neighbors_of(i)) {
        adj[me].push_back(layout.local_of(sub.nodes[static_cast<std::size_t>(b)]));
      }
    }
  }
  layout.slot_offsets.assign(1, 0);
  layout.offsets.assign(1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(slots[i].begin(), slots[i].end());
    for (const auto& [r, local] : slots[i]) {
      layout.slot_type.push_back(r);
      layout.slot_local.push_back(local);
    }
    layout.slot_offsets.push_back(static_cast<std::int32_t>(layout.slot_type.size()));
    std::sort(adj[i].begin(), adj[i].end());
    adj[i].erase(std::unique(adj[i].begin(), adj[i].end()), adj[i].end());
    layout.neighbors.insert(layout.neighbors.end(), adj[i].begin(), adj[i].end());
    layout.offsets.push_back(static_cast<std::int32_t>(layout.neighbors.size()));
  }
  return layout;
}

EdgeTypeWeights edge_type_weights(const SnapshotLayout& layout,
                                  std::span<const Mat> per_type_U, const EdgeLevelView& params) {
  EdgeTypeWeights w;
  const std::size_t slots = layout.slot_type.size();
  const auto d = params.W.cols();
  w.gamma.resize(slots);
  w.delta.resize(slots);
  w.activation.resize(static_cast<Eigen::Index>(slots), d);
  for (std::size_t s = 0; s < slots; ++s) {
    const auto& U = per_type_U[static_cast<std::size_t>(layout.slot_type[s])];
    const auto row = static_cast<Eigen::Index>(s);
    w.activation.row(row) =
        (U.row(layout.slot_local[s]) * params.W.transpose() + params.b).array().tanh().matrix();
    w.gamma[s] = w.activation.row(row).dot(params.z.row(0));
  }
  w.delta = w.gamma;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    softmax_inplace(std::span<double>(w.delta).subspan(
        static_cast<std::size_t>(layout.slot_offsets[i]),
        static_cast<std::size_t>(layout.slot_offsets[i + 1] - layout.slot_offsets[i])));
  }
  return w;
}

Mat edge_fuse(const SnapshotLayout& layout, std::span<const Mat> per_type_U,
              std::span<const double> delta) {
  const auto d = per_type_U.front().cols();
  Mat out = Mat::Zero(static_cast<Eigen::Index>(layout.size()), d);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    for (auto s = layout.slot_offsets[i]; s < layout.slot_offsets[i + 1]; ++s) {
      const auto us = static_cast<std::size_t>(s);
      out.row(static_cast<Eigen::Index>(i)) +=
          delta[us] * per_type_U[static_cast<std::size_t>(layout.slot_type[us])].row(layout.slot_local[us]);
    }
  }
  return out;
}

Mat edge_mean_aggregate(const SnapshotLayout& layout, std::span<const TypedSubgraph> subs,
                        std::span<const Mat> per_type_U) {
  const auto d = per_type_U.front().cols();
  Mat out = Mat::Zero(static_cast<Eigen::Index>(layout.size()), d);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const auto begin = layout.slot_offsets[i];
    const auto end = layout.slot_offsets[i + 1];
    for (auto s = begin; s < end; ++s) {
      const auto us = static_cast<std::size_t>(s);
      const auto r = static_cast<std::size_t>(layout.slot_type[us]);
      const auto a = layout.slot_local[us];
      const auto& sub = subs[r];
      const auto& U = per_type_U[r];
      out.row(row) += U.row(a);
      for (auto b : sub.neighbors_of(static_cast<std::size_t>(a))) {
        if (b == a) continue;
        out.row(row) += pair_norm(sub.degree[static_cast<std::size_t>(a)],
                                  sub.degree[static_cast<std::size_t>(b)]) *
                        U.row(b);
      }
    }
    out.row(row) /= static_cast<double>(end - begin);
  }
  return out;
}

void edge_level_backward(const SnapshotLayout& layout, std::span<const TypedSubgraph> subs,
                         std::span<const Mat> per_type_U, const EdgeLevelView& params,
                         const EdgeTypeWeights& weights, const Mat& grad_U, const Mat& grad_H,
                         std::span<Mat> grad_per_type_U, const EdgeLevelGrad& grad_params) {
  const auto d = params.W.cols();
  RowVec grad_pre(d);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const auto begin = static_cast<std::size_t>(layout.slot_offsets[i]);
    const auto end = static_cast<std::size_t>(layout.slot_offsets[i + 1]);
    const double inv_types = 1.0 / static_cast<double>(end - begin);

    double weighted = 0;
    for (std::size_t s = begin; s < end; ++s) {
      const auto r = static_cast<std::size_t>(layout.slot_type[s]);
      weighted += weights.delta[s] * grad_U.row(row).dot(per_type_U[r].row(layout.slot_local[s]));
    }

    for (std::size_t s = begin; s < end; ++s) {
      const auto r = static_cast<std::size_t>(layout.slot_type[s]);
      const auto a = layout.slot_local[s];
      const auto& sub = subs[r];
      Mat& gU = grad_per_type_U[r];
      const auto u = per_type_U[r].row(a);

      // Mean pooling view.
      const RowVec gh = inv_types * grad_H.row(row);
      gU.row(a) += gh;
      for (auto b : sub.neighbors_of(static_cast<std::size_t>(a))) {
        if (b == a) continue;
        gU.row(b) += pair_norm(sub.degree[static_cast<std::size_t>(a)],
                               sub.degree[static_cast<std::size_t>(b)]) *
                     gh;
      }

      // Fused view through delta.
      gU.row(a) += weights.delta[s] * grad_U.row(row);
      const double grad_gamma =
          weights.delta[s] * (grad_U.row(row).dot(u) - weighted);
      const auto act = weights.activation.row(static_cast<Eigen::Index>(s));
      grad_params.z.row(0) += grad_gamma * act;
      grad_pre = (grad_gamma * params.z.row(0)).cwiseProduct(
          (1.0 - act.array().square()).matrix());
      grad_params.W += grad_pre.transpose() * u;
      grad_params.b.row(0) += grad_pre;
      gU.row(a) += grad_pre * params.W;
    }
  }
}

}  // namespace clp
