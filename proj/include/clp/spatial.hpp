#pragma once

#include <span>
#include <vector>

#include "clp/common.hpp"
#include "clp/data.hpp"

namespace clp {

inline constexpr double kLeakySlope = 0.2;

// Per-(edge type, snapshot) attention parameters, one entry per head.
// W is d x d (maps x to W x), A is 1 x 2d (source half, then target half).
struct NodeLevelParams {
  std::vector<Mat> W;
  std::vector<Mat> A;

  int heads() const { return static_cast<int>(W.size()); }
};

// CSR neighbourhood over local row indices; row i's list contains i.
struct Neighborhood {
  std::span<const std::int32_t> offsets;
  std::span<const std::int32_t> neighbors;

  std::size_t size() const { return offsets.size() - 1; }
  std::span<const std::int32_t> of(std::size_t i) const {
    return neighbors.subspan(static_cast<std::size_t>(offsets[i]),
                             static_cast<std::size_t>(offsets[i + 1] - offsets[i]));
  }
};

inline Neighborhood neighborhood(const TypedSubgraph& sub) {
  return {sub.offsets, sub.neighbors};
}

// Rows of `features` for the subgraph's nodes, in local order.
Mat gather_rows(const Mat& features, std::span<const NodeIndex> rows);

// Attention coefficients of one head, aligned with sub.neighbors.
std::vector<double> attention_weights(const TypedSubgraph& sub, const Mat& features,
                                      const NodeLevelParams& params, int head);

// Intermediate values of the node-level forward pass, kept for backprop.
struct NodeLevelCache {
  Mat X;                                   // n x d
  std::vector<Mat> P;                      // per head, X W^T
  std::vector<std::vector<double>> score;  // per head, pre-LeakyReLU logits
  std::vector<std::vector<double>> alpha;  // per head
  std::vector<Mat> M;                      // per head, pre-ELU aggregate
  Mat Q;                                   // X Wbar^T
  Mat U;                                   // attention view, head mean
  Mat H;                                   // linear view
};

NodeLevelCache node_level_forward(const TypedSubgraph& sub, const Mat& features,
                                  const NodeLevelParams& params);

// Accumulates into grad_features (global rows) and grad_params.
void node_level_backward(const TypedSubgraph& sub, const NodeLevelParams& params,
                         const NodeLevelCache& cache, const Mat& grad_U, const Mat& grad_H,
                         Mat& grad_features, NodeLevelParams& grad_params);

// u^{rt}: attentive aggregation, ELU, averaged over heads. Local rows.
Mat gat_aggregate(const TypedSubgraph& sub, const Mat& features, const NodeLevelParams& params);

// h^{rt}: symmetric-normalised linear aggregation with the head-mean W.
Mat mean_aggregate(const TypedSubgraph& sub, const Mat& features, const NodeLevelParams& params);

struct ContrastiveTerms {
  double pos = 0;
  double neg = 0;
};

// Positive term: anchor u_a against h_a over h_b, b in N(a).
// Negative term: every u_a . u_b, b in N(a) \ {a}, against u_k, k in N(a).
ContrastiveTerms neighborhood_infonce(const Mat& U, const Mat& H, const Neighborhood& nbrs,
                                      double tau);

// Adds weight_pos * d(pos) + weight_neg * d(neg) into grad_U / grad_H.
void neighborhood_infonce_backward(const Mat& U, const Mat& H, const Neighborhood& nbrs,
                                   double tau, double weight_pos, double weight_neg,
                                   Mat& grad_U, Mat& grad_H);

inline ContrastiveTerms node_infonce(const Mat& U, const Mat& H, const TypedSubgraph& sub,
                                     double tau) {
  return neighborhood_infonce(U, H, neighborhood(sub), tau);
}

// Node membership of one snapshot across its typed subgraphs.
struct SnapshotLayout {
  std::vector<NodeIndex> nodes;  // sorted union of typed-subgraph nodes
  // Per node, the (type, local row) slots it occupies. CSR over `slots`.
  std::vector<std::int32_t> slot_offsets;
  std::vector<std::int32_t> slot_type;
  std::vector<std::int32_t> slot_local;
  // Union neighbourhood over all types, in layout-local rows, self included.
  std::vector<std::int32_t> offsets;
  std::vector<std::int32_t> neighbors;

  std::size_t size() const { return nodes.size(); }
  Neighborhood neighborhood() const { return {offsets, neighbors}; }
  std::int32_t local_of(NodeIndex global) const;
};

SnapshotLayout build_snapshot_layout(std::span<const TypedSubgraph> subs);

// Semantic attention parameters for one snapshot: W^t is d x d, b and z are
// 1 x d and shared across snapshots.
struct EdgeLevelView {
  const Mat& W;
  const Mat& b;
  const Mat& z;
};

struct EdgeLevelGrad {
  Mat& W;
  Mat& b;
  Mat& z;
};

struct EdgeTypeWeights {
  std::vector<double> gamma;  // per slot
  std::vector<double> delta;  // per slot, softmax within a node
  Mat activation;             // per slot, tanh(W u + b)
};

// `per_type_U[r]` holds u^{rt} in the local rows of typed subgraph r.
EdgeTypeWeights edge_type_weights(const SnapshotLayout& layout,
                                  std::span<const Mat> per_type_U, const EdgeLevelView& params);

// u^t = sum_r delta_r u^{rt}.
Mat edge_fuse(const SnapshotLayout& layout, std::span<const Mat> per_type_U,
              std::span<const double> delta);

// h^t: per-type normalised neighbour pooling averaged over the node's types.
Mat edge_mean_aggregate(const SnapshotLayout& layout, std::span<const TypedSubgraph> subs,
                        std::span<const Mat> per_type_U);

inline ContrastiveTerms edge_infonce(const Mat& U, const Mat& H, const SnapshotLayout& layout,
                                     double tau) {
  return neighborhood_infonce(U, H, layout.neighborhood(), tau);
}

// Backprop of edge_type_weights + edge_fuse + edge_mean_aggregate.
void edge_level_backward(const SnapshotLayout& layout, std::span<const TypedSubgraph> subs,
                         std::span<const Mat> per_type_U, const EdgeLevelView& params,
                         const EdgeTypeWeights& weights, const Mat& grad_U, const Mat& grad_H,
                         std::span<Mat> grad_per_type_U, const EdgeLevelGrad& grad_params);

}  // namespace clp
