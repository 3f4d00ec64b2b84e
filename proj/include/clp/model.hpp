#pragma once

#include <string>
#include <vector>

#include "clp/common.hpp"
#include "clp/config.hpp"
#include "clp/data.hpp"
#include "clp/objective.hpp"
#include "clp/spatial.hpp"
#include "clp/temporal.hpp"

namespace clp {

struct ModelShape {
  std::size_t num_nodes = 0;
  int dim = 32;
  int heads = 4;
  int num_types = 1;
  int span = 1;  // training snapshots T
  bool share_params_across_time = false;

  int time_slots() const { return share_params_across_time ? 1 : span; }
};

// Every trainable tensor. Gradients and optimizer moments use the same type.
struct ModelParameters {
  ModelShape shape;
  Mat features;                        // N x d
  std::vector<NodeLevelParams> node;   // [r * time_slots + slot]
  std::vector<Mat> edge_W;             // [slot], d x d
  Mat edge_b;                          // 1 x d
  Mat edge_z;                          // 1 x d
  LstmParams lstm;
  GruParams gru;

  NodeLevelParams& node_params(int r, int t) {
    return node[static_cast<std::size_t>(r * shape.time_slots() + slot(t))];
  }
  const NodeLevelParams& node_params(int r, int t) const {
    return node[static_cast<std::size_t>(r * shape.time_slots() + slot(t))];
  }
  Mat& edge_weight(int t) { return edge_W[static_cast<std::size_t>(slot(t))]; }
  const Mat& edge_weight(int t) const { return edge_W[static_cast<std::size_t>(slot(t))]; }

  // Calls fn(name, group, tensor) for every tensor in a fixed order.
  template <typename Fn>
  void visit(Fn&& fn) {
    visit_impl(*this, fn);
  }
  template <typename Fn>
  void visit(Fn&& fn) const {
    visit_impl(*this, fn);
  }

  std::size_t num_scalars() const;

 private:
  int slot(int t) const { return shape.share_params_across_time ? 0 : t; }

  template <typename Self, typename Fn>
  static void visit_impl(Self& self, Fn& fn);
};

ModelParameters zero_parameters(const ModelShape& shape);
ModelParameters init_parameters(const ModelShape& shape, std::uint64_t seed);

// Typed subgraphs and layouts of the training snapshots, built once.
struct GraphContext {
  std::size_t num_nodes = 0;
  int num_types = 0;
  std::vector<std::vector<TypedSubgraph>> subgraphs;  // [t][r]
  std::vector<SnapshotLayout> layouts;                // [t]
  std::vector<NodeIndex> last_nodes;                  // V^T

  int span() const { return static_cast<int>(subgraphs.size()); }
};

GraphContext build_context(const TemporalHeterogeneousNetwork& thn);

ModelShape shape_for(const GraphContext& ctx, const TrainConfig& cfg);

// Intermediate embeddings of one forward pass.
struct Embeddings {
  std::vector<std::vector<Mat>> node_u;  // [t][r] u^{rt}, typed-subgraph rows
  std::vector<std::vector<Mat>> node_h;  // [t][r] h^{rt}
  std::vector<std::vector<double>> delta;  // [t] per layout slot
  std::vector<Mat> edge_u;               // [t] u^t, layout rows
  std::vector<Mat> edge_h;               // [t] h^t
  Mat long_term;                         // u^L, N x d
  Mat short_term;                        // u^S
  Mat final;                             // u^T
};

// Forward pass without losses.
Embeddings embed(const ModelParameters& params, const GraphContext& ctx);

struct LossReport {
  LossComponents components;
  double total = 0;
  // Number of times the edge-level contrastive gradient was propagated.
  int edge_loss_backward_calls = 0;
};

// Full objective on one batch. When `grad` is non-null it must be shaped like
// `params`; gradients of the total are added into it.
LossReport evaluate_objective(const ModelParameters& params, const GraphContext& ctx,
                              const TrainConfig& cfg, const LinkTriples& batch,
                              ModelParameters* grad = nullptr);

// ---------------------------------------------------------------------------

template <typename Self, typename Fn>
void ModelParameters::visit_impl(Self& self, Fn& fn) {
  fn(std::string("features"), std::string("features"), self.features);
  const int slots = self.shape.time_slots();
  for (int r = 0; r < self.shape.num_types; ++r) {
    for (int s = 0; s < slots; ++s) {
      auto& p = self.node[static_cast<std::size_t>(r * slots + s)];
      for (std::size_t k = 0; k < p.W.size(); ++k) {
        const std::string suffix = "[" + std::to_string(r) + "][" + std::to_string(s) + "][" +
                                   std::to_string(k) + "]";
        fn("node.W" + suffix, std::string("node.W"), p.W[k]);
        fn("node.A" + suffix, std::string("node.A"), p.A[k]);
      }
    }
  }
  for (int s = 0; s < slots; ++s) {
    fn("edge.W[" + std::to_string(s) + "]", std::string("edge.W"),
       self.edge_W[static_cast<std::size_t>(s)]);
  }
  fn(std::string("edge.b"), std::string("edge.b"), self.edge_b);
  fn(std::string("edge.z"), std::string("edge.z"), self.edge_z);
  auto& l = self.lstm;
  for (auto [name, m] : {std::pair{"Wi", &l.Wi}, {"Ui", &l.Ui}, {"bi", &l.bi},
                         {"Wf", &l.Wf}, {"Uf", &l.Uf}, {"bf", &l.bf},
                         {"Wg", &l.Wg}, {"Ug", &l.Ug}, {"bg", &l.bg},
                         {"Wo", &l.Wo}, {"Uo", &l.Uo}, {"bo", &l.bo}}) {
    fn(std::string("lstm.") + name, std::string("lstm.") + name, *m);
  }
  auto& g = self.gru;
  for (auto [name, m] : {std::pair{"Wz", &g.Wz}, {"Uz", &g.Uz}, {"bz", &g.bz},
                         {"Wr", &g.Wr}, {"Ur", &g.Ur}, {"br", &g.br},
                         {"Wn", &g.Wn}, {"Un", &g.Un}, {"bn", &g.bn}}) {
    fn(std::string("gru.") + name, std::string("gru.") + name, *m);
  }
}

}  // namespace clp
