#include "clp/model.hpp"

#include <cmath>

namespace clp {

namespace {

Mat uniform(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

// Everything the backward pass needs from a forward pass.
struct ForwardState {
  std::vector<std::vector<NodeLevelCache>> node;  // [t][r]
  std::vector<EdgeTypeWeights> weights;           // [t]
  std::vector<Mat> steps;                         // [t] N x d temporal inputs
  LstmCache lstm;
  GruCache gru;
  Embeddings emb;
};

ForwardState forward(const ModelParameters& params, const GraphContext& ctx, double tau,
                     bool with_contrast, LossComponents* comps) {
  const int span = ctx.span();
  const int types = ctx.num_types;
  const auto n = static_cast<Eigen::Index>(ctx.num_nodes);
  const auto d = params.shape.dim;

  ForwardState st;
  st.node.resize(static_cast<std::size_t>(span));
  st.weights.resize(static_cast<std::size_t>(span));
  st.steps.resize(static_cast<std::size_t>(span));
  auto& emb = st.emb;
  emb.node_u.resize(static_cast<std::size_t>(span));
  emb.node_h.resize(static_cast<std::size_t>(span));
  emb.delta.resize(static_cast<std::size_t>(span));
  emb.edge_u.resize(static_cast<std::size_t>(span));
  emb.edge_h.resize(static_cast<std::size_t>(span));

  for (int t = 0; t < span; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    const auto& subs = ctx.subgraphs[ut];
    auto& caches = st.node[ut];
    caches.resize(static_cast<std::size_t>(types));
    auto& typeU = emb.node_u[ut];
    auto& typeH = emb.node_h[ut];
    typeU.assign(static_cast<std::size_t>(types), Mat(0, d));
    typeH.assign(static_cast<std::size_t>(types), Mat(0, d));
    for (int r = 0; r < types; ++r) {
      const auto ur = static_cast<std::size_t>(r);
      const auto& sub = subs[ur];
      if (sub.empty()) continue;
      caches[ur] = node_level_forward(sub, params.features, params.node_params(r, t));
      typeU[ur] = std::move(caches[ur].U);
      typeH[ur] = std::move(caches[ur].H);
      if (with_contrast) {
        const auto terms = node_infonce(typeU[ur], typeH[ur], sub, tau);
        comps->node_pos += terms.pos;
        comps->node_neg += terms.neg;
      }
    }

    st.steps[ut] = Mat::Zero(n, d);
    const auto& layout = ctx.layouts[ut];
    if (layout.size() == 0) {
      emb.edge_u[ut] = Mat(0, d);
      emb.edge_h[ut] = Mat(0, d);
      continue;
    }
    const EdgeLevelView view{params.edge_weight(t), params.edge_b, params.edge_z};
    st.weights[ut] = edge_type_weights(layout, typeU, view);
    emb.delta[ut] = st.weights[ut].delta;
    emb.edge_u[ut] = edge_fuse(layout, typeU, st.weights[ut].delta);
    emb.edge_h[ut] = edge_mean_aggregate(layout, subs, typeU);
    if (with_contrast) {
      const auto terms = edge_infonce(emb.edge_u[ut], emb.edge_h[ut], layout, tau);
      comps->edge_pos += terms.pos;
      comps->edge_neg += terms.neg;
    }
    for (std::size_t i = 0; i < layout.size(); ++i) {
      st.steps[ut].row(layout.nodes[i]) = emb.edge_u[ut].row(static_cast<Eigen::Index>(i));
    }
  }

  st.lstm = lstm_forward(st.steps, params.lstm);
  st.gru = gru_forward(st.steps, params.gru);
  emb.long_term = st.lstm.h;
  emb.short_term = st.gru.h;
  emb.final = fuse_final(emb.long_term, emb.short_term);
  return st;
}

}  // namespace

std::size_t ModelParameters::num_scalars() const {
  std::size_t total = 0;
  visit([&](const std::string&, const std::string&, const Mat& m) {
    total += static_cast<std::size_t>(m.size());
  });
  return total;
}

ModelParameters zero_parameters(const ModelShape& shape) {
  ModelParameters p;
  p.shape = shape;
  const int d = shape.dim;
  p.features = Mat::Zero(static_cast<Eigen::Index>(shape.num_nodes), d);
  p.node.resize(static_cast<std::size_t>(shape.num_types * shape.time_slots()));
  for (auto& np : p.node) {
    np.W.assign(static_cast<std::size_t>(shape.heads), Mat::Zero(d, d));
    np.A.assign(static_cast<std::size_t>(shape.heads), Mat::Zero(1, 2 * d));
  }
  p.edge_W.assign(static_cast<std::size_t>(shape.time_slots()), Mat::Zero(d, d));
  p.edge_b = Mat::Zero(1, d);
  p.edge_z = Mat::Zero(1, d);
  p.lstm = zero_lstm(d);
  p.gru = zero_gru(d);
  return p;
}

ModelParameters init_parameters(const ModelShape& shape, std::uint64_t seed) {
  ModelParameters p = zero_parameters(shape);
  const double d = shape.dim;
  p.features = init_features(shape.num_nodes, shape.dim, seed).matrix;

  Rng rng(seed ^ 0x5deece66dULL);
  const double glorot = std::sqrt(6.0 / (2 * d));
  const double glorot_attn = std::sqrt(6.0 / (2 * d + 1));
  const double recurrent = 1.0 / std::sqrt(d);
  p.visit([&](const std::string& name, const std::string& group, Mat& m) {
    if (name == "features" || group == "edge.b") return;
    if (group == "node.W" || group == "edge.W") {
      m = uniform(m.rows(), m.cols(), glorot, rng);
    } else if (group == "node.A" || group == "edge.z") {
      m = uniform(m.rows(), m.cols(), glorot_attn, rng);
    } else {
      m = uniform(m.rows(), m.cols(), recurrent, rng);
    }
  });
  return p;
}

GraphContext build_context(const TemporalHeterogeneousNetwork& thn) {
  GraphContext ctx;
  ctx.num_nodes = thn.registry.size();
  ctx.num_types = thn.num_edge_types();
  for (const auto& g : thn.training()) {
    ctx.subgraphs.push_back(build_typed_subgraphs(g, ctx.num_types));
    ctx.layouts.push_back(build_snapshot_layout(ctx.subgraphs.back()));
  }
  ctx.last_nodes = thn.training().back().nodes;
  return ctx;
}

ModelShape shape_for(const GraphContext& ctx, const TrainConfig& cfg) {
  ModelShape s;
  s.num_nodes = ctx.num_nodes;
  s.dim = cfg.hp.dim;
  s.heads = cfg.hp.heads;
  s.num_types = ctx.num_types;
  s.span = ctx.span();
  s.share_params_across_time = cfg.share_params_across_time;
  return s;
}

Embeddings embed(const ModelParameters& params, const GraphContext& ctx) {
  return forward(params, ctx, 1.0, false, nullptr).emb;
}

LossReport evaluate_objective(const ModelParameters& params, const GraphContext& ctx,
                              const TrainConfig& cfg, const LinkTriples& batch,
                              ModelParameters* grad) {
  const auto& hp = cfg.hp;
  const double tau = hp.tau;
  LossReport report;
  auto& comps = report.components;
  ForwardState st = forward(params, ctx, tau, true, &comps);
  const auto& emb = st.emb;

  const double w_time = hp.time_weight();
  if (ctx.last_nodes.size() >= 2) {
    const auto terms =
        time_infonce(emb.long_term, emb.short_term, ctx.last_nodes, tau, cfg.time_loss_sign);
    comps.time_long = terms.long_term;
    comps.time_short = terms.short_term;
  } else if (w_time != 0) {
    throw InsufficientSpanError("last training snapshot has fewer than 2 nodes");
  }
  comps.main = link_loss(emb.final, batch, cfg.literal_eq13);
  report.total = total_loss(comps, hp, cfg.composition);
  if (grad == nullptr) return report;

  const int span = ctx.span();
  const int types = ctx.num_types;
  const auto n = static_cast<Eigen::Index>(ctx.num_nodes);
  const auto d = params.shape.dim;
  const double neg_sign = cfg.composition == ContrastiveComposition::kSubtractive ? -1.0 : 1.0;
  const double w_node = hp.node_weight();
  const double w_edge = hp.edge_weight();

  Mat grad_final = Mat::Zero(n, d);
  link_loss_backward(emb.final, batch, cfg.literal_eq13, 1.0, grad_final);
  Mat grad_long = 0.5 * grad_final;
  Mat grad_short = 0.5 * grad_final;
  if (w_time != 0) {
    time_infonce_backward(emb.long_term, emb.short_term, ctx.last_nodes, tau, cfg.time_loss_sign,
                          w_time, grad_long, grad_short);
  }
  const auto grad_steps_l = lstm_backward(st.lstm, params.lstm, grad_long, grad->lstm);
  const auto grad_steps_g = gru_backward(st.gru, params.gru, grad_short, grad->gru);

  std::vector<Mat> grad_typeU(static_cast<std::size_t>(types));
  for (int t = 0; t < span; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    const auto& layout = ctx.layouts[ut];
    if (layout.size() == 0) continue;
    const auto& subs = ctx.subgraphs[ut];
    const auto rows = static_cast<Eigen::Index>(layout.size());

    Mat grad_u(rows, d);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const auto g = layout.nodes[static_cast<std::size_t>(i)];
      grad_u.row(i) = grad_steps_l[ut].row(g) + grad_steps_g[ut].row(g);
    }
    Mat grad_h = Mat::Zero(rows, d);
    if (w_edge != 0) {
      neighborhood_infonce_backward(emb.edge_u[ut], emb.edge_h[ut], layout.neighborhood(), tau,
                                    w_edge, neg_sign * w_edge, grad_u, grad_h);
      ++report.edge_loss_backward_calls;
    }

    for (int r = 0; r < types; ++r) {
      grad_typeU[static_cast<std::size_t>(r)] =
          Mat::Zero(static_cast<Eigen::Index>(subs[static_cast<std::size_t>(r)].size()), d);
    }
    const EdgeLevelView view{params.edge_weight(t), params.edge_b, params.edge_z};
    const EdgeLevelGrad gview{grad->edge_weight(t), grad->edge_b, grad->edge_z};
    edge_level_backward(layout, subs, emb.node_u[ut], view, st.weights[ut], grad_u, grad_h,
                        grad_typeU, gview);

    for (int r = 0; r < types; ++r) {
      const auto ur = static_cast<std::size_t>(r);
      const auto& sub = subs[ur];
      if (sub.empty()) continue;
      Mat grad_node_h = Mat::Zero(static_cast<Eigen::Index>(sub.size()), d);
      if (w_node != 0) {
        neighborhood_infonce_backward(emb.node_u[ut][ur], emb.node_h[ut][ur], neighborhood(sub),
                                      tau, w_node, neg_sign * w_node, grad_typeU[ur], grad_node_h);
      }
      node_level_backward(sub, params.node_params(r, t), st.node[ut][ur], grad_typeU[ur],
                          grad_node_h, grad->features, grad->node_params(r, t));
    }
  }
  return report;
}

}  // namespace clp
