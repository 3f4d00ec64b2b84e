#include "clp/objective.hpp"

#include <cmath>

namespace clp {

void HyperParams::validate() const {
  if (!(tau > 0)) throw ConfigError("tau must be > 0");
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0) throw ConfigError("lambdas must be >= 0");
  if (dim < 1) throw ConfigError("d must be >= 1");
  if (heads < 1) throw ConfigError("heads must be >= 1");
  if (!(lr > 0)) throw ConfigError("lr must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
}

Supervision make_supervision(const EvalSplit& split, const TemporalHeterogeneousNetwork& thn,
                             SupervisionSource source) {
  Supervision sup;
  sup.source = source;
  sup.num_nodes = thn.registry.size();
  if (source == SupervisionSource::kNextSnapshotTrainSplit) {
    sup.positives = split.train_pos;
    sup.forbidden = links_of(thn.training());
  } else {
    const auto& last = thn.training().back();
    sup.positives = link_pairs(last);
    sup.forbidden = links_of(std::span(&last, 1));
  }
  if (sup.positives.empty()) throw ConfigError("no supervision positives available");
  return sup;
}

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t epoch) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (epoch + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<LinkTriples> sample_triples(const Supervision& sup, int batch_size,
                                        std::uint64_t seed, int epoch) {
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  Rng rng(mix(seed, static_cast<std::uint64_t>(epoch)));
  std::vector<NodePair> order = sup.positives;
  rng.shuffle(order);

  const std::size_t budget = 100 * std::max<std::size_t>(order.size(), 1);
  std::size_t rejections = 0;
  std::vector<LinkTriples> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    LinkTriples batch;
    batch.source = sup.source;
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    for (std::size_t p = start; p < end; ++p) {
      auto [a, i] = order[p];
      if (rng.next() & 1) std::swap(a, i);
      while (true) {
        const auto j = static_cast<NodeIndex>(rng.below(sup.num_nodes));
        if (j != a && j != i && !sup.forbidden.contains(a, j)) {
          batch.triples.push_back({a, i, j});
          break;
        }
        if (++rejections > budget) {
          throw NegativeExhaustionError("negative sampling rejected " + std::to_string(rejections) +
                                        " candidates");
        }
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

double link_loss(const Mat& embeddings, const LinkTriples& batch, bool literal_negative_term) {
  double total = 0;
  for (const auto& t : batch.triples) {
    const auto ua = embeddings.row(t.anchor);
    const double pos = ua.dot(embeddings.row(t.positive));
    const double neg = ua.dot(embeddings.row(t.negative));
    total += softplus(-pos);
    total += literal_negative_term ? softplus(-neg) : softplus(neg);
  }
  return total;
}

void link_loss_backward(const Mat& embeddings, const LinkTriples& batch,
                        bool literal_negative_term, double weight, Mat& grad) {
  for (const auto& t : batch.triples) {
    const RowVec ua = embeddings.row(t.anchor);
    const RowVec ui = embeddings.row(t.positive);
    const RowVec uj = embeddings.row(t.negative);
    const double gp = -weight * sigmoid(-ua.dot(ui));
    const double gn = literal_negative_term ? -weight * sigmoid(-ua.dot(uj))
                                            : weight * sigmoid(ua.dot(uj));
    grad.row(t.anchor) += gp * ui + gn * uj;
    grad.row(t.positive) += gp * ua;
    grad.row(t.negative) += gn * ua;
  }
}

double composed_node_loss(const LossComponents& c, ContrastiveComposition comp) {
  return comp == ContrastiveComposition::kSubtractive ? c.node_pos - c.node_neg
                                                      : c.node_pos + c.node_neg;
}

double composed_edge_loss(const LossComponents& c, ContrastiveComposition comp) {
  return comp == ContrastiveComposition::kSubtractive ? c.edge_pos - c.edge_neg
                                                      : c.edge_pos + c.edge_neg;
}

double composed_time_loss(const LossComponents& c) { return c.time_long + c.time_short; }

double total_loss(const LossComponents& c, const HyperParams& hp, ContrastiveComposition comp) {
  const std::pair<const char*, double> parts[] = {
      {"l_main", c.main},         {"l_node_pos", c.node_pos}, {"l_node_neg", c.node_neg},
      {"l_edge_pos", c.edge_pos}, {"l_edge_neg", c.edge_neg}, {"l_time_L", c.time_long},
      {"l_time_S", c.time_short}};
  for (const auto& [name, value] : parts) {
    if (!std::isfinite(value)) throw NumericError(std::string("non-finite loss component ") + name);
  }
  double total = c.main;
  if (const double w = hp.node_weight(); w != 0) total += w * composed_node_loss(c, comp);
  if (const double w = hp.edge_weight(); w != 0) total += w * composed_edge_loss(c, comp);
  if (const double w = hp.time_weight(); w != 0) total += w * composed_time_loss(c);
  return total;
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kNoNode: return "no_node";
    case Ablation::kNoEdge: return "no_edge";
    case Ablation::kNoTime: return "no_time";
  }
  return "none";
}

Ablation parse_ablation(const std::string& s) {
  if (s == "none") return Ablation::kNone;
  if (s == "no_node") return Ablation::kNoNode;
  if (s == "no_edge") return Ablation::kNoEdge;
  if (s == "no_time") return Ablation::kNoTime;
  throw ConfigError("unknown ablation '" + s + "' (none|no_node|no_edge|no_time)");
}

std::string to_string(SupervisionSource s) {
  return s == SupervisionSource::kLastSnapshot ? "last_snapshot" : "next_snapshot_train_split";
}

SupervisionSource parse_supervision_source(const std::string& s) {
  if (s == "next_snapshot_train_split") return SupervisionSource::kNextSnapshotTrainSplit;
  if (s == "last_snapshot") return SupervisionSource::kLastSnapshot;
  throw ConfigError("unknown supervision_source '" + s + "'");
}

std::string to_string(ContrastiveComposition c) {
  return c == ContrastiveComposition::kAdditive ? "additive" : "subtractive";
}

ContrastiveComposition parse_composition(const std::string& s) {
  if (s == "subtractive" || s == "literal") return ContrastiveComposition::kSubtractive;
  if (s == "additive") return ContrastiveComposition::kAdditive;
  throw ConfigError("unknown contrastive_composition '" + s + "'");
}

std::string to_string(TimeLossSign s) {
  return s == TimeLossSign::kLiteral ? "literal" : "standard";
}

TimeLossSign parse_time_loss_sign(const std::string& s) {
  if (s == "standard") return TimeLossSign::kStandard;
  if (s == "literal") return TimeLossSign::kLiteral;
  throw ConfigError("unknown time_loss_sign '" + s + "'");
}

}  // namespace clp
