#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "clp/common.hpp"
#include "clp/data.hpp"
#include "clp/temporal.hpp"

namespace clp {

enum class Ablation { kNone, kNoNode, kNoEdge, kNoTime };

enum class SupervisionSource {
  kNextSnapshotTrainSplit,  // positives: training share of the evaluation snapshot
  kLastSnapshot,            // positives: links of the last training snapshot
};

enum class ContrastiveComposition {
  kSubtractive,  // L_N = L+ - L-, likewise L_E
  kAdditive,     // L_N = L+ + L-
};

struct HyperParams {
  double tau = 0.1;
  double lambda1 = 1e-3;
  double lambda2 = 1e-3;
  double lambda3 = 1e-3;
  int dim = 32;
  int heads = 4;
  double lr = 1e-4;
  int batch_size = 1024;
  int patience = 5;
  int max_epochs = 300;
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::kNone;

  // Loss weights after applying the ablation flag.
  double node_weight() const { return ablation == Ablation::kNoNode ? 0.0 : lambda1; }
  double edge_weight() const { return ablation == Ablation::kNoEdge ? 0.0 : lambda2; }
  double time_weight() const { return ablation == Ablation::kNoTime ? 0.0 : lambda3; }

  // Throws ConfigError on the first violated range constraint.
  void validate() const;
};

struct Triple {
  NodeIndex anchor = 0;
  NodeIndex positive = 0;
  NodeIndex negative = 0;

  bool operator==(const Triple&) const = default;
};

struct LinkTriples {
  std::vector<Triple> triples;
  SupervisionSource source = SupervisionSource::kNextSnapshotTrainSplit;
};

// Positive pairs plus the link set their negatives must avoid.
struct Supervision {
  std::vector<NodePair> positives;
  LinkSet forbidden;
  std::size_t num_nodes = 0;
  SupervisionSource source = SupervisionSource::kNextSnapshotTrainSplit;
};

Supervision make_supervision(const EvalSplit& split, const TemporalHeterogeneousNetwork& thn,
                             SupervisionSource source);

// One epoch of batches: positives shuffled, one fresh negative per positive.
// Deterministic in (seed, epoch).
std::vector<LinkTriples> sample_triples(const Supervision& sup, int batch_size,
                                        std::uint64_t seed, int epoch = 0);

// Binary cross-entropy over the triples. With `literal_negative_term` the
// negative pairs use -log sigma(+dot) as well.
double link_loss(const Mat& embeddings, const LinkTriples& batch,
                 bool literal_negative_term = false);

void link_loss_backward(const Mat& embeddings, const LinkTriples& batch,
                        bool literal_negative_term, double weight, Mat& grad);

struct LossComponents {
  double main = 0;
  double node_pos = 0;
  double node_neg = 0;
  double edge_pos = 0;
  double edge_neg = 0;
  double time_long = 0;
  double time_short = 0;
};

double composed_node_loss(const LossComponents& c, ContrastiveComposition comp);
double composed_edge_loss(const LossComponents& c, ContrastiveComposition comp);
double composed_time_loss(const LossComponents& c);

// L_main + l1 L_N + l2 L_E + l3 L_T. Throws NumericError naming the first
// non-finite component.
double total_loss(const LossComponents& c, const HyperParams& hp,
                  ContrastiveComposition comp = ContrastiveComposition::kSubtractive);

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& s);
std::string to_string(SupervisionSource s);
SupervisionSource parse_supervision_source(const std::string& s);
std::string to_string(ContrastiveComposition c);
ContrastiveComposition parse_composition(const std::string& s);
std::string to_string(TimeLossSign s);
TimeLossSign parse_time_loss_sign(const std::string& s);

}  // namespace clp
