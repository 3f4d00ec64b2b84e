#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "clp/config.hpp"
#include "clp/data.hpp"
#include "clp/metrics.hpp"
#include "clp/model.hpp"
#include "json.hpp"

namespace clp {

class Adam {
 public:
  Adam(const ModelShape& shape, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step(ModelParameters& params, const ModelParameters& grad);
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  ModelParameters m_, v_;
};

// Stops once the monitored value has not strictly improved for `patience`
// consecutive observations.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}
  // True when `value` is a new best.
  bool observe(int epoch, double value);
  bool should_stop() const { return stale_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  int patience_;
  int stale_ = 0;
  int best_epoch_ = 0;
  double best_ = -std::numeric_limits<double>::infinity();
};

struct NamedArray {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<float> data;  // row-major
};

struct Checkpoint {
  ModelShape shape;
  TrainConfig config;
  int epoch = 0;
  double best_val_ap = 0;
  std::uint64_t seed = 0;
  std::vector<NamedArray> arrays;
};

inline constexpr int kCheckpointVersion = 1;

Checkpoint make_checkpoint(const ModelParameters& params, const TrainConfig& cfg, int epoch,
                           double best_val_ap);
// Throws IntegrityError when arrays do not match the recorded shape.
ModelParameters restore_parameters(const Checkpoint& ckpt);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

struct EpochRecord {
  int epoch = 0;
  LossComponents losses;  // averaged over the epoch's batches
  double total = 0;
  double val_auc = 0;
  double val_ap = 0;
  double seconds = 0;

  nlohmann::json to_json() const;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> log;
  bool stopped_early = false;
  // Set when a non-finite loss aborted training; `best` is the last finite one.
  std::optional<std::string> numeric_failure;
};

// Called after every epoch, e.g. to stream the log.
using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const TemporalHeterogeneousNetwork& thn, const EvalSplit& split,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Test metrics of a checkpoint's final embeddings.
LinkMetrics evaluate_checkpoint(const Checkpoint& ckpt, const TemporalHeterogeneousNetwork& thn,
                                std::span<const NodePair> positives,
                                std::span<const NodePair> negatives);

Mat final_embeddings(const Checkpoint& ckpt, const TemporalHeterogeneousNetwork& thn);

// CSV `node_id,stage,snapshot,edge_type,v_0..v_{d-1}` of every intermediate
// embedding: node_u/node_h per (snapshot, type), edge_u/edge_h per snapshot,
// then long_term, short_term and final per node.
void write_embedding_dump(const std::filesystem::path& file, const Checkpoint& ckpt,
                          const TemporalHeterogeneousNetwork& thn);

struct GroupError {
  std::string group;
  std::size_t count = 0;
  double rel_error = 0;  // ||analytic - numeric|| / ||numeric||, absolute below 1e-8
  double max_abs_error = 0;
};

struct GradCheckReport {
  std::vector<GroupError> groups;
  double max_rel_error = 0;
  std::size_t num_scalars = 0;
};

struct GradCheckInstance {
  int nodes = 20;
  int span = 3;  // training snapshots
  int types = 2;
  std::uint64_t seed = 0;
};

// Small planted network with `span + 1` snapshots.
TemporalHeterogeneousNetwork gradcheck_network(const GradCheckInstance& inst);

// Central differences with step `h` against the analytic gradient of the total
// loss on one batch. `corrupt` may tamper with the analytic gradient.
GradCheckReport gradient_check(const TrainConfig& cfg, const GradCheckInstance& inst,
                               double h = 1e-5,
                               const std::function<void(ModelParameters&)>& corrupt = {},
                               bool zero_params = false);

struct GridRow {
  TrainConfig config;
  double val_ap = 0;
  double val_auc = 0;
  int best_epoch = 0;
  std::optional<std::string> error;
};

// Trains every cell; rows sorted by val AP descending, ties by smaller d then
// smaller h; failed cells last.
std::vector<GridRow> grid_search(const TemporalHeterogeneousNetwork& thn, const EvalSplit& split,
                                 const std::vector<TrainConfig>& cells, int jobs = 1,
                                 std::ostream* progress = nullptr);

}  // namespace clp
