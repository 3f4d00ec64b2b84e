#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "clp/common.hpp"

namespace clp {

// One row of the input edge stream. Undirected: parse_edges stores the
// endpoints with src <= dst.
struct TemporalEdge {
  std::string src;
  std::string dst;
  std::string src_type;
  std::string dst_type;
  std::string edge_type;
  std::int64_t timestamp = 0;

  bool operator==(const TemporalEdge&) const = default;
};

// Header names for the six required columns.
struct ColumnMapping {
  std::string src = "src";
  std::string dst = "dst";
  std::string src_type = "src_type";
  std::string dst_type = "dst_type";
  std::string edge_type = "edge_type";
  std::string timestamp = "timestamp";
};

std::vector<TemporalEdge> parse_edges(std::istream& source,
                                      const ColumnMapping& schema = {});

struct NodeInfo {
  std::string id;
  std::string type;
};

// Global node identifier -> dense index. Indices follow insertion order.
class NodeRegistry {
 public:
  // Returns the index of `id`, registering it on first sight. Throws
  // SchemaConflictError if `id` was registered with another type.
  NodeIndex intern(const std::string& id, const std::string& type);

  // Throws LookupError for unknown ids.
  NodeIndex at(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.contains(id); }

  const NodeInfo& info(NodeIndex i) const { return nodes_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<NodeInfo>& nodes() const { return nodes_; }

 private:
  std::vector<NodeInfo> nodes_;
  std::unordered_map<std::string, NodeIndex> index_;
};

struct SnapshotEdge {
  NodeIndex src = 0;  // src <= dst
  NodeIndex dst = 0;
  std::int32_t type = 0;

  auto operator<=>(const SnapshotEdge&) const = default;
};

struct SnapshotGraph {
  int index = 0;  // 1-based ordinal
  std::int64_t start = 0;  // covered time range [start, end)
  std::int64_t end = 0;
  std::vector<NodeIndex> nodes;      // sorted, unique
  std::vector<SnapshotEdge> edges;   // sorted, unique

  bool empty() const { return edges.empty(); }
  bool contains(NodeIndex v) const;
};

// Snapshots 1..T are the training span; the final entry is the evaluation
// snapshot T+1.
struct TemporalHeterogeneousNetwork {
  std::vector<SnapshotGraph> snapshots;
  NodeRegistry registry;
  std::vector<std::string> edge_types;
  std::int64_t t_min = 0;
  std::int64_t window = 0;

  int training_span() const { return static_cast<int>(snapshots.size()) - 1; }
  std::span<const SnapshotGraph> training() const {
    return {snapshots.data(), snapshots.size() - 1};
  }
  const SnapshotGraph& evaluation() const { return snapshots.back(); }
  int num_edge_types() const { return static_cast<int>(edge_types.size()); }
};

struct PartitionPolicy {
  enum class Kind { kWindowLength, kSnapshotCount };
  Kind kind = Kind::kSnapshotCount;
  std::int64_t value = 2;

  static PartitionPolicy window_length(std::int64_t w) { return {Kind::kWindowLength, w}; }
  static PartitionPolicy snapshot_count(std::int64_t k) { return {Kind::kSnapshotCount, k}; }
};

TemporalHeterogeneousNetwork partition_snapshots(std::span<const TemporalEdge> edges,
                                                 PartitionPolicy policy);

// Per-(snapshot, edge type) adjacency. Neighbor lists hold local indices
// into `nodes`, are sorted, and always contain the node itself.
struct TypedSubgraph {
  int snapshot = 0;
  int edge_type = 0;
  std::vector<NodeIndex> nodes;          // global indices, sorted
  std::vector<std::int32_t> offsets;     // CSR, size nodes.size() + 1
  std::vector<std::int32_t> neighbors;   // local indices
  std::vector<std::int32_t> degree;      // neighbor count without self-loop
  std::size_t edge_count = 0;            // input edges of this type

  std::size_t size() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }
  std::span<const std::int32_t> neighbors_of(std::size_t local) const {
    return {neighbors.data() + offsets[local],
            static_cast<std::size_t>(offsets[local + 1] - offsets[local])};
  }
  // Local index of a global node, or -1.
  std::int32_t local_of(NodeIndex global) const;
};

std::vector<TypedSubgraph> build_typed_subgraphs(const SnapshotGraph& snapshot,
                                                 int num_edge_types);

// Drops evaluation-snapshot nodes never seen in 1..T, with their links, and
// compacts the registry to the remaining nodes.
TemporalHeterogeneousNetwork clean_future_nodes(const TemporalHeterogeneousNetwork& thn);

struct EvalSplit {
  std::vector<NodePair> train_pos, val_pos, test_pos;
  std::vector<NodePair> train_neg, val_neg, test_neg;
  std::uint64_t seed = 0;
  int neg_ratio = 1;
};

// Non-self links of all given snapshots.
LinkSet links_of(std::span<const SnapshotGraph> snapshots);

// Unique non-self node pairs linked in the snapshot, sorted.
std::vector<NodePair> link_pairs(const SnapshotGraph& snapshot);

EvalSplit make_eval_split(const TemporalHeterogeneousNetwork& thn, std::uint64_t seed,
                          int neg_ratio = 1);

struct FeatureTable {
  Mat matrix;
  int dim = 0;
  bool trainable = true;
};

FeatureTable init_features(std::size_t num_nodes, int dim, std::uint64_t seed);

// Ingestion directory: snapshots.json plus snapshot_<t>.csv files.
void write_ingested(const std::filesystem::path& dir, const TemporalHeterogeneousNetwork& thn);
TemporalHeterogeneousNetwork read_ingested(const std::filesystem::path& dir);

// split.json holds the six link sets as [src, dst] identifier pairs.
void write_split(const std::filesystem::path& file, const EvalSplit& split,
                 const NodeRegistry& registry);
EvalSplit read_split(const std::filesystem::path& file, const NodeRegistry& registry);

}  // namespace clp
