#include "clp/data.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <set>
#include <unordered_set>

namespace clp {

namespace {

std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}


// Samples `count` distinct non-self pairs over [0, n) avoiding `blocked`.
// Sampled pairs are added to `blocked`.
std::vector<NodePair> sample_absent_pairs(std::size_t n, std::size_t count, LinkSet& blocked,
                                          Rng& rng, const char* split_name) {
  std::vector<NodePair> out;
  if (count == 0) return out;
  const std::uint64_t total = n < 2 ? 0 : static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t available = total - std::min<std::uint64_t>(total, blocked.size());
  if (count > available) {
    throw NegativeExhaustionError(std::string(split_name) + ": requested " +
                                  std::to_string(count) + " negatives but only " +
                                  std::to_string(available) + " absent pairs exist");
  }
  out.reserve(count);
  if (2 * count > available) {
    // Dense regime: enumerate candidates and take a random prefix.
    std::vector<NodePair> candidates;
    candidates.reserve(available);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        const auto ia = static_cast<NodeIndex>(a);
        const auto ib = static_cast<NodeIndex>(b);
        if (!blocked.contains(ia, ib)) candidates.emplace_back(ia, ib);
      }
    }
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + rng.below(candidates.size() - i);
      std::swap(candidates[i], candidates[j]);
      out.push_back(candidates[i]);
      blocked.insert(candidates[i].first, candidates[i].second);
    }
    return out;
  }
  while (out.size() < count) {
    const auto a = static_cast<NodeIndex>(rng.below(n));
    const auto b = static_cast<NodeIndex>(rng.below(n));
    if (a == b) continue;
    if (blocked.insert(a, b)) out.push_back(normalized(a, b));
  }
  return out;
}

}  // namespace

std::vector<TemporalEdge> parse_edges(std::istream& source, const ColumnMapping& schema) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<TemporalEdge> edges;

  // Header.
  while (std::getline(source, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) return edges;

  const auto header = split_row(line);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[std::string(trim(header[i]))] = i;
  auto col = [&](const std::string& name) {
    auto it = column.find(name);
    if (it == column.end()) {
      throw ParseError("line " + std::to_string(line_no) + ": missing column '" + name + "'");
    }
    return it->second;
  };
  const std::size_t c_src = col(schema.src), c_dst = col(schema.dst),
                    c_st = col(schema.src_type), c_dt = col(schema.dst_type),
                    c_et = col(schema.edge_type), c_ts = col(schema.timestamp);

  std::set<std::tuple<std::string, std::string, std::string, std::int64_t>> seen;
  std::unordered_map<std::string, std::string> node_type;
  auto check_type = [&](const std::string& node, const std::string& type) {
    auto [it, fresh] = node_type.emplace(node, type);
    if (!fresh && it->second != type) {
      throw SchemaConflictError("line " + std::to_string(line_no) + ": node '" + node +
                                "' has types '" + it->second + "' and '" + type + "'");
    }
  };

  while (std::getline(source, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(cells.size()));
    }
    TemporalEdge e;
    e.src = trim(cells[c_src]);
    e.dst = trim(cells[c_dst]);
    e.src_type = trim(cells[c_st]);
    e.dst_type = trim(cells[c_dt]);
    e.edge_type = trim(cells[c_et]);
    const auto ts = trim(cells[c_ts]);
    const auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), e.timestamp);
    if (ts.empty() || ec != std::errc{} || ptr != ts.data() + ts.size() || e.timestamp < 0) {
      throw ParseError("line " + std::to_string(line_no) + ": timestamp '" + std::string(ts) +
                       "' is not a non-negative integer");
    }
    if (e.src.empty() || e.dst.empty() || e.edge_type.empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": empty identifier");
    }
    check_type(e.src, e.src_type);
    check_type(e.dst, e.dst_type);
    if (e.dst < e.src) {
      std::swap(e.src, e.dst);
      std::swap(e.src_type, e.dst_type);
    }
    if (seen.emplace(e.src, e.dst, e.edge_type, e.timestamp).second) {
      edges.push_back(std::move(e));
    }
  }
  return edges;
}

NodeIndex NodeRegistry::intern(const std::string& id, const std::string& type) {
  auto [it, fresh] = index_.emplace(id, static_cast<NodeIndex>(nodes_.size()));
  if (fresh) {
    nodes_.push_back({id, type});
  } else if (nodes_[static_cast<std::size_t>(it->second)].type != type) {
    throw SchemaConflictError("node '" + id + "' has types '" +
                              nodes_[static_cast<std::size_t>(it->second)].type + "' and '" +
                              type + "'");
  }
  return it->second;
}

NodeIndex NodeRegistry::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw LookupError("unknown node '" + id + "'");
  return it->second;
}

bool SnapshotGraph::contains(NodeIndex v) const {
  return std::binary_search(nodes.begin(), nodes.end(), v);
}

namespace {

void finalize_snapshot(SnapshotGraph& g) {
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  g.nodes.clear();
  for (const auto& e : g.edges) {
    g.nodes.push_back(e.src);
    g.nodes.push_back(e.dst);
  }
  std::sort(g.nodes.begin(), g.nodes.end());
  g.nodes.erase(std::unique(g.nodes.begin(), g.nodes.end()), g.nodes.end());
}

}  // namespace

TemporalHeterogeneousNetwork partition_snapshots(std::span<const TemporalEdge> edges,
                                                 PartitionPolicy policy) {
  if (policy.value <= 0 ||
      (policy.kind == PartitionPolicy::Kind::kSnapshotCount && policy.value < 2)) {
    throw ParameterError("partition policy needs window > 0 or snapshot count >= 2");
  }
  if (edges.empty()) throw InsufficientSpanError("no edges to partition");

  auto [lo, hi] = std::minmax_element(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
    return a.timestamp < b.timestamp;
  });
  const std::int64_t t_min = lo->timestamp;
  const std::int64_t t_max = hi->timestamp;
  const std::int64_t span = t_max - t_min + 1;
  const std::int64_t window = policy.kind == PartitionPolicy::Kind::kWindowLength
                                  ? policy.value
                                  : (span + policy.value - 1) / policy.value;
  const std::int64_t count = (t_max - t_min) / window + 1;

  TemporalHeterogeneousNetwork thn;
  thn.t_min = t_min;
  thn.window = window;
  thn.snapshots.resize(static_cast<std::size_t>(count));
  for (std::int64_t t = 0; t < count; ++t) {
    auto& g = thn.snapshots[static_cast<std::size_t>(t)];
    g.index = static_cast<int>(t + 1);
    g.start = t_min + t * window;
    g.end = g.start + window;
  }

  std::unordered_map<std::string, std::int32_t> type_index;
  for (const auto& e : edges) {
    const NodeIndex a = thn.registry.intern(e.src, e.src_type);
    const NodeIndex b = thn.registry.intern(e.dst, e.dst_type);
    auto [it, fresh] = type_index.emplace(e.edge_type, static_cast<std::int32_t>(thn.edge_types.size()));
    if (fresh) thn.edge_types.push_back(e.edge_type);
    const auto [s, d] = normalized(a, b);
    thn.snapshots[static_cast<std::size_t>((e.timestamp - t_min) / window)].edges.push_back(
        {s, d, it->second});
  }
  std::size_t nonempty = 0;
  for (auto& g : thn.snapshots) {
    finalize_snapshot(g);
    nonempty += g.empty() ? 0 : 1;
  }
  if (nonempty < 2) {
    throw InsufficientSpanError("edges span " + std::to_string(nonempty) +
                                " nonempty snapshot(s); at least 2 are required");
  }
  return thn;
}

std::int32_t TypedSubgraph::local_of(NodeIndex global) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), global);
  if (it == nodes.end() || *it != global) return -1;
  return static_cast<std::int32_t>(it - nodes.begin());
}

std::vector<TypedSubgraph> build_typed_subgraphs(const SnapshotGraph& snapshot,
                                                 int num_edge_types) {
  std::vector<std::vector<SnapshotEdge>> by_type(static_cast<std::size_t>(num_edge_types));
  for (const auto& e : snapshot.edges) {
    if (e.type < 0 || e.type >= num_edge_types) {
      throw ConfigError("snapshot " + std::to_string(snapshot.index) + " has edge type " +
                        std::to_string(e.type) + " outside the " +
                        std::to_string(num_edge_types) + " configured types");
    }
    by_type[static_cast<std::size_t>(e.type)].push_back(e);
  }

  std::vector<TypedSubgraph> out(static_cast<std::size_t>(num_edge_types));
  for (int r = 0; r < num_edge_types; ++r) {
    auto& sub = out[static_cast<std::size_t>(r)];
    const auto& typed = by_type[static_cast<std::size_t>(r)];
    sub.snapshot = snapshot.index;
    sub.edge_type = r;
    sub.edge_count = typed.size();
    for (const auto& e : typed) {
      sub.nodes.push_back(e.src);
      sub.nodes.push_back(e.dst);
    }
    std::sort(sub.nodes.begin(), sub.nodes.end());
    sub.nodes.erase(std::unique(sub.nodes.begin(), sub.nodes.end()), sub.nodes.end());

    std::vector<std::vector<std::int32_t>> adj(sub.nodes.size());
    for (std::size_t i = 0; i < sub.nodes.size(); ++i) adj[i].push_back(static_cast<std::int32_t>(i));
    for (const auto& e : typed) {
      const auto a = sub.local_of(e.src);
      const auto b = sub.local_of(e.dst);
      if (a == b) continue;
      adj[static_cast<std::size_t>(a)].push_back(b);
      adj[static_cast<std::size_t>(b)].push_back(a);
    }
    sub.offsets.assign(1, 0);
    for (auto& list : adj) {
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
      sub.neighbors.insert(sub.neighbors.end(), list.begin(), list.end());
      sub.offsets.push_back(static_cast<std::int32_t>(sub.neighbors.size()));
      sub.degree.push_back(static_cast<std::int32_t>(list.size()) - 1);
    }
  }
  return out;
}

TemporalHeterogeneousNetwork clean_future_nodes(const TemporalHeterogeneousNetwork& thn) {
  const std::size_t n = thn.registry.size();
  std::vector<char> seen(n, 0);
  for (const auto& g : thn.training()) {
    for (NodeIndex v : g.nodes) seen[static_cast<std::size_t>(v)] = 1;
  }

  std::vector<NodeIndex> remap(n, -1);
  TemporalHeterogeneousNetwork out;
  out.edge_types = thn.edge_types;
  out.t_min = thn.t_min;
  out.window = thn.window;
  for (std::size_t v = 0; v < n; ++v) {
    if (!seen[v]) continue;
    const auto& info = thn.registry.info(static_cast<NodeIndex>(v));
    remap[v] = out.registry.intern(info.id, info.type);
  }

  out.snapshots.reserve(thn.snapshots.size());
  for (const auto& g : thn.snapshots) {
    SnapshotGraph h;
    h.index = g.index;
    h.start = g.start;
    h.end = g.end;
    for (const auto& e : g.edges) {
      const NodeIndex a = remap[static_cast<std::size_t>(e.src)];
      const NodeIndex b = remap[static_cast<std::size_t>(e.dst)];
      if (a < 0 || b < 0) continue;
      const auto [s, d] = normalized(a, b);
      h.edges.push_back({s, d, e.type});
    }
    finalize_snapshot(h);
    out.snapshots.push_back(std::move(h));
  }
  return out;
}

LinkSet links_of(std::span<const SnapshotGraph> snapshots) {
  LinkSet links;
  for (const auto& g : snapshots) {
    for (const auto& e : g.edges) {
      if (e.src != e.dst) links.insert(e.src, e.dst);
    }
  }
  return links;
}

std::vector<NodePair> link_pairs(const SnapshotGraph& snapshot) {
  std::vector<NodePair> pairs;
  for (const auto& e : snapshot.edges) {
    if (e.src != e.dst) pairs.emplace_back(e.src, e.dst);
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

EvalSplit make_eval_split(const TemporalHeterogeneousNetwork& thn, std::uint64_t seed,
                          int neg_ratio) {
  if (neg_ratio < 1) throw ParameterError("neg_ratio must be a positive integer");
  if (thn.snapshots.size() < 2) throw InsufficientSpanError("network has no evaluation snapshot");

  auto positives = link_pairs(thn.evaluation());
  if (positives.empty()) {
    throw InsufficientSpanError("evaluation snapshot has no links after cleaning");
  }

  EvalSplit split;
  split.seed = seed;
  split.neg_ratio = neg_ratio;

  Rng rng(seed);
  rng.shuffle(positives);
  const std::size_t total = positives.size();
  const std::size_t n_val = total / 5;
  const std::size_t n_train = total / 5;
  split.val_pos.assign(positives.begin(), positives.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.train_pos.assign(positives.begin() + static_cast<std::ptrdiff_t>(n_val),
                         positives.begin() + static_cast<std::ptrdiff_t>(n_val + n_train));
  split.test_pos.assign(positives.begin() + static_cast<std::ptrdiff_t>(n_val + n_train),
                        positives.end());

  const std::size_t n = thn.registry.size();
  const auto ratio = static_cast<std::size_t>(neg_ratio);

  LinkSet history = links_of(thn.training());
  split.train_neg = sample_absent_pairs(n, ratio * split.train_pos.size(), history, rng, "train");

  LinkSet future = links_of(std::span(&thn.evaluation(), 1));
  split.val_neg = sample_absent_pairs(n, ratio * split.val_pos.size(), future, rng, "validation");
  split.test_neg = sample_absent_pairs(n, ratio * split.test_pos.size(), future, rng, "test");
  return split;
}

FeatureTable init_features(std::size_t num_nodes, int dim, std::uint64_t seed) {
  if (dim < 1) throw ParameterError("feature dimension must be >= 1");
  FeatureTable table;
  table.dim = dim;
  table.trainable = true;
  table.matrix.resize(static_cast<Eigen::Index>(num_nodes), dim);
  const double bound = std::sqrt(6.0 / dim);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < table.matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) table.matrix(i, j) = rng.uniform(-bound, bound);
  }
  return table;
}

}  // namespace clp
