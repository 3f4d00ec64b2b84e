#pragma once

#include <sstream>
#include <vector>

#include "clp/data.hpp"
#include "clp/spatial.hpp"

namespace clp::testing {

// Snapshot from (src, dst, type) triples over global indices.
inline SnapshotGraph snapshot(std::vector<SnapshotEdge> edges, int index = 1) {
  SnapshotGraph g;
  g.index = index;
  for (auto& e : edges) {
    auto [a, b] = normalized(e.src, e.dst);
    e.src = a;
    e.dst = b;
    g.nodes.push_back(a);
    g.nodes.push_back(b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::sort(g.nodes.begin(), g.nodes.end());
  g.nodes.erase(std::unique(g.nodes.begin(), g.nodes.end()), g.nodes.end());
  g.edges = std::move(edges);
  return g;
}

inline TypedSubgraph typed(std::vector<SnapshotEdge> edges, int r = 0, int types = 1) {
  return build_typed_subgraphs(snapshot(std::move(edges)), types)[static_cast<std::size_t>(r)];
}

inline std::vector<TemporalEdge> parse(const std::string& csv) {
  std::istringstream in(csv);
  return parse_edges(in);
}

inline Mat random_mat(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

inline NodeLevelParams random_node_params(int d, int heads, Rng& rng, double scale = 0.5) {
  NodeLevelParams p;
  for (int k = 0; k < heads; ++k) {
    p.W.push_back(random_mat(d, d, rng, scale));
    p.A.push_back(random_mat(1, 2 * d, rng, scale));
  }
  return p;
}

// Random undirected graph over n nodes; every node gets at least one edge.
inline std::vector<SnapshotEdge> random_edges(int n, double p, Rng& rng, int types = 1) {
  std::vector<SnapshotEdge> edges;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      for (int r = 0; r < types; ++r) {
        if (rng.bernoulli(p)) edges.push_back({a, b, r});
      }
    }
    if (a + 1 < n) edges.push_back({a, a + 1, static_cast<std::int32_t>(rng.below(types))});
  }
  return edges;
}

}  // namespace clp::testing
