#include "clp/synth.hpp"

namespace clp {

std::vector<TemporalEdge> generate_planted(const SynthConfig& cfg) {
  if (cfg.nodes < 2) throw ParameterError("synth needs at least 2 nodes");
  if (cfg.types < 1) throw ParameterError("synth needs at least 1 edge type");
  if (cfg.snapshots < 2) throw ParameterError("synth needs at least 2 snapshots");

  Rng rng(cfg.seed);
  const auto n = static_cast<std::size_t>(cfg.nodes);
  std::vector<std::string> id(n), type(n);
  for (std::size_t i = 0; i < n; ++i) {
    id[i] = "n" + std::to_string(i);
    type[i] = i < n / 2 ? "user" : "item";
  }
  auto prob = [&](std::size_t a, std::size_t b) { return a % 2 == b % 2 ? cfg.p_in : cfg.p_out; };

  // state[r][pair] for pairs a < b in row-major upper-triangle order.
  const std::size_t pairs = n * (n - 1) / 2;
  std::vector<std::vector<char>> state(static_cast<std::size_t>(cfg.types),
                                       std::vector<char>(pairs));
  std::vector<TemporalEdge> edges;
  for (int t = 0; t < cfg.snapshots; ++t) {
    for (int r = 0; r < cfg.types; ++r) {
      auto& s = state[static_cast<std::size_t>(r)];
      const std::string etype = "r" + std::to_string(r);
      std::size_t k = 0;
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b, ++k) {
          if (t == 0 || rng.bernoulli(cfg.drift)) s[k] = rng.bernoulli(prob(a, b));
          if (s[k]) edges.push_back({id[a], id[b], type[a], type[b], etype, t});
        }
      }
    }
  }
  return edges;
}

TemporalHeterogeneousNetwork planted_network(const SynthConfig& cfg) {
  const auto edges = generate_planted(cfg);
  return clean_future_nodes(partition_snapshots(edges, PartitionPolicy::window_length(1)));
}

}  // namespace clp
