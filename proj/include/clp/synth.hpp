#pragma once

#include <cstdint>
#include <vector>

#include "clp/data.hpp"

namespace clp {

// Two planted communities; every edge type is drawn independently per pair.
struct SynthConfig {
  int nodes = 300;
  int types = 3;
  int snapshots = 5;  // total, including the evaluation snapshot
  std::uint64_t seed = 7;
  double p_in = 0.2;
  double p_out = 0.01;
  double drift = 0.05;  // chance a pair redraws its state at each step
};

// Edges with timestamp = snapshot ordinal - 1. Node "n<i>" is in community
// i % 2 and has node type "user" or "item" by i < nodes / 2.
std::vector<TemporalEdge> generate_planted(const SynthConfig& cfg);

// The generated edges partitioned one snapshot per timestamp, future-only
// nodes removed.
TemporalHeterogeneousNetwork planted_network(const SynthConfig& cfg);

}  // namespace clp
