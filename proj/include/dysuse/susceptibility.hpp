#pragma once

#include <vector>

#include "dysuse/common.hpp"

namespace dysuse {

// Per-node, per-timestamp influenced probabilities for one seed set.
// values[t][v] is the probability that v is influenced by the end of
// snapshot t; rows are monotone non-decreasing in t and exactly 1 at seeds.
struct SusceptibilityTable {
  std::vector<std::vector<double>> values;  // [T][N]
  std::size_t n_simulations = 0;            // 0 marks an exact table
  std::vector<NodeId> seeds;

  int n_timestamps() const { return static_cast<int>(values.size()); }
  NodeId n_nodes() const {
    return values.empty() ? 0 : static_cast<NodeId>(values.front().size());
  }
  const std::vector<double>& final_values() const { return values.back(); }

  // Expected number of influenced nodes at the final timestamp.
  double influence_spread() const {
    double s = 0.0;
    for (double x : final_values()) s += x;
    return s;
  }
};

}  // namespace dysuse
