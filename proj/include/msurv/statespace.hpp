#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace msurv {

// States are dense integers 1..s. Absorbing states are exactly the vertices
// with out-degree zero; every non-absorbing state must reach one.
struct TransitionGraph {
  int num_states = 0;
  std::vector<std::pair<int, int>> edges;  // sorted, unique, no self-loops
  std::vector<std::vector<int>> out;       // out[i]: destinations of state i
  std::vector<bool> absorbing;             // absorbing[i], index 0 unused

  bool is_absorbing(int i) const { return absorbing[i]; }
  bool has_edge(int i, int ip) const;
  std::vector<int> absorbing_states() const;
};

TransitionGraph build_graph(int num_states, std::vector<std::pair<int, int>> edges);

// Builtins: survival, illness_death, bidirectional_illness_death,
// competing_risks(L), comorbidity(L), cav.
TransitionGraph build_graph(const std::string& builtin);

struct Partition {
  std::vector<std::vector<int>> blocks;  // disjoint, cover 1..s
  std::vector<int> representatives;      // one state per block

  int num_blocks() const { return static_cast<int>(blocks.size()); }
  // Block index (0-based) of a state; requires states 1..s covered.
  int block_of(int state) const;
};

Partition degenerate_partition(const TransitionGraph& g);

struct ValidationReport {
  bool valid = true;
  std::vector<std::string> errors;
  // Ordered block pair -> cross edges between the blocks.
  std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> cross_edges;
};

ValidationReport validate(const TransitionGraph& g, const Partition& b);

// Counts per state; result is 1-based with index 0 unused.
std::vector<int> configuration_of(const std::vector<int>& states, int num_states);

}  // namespace msurv
