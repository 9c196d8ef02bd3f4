#pragma once

#include <vector>

#include "msurv/measure.hpp"

namespace msurv::test {

// All admissible one-event successors y' of the unit-state vector y: every
// combination where one or more units of a single block pair move along
// their edges, everyone else staying put.
inline std::vector<std::vector<int>> enumerate_successors(
    const Model& m, const std::vector<int>& y) {
  std::vector<std::vector<int>> out;
  for (int p = 0; p < m.num_pairs(); ++p) {
    const BlockPair& bp = m.pair(p);
    std::vector<int> units;  // indices of units sitting in a source state
    for (std::size_t u = 0; u < y.size(); ++u)
      if (bp.source_slot[y[u]] >= 0) units.push_back(static_cast<int>(u));
    if (units.empty()) continue;

    // Odometer over per-unit choices: 0 = stay, 1.. = destination index.
    std::vector<int> choice(units.size(), 0);
    for (;;) {
      // advance
      std::size_t pos = 0;
      while (pos < units.size()) {
        const int slot = bp.source_slot[y[units[pos]]];
        const int nopt = static_cast<int>(bp.dests[slot].size());
        if (++choice[pos] <= nopt) break;
        choice[pos] = 0;
        ++pos;
      }
      if (pos == units.size()) break;
      std::vector<int> yp = y;
      bool any = false;
      for (std::size_t k = 0; k < units.size(); ++k) {
        if (choice[k] == 0) continue;
        const int slot = bp.source_slot[y[units[k]]];
        yp[units[k]] = bp.dests[slot][choice[k] - 1];
        any = true;
      }
      if (any) out.push_back(std::move(yp));
    }
  }
  return out;
}

}  // namespace msurv::test
