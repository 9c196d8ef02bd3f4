#include "msurv/statespace.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <stdexcept>

namespace msurv {

bool TransitionGraph::has_edge(int i, int ip) const {
  if (i < 1 || i > num_states || ip < 1 || ip > num_states) return false;
  const auto& o = out[i];
  return std::find(o.begin(), o.end(), ip) != o.end();
}

std::vector<int> TransitionGraph::absorbing_states() const {
  std::vector<int> a;
  for (int i = 1; i <= num_states; ++i)
    if (absorbing[i]) a.push_back(i);
  return a;
}

TransitionGraph build_graph(int num_states, std::vector<std::pair<int, int>> edges) {
  if (num_states < 2)
    throw std::invalid_argument("graph: need at least 2 states");
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  TransitionGraph g;
  g.num_states = num_states;
  g.out.assign(num_states + 1, {});
  for (const auto& [i, ip] : edges) {
    if (i < 1 || i > num_states || ip < 1 || ip > num_states)
      throw std::invalid_argument("graph: edge endpoint out of range");
    if (i == ip) throw std::invalid_argument("graph: self-loops are not allowed");
    g.out[i].push_back(ip);
  }
  g.edges = std::move(edges);
  g.absorbing.assign(num_states + 1, false);
  bool any_absorbing = false;
  for (int i = 1; i <= num_states; ++i) {
    g.absorbing[i] = g.out[i].empty();
    any_absorbing |= g.absorbing[i];
  }
  if (!any_absorbing)
    throw std::invalid_argument("graph: no absorbing state (every state has outgoing edges)");

  // Every non-absorbing state must have a directed path to an absorbing state.
  std::vector<std::vector<int>> in(num_states + 1);
  for (const auto& [i, ip] : g.edges) in[ip].push_back(i);
  std::vector<bool> reaches(num_states + 1, false);
  std::queue<int> q;
  for (int i = 1; i <= num_states; ++i)
    if (g.absorbing[i]) {
      reaches[i] = true;
      q.push(i);
    }
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int u : in[v])
      if (!reaches[u]) {
        reaches[u] = true;
        q.push(u);
      }
  }
  for (int i = 1; i <= num_states; ++i)
    if (!reaches[i])
      throw std::invalid_argument("graph: state " + std::to_string(i) +
                                  " cannot reach an absorbing state");
  return g;
}

namespace {

// Parses names of the form base or base(L).
bool parse_sized(const std::string& name, const std::string& base, int& L) {
  if (name.size() <= base.size() + 2 || name.compare(0, base.size(), base) != 0)
    return false;
  if (name[base.size()] != '(' || name.back() != ')') return false;
  L = std::stoi(name.substr(base.size() + 1, name.size() - base.size() - 2));
  return true;
}

}  // namespace

TransitionGraph build_graph(const std::string& builtin) {
  int L = 0;
  if (builtin == "survival") return build_graph(2, {{1, 2}});
  if (builtin == "illness_death") return build_graph(3, {{1, 2}, {1, 3}, {2, 3}});
  if (builtin == "bidirectional_illness_death")
    return build_graph(3, {{1, 2}, {2, 1}, {1, 3}, {2, 3}});
  if (builtin == "cav")
    return build_graph(4, {{1, 2}, {2, 1}, {2, 3}, {3, 2}, {1, 4}, {2, 4}, {3, 4}});
  if (parse_sized(builtin, "competing_risks", L)) {
    if (L < 1) throw std::invalid_argument("competing_risks: need L >= 1");
    std::vector<std::pair<int, int>> e;
    for (int k = 1; k <= L; ++k) e.push_back({1, 1 + k});
    return build_graph(L + 1, std::move(e));
  }
  if (parse_sized(builtin, "comorbidity", L)) {
    // L binary risk processes; state = bitmask of experienced risks, 1-based.
    if (L < 1 || L > 16) throw std::invalid_argument("comorbidity: need 1 <= L <= 16");
    const int s = 1 << L;
    std::vector<std::pair<int, int>> e;
    for (int mask = 0; mask < s; ++mask)
      for (int r = 0; r < L; ++r)
        if (!(mask & (1 << r))) e.push_back({mask + 1, (mask | (1 << r)) + 1});
    return build_graph(s, std::move(e));
  }
  throw std::invalid_argument("unknown builtin graph: " + builtin);
}

int Partition::block_of(int state) const {
  for (int j = 0; j < num_blocks(); ++j)
    for (int l : blocks[j])
      if (l == state) return j;
  throw std::out_of_range("partition: state " + std::to_string(state) +
                          " not in any block");
}

Partition degenerate_partition(const TransitionGraph& g) {
  Partition b;
  for (int i = 1; i <= g.num_states; ++i) {
    b.blocks.push_back({i});
    b.representatives.push_back(i);
  }
  return b;
}

ValidationReport validate(const TransitionGraph& g, const Partition& b) {
  ValidationReport rep;
  auto fail = [&rep](const std::string& msg) {
    rep.valid = false;
    rep.errors.push_back(msg);
  };

  std::vector<int> owner(g.num_states + 1, -1);
  for (int j = 0; j < b.num_blocks(); ++j) {
    if (b.blocks[j].empty()) fail("block " + std::to_string(j + 1) + " is empty");
    for (int l : b.blocks[j]) {
      if (l < 1 || l > g.num_states) {
        fail("block state " + std::to_string(l) + " out of range");
        continue;
      }
      if (owner[l] != -1)
        fail("state " + std::to_string(l) + " appears in more than one block");
      owner[l] = j;
    }
  }
  for (int i = 1; i <= g.num_states; ++i)
    if (owner[i] == -1) fail("state " + std::to_string(i) + " not covered by any block");

  if (static_cast<int>(b.representatives.size()) != b.num_blocks()) {
    fail("representatives must name one state per block");
  } else {
    for (int j = 0; j < b.num_blocks(); ++j) {
      const int r = b.representatives[j];
      if (std::find(b.blocks[j].begin(), b.blocks[j].end(), r) == b.blocks[j].end())
        fail("representative " + std::to_string(r) + " is not in block " +
             std::to_string(j + 1));
    }
  }

  // No block may mix absorbing and non-absorbing states.
  for (int j = 0; j < b.num_blocks(); ++j) {
    bool has_abs = false, has_live = false;
    for (int l : b.blocks[j]) {
      if (l < 1 || l > g.num_states) continue;
      (g.is_absorbing(l) ? has_abs : has_live) = true;
    }
    if (has_abs && has_live)
      fail("block " + std::to_string(j + 1) +
           " mixes absorbing and non-absorbing states");
  }

  if (rep.valid) {
    for (const auto& [i, ip] : g.edges)
      rep.cross_edges[{owner[i], owner[ip]}].push_back({i, ip});
  }
  return rep;
}

std::vector<int> configuration_of(const std::vector<int>& states, int num_states) {
  std::vector<int> x(num_states + 1, 0);
  for (int y : states) {
    if (y < 1 || y > num_states)
      throw std::out_of_range("configuration_of: state out of range");
    ++x[y];
  }
  return x;
}

}  // namespace msurv
