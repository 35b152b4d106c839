// Brute-force reference implementations used only by tests. These stay
// independent of the library code paths they check.
#pragma once

#include <algorithm>
#include <functional>
#include <set>
#include <utility>
#include <vector>

#include "aigrl/aig.hpp"
#include "aigrl/rng.hpp"

namespace oracle {

using aigrl::Aig;
using aigrl::GateKind;

// path existence via plain DFS over fanouts built on the fly
inline bool reaches(const Aig& g, int src, int dst) {
  std::vector<std::vector<int>> fanout(g.n());
  for (int v = 0; v < g.n(); ++v)
    for (int s = 0; s < arity(g.kind[v]); ++s) fanout[g.fanin[v][s]].push_back(v);
  std::vector<int> stack{src};
  std::set<int> seen{src};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    if (v == dst) return true;
    for (int u : fanout[v])
      if (seen.insert(u).second) stack.push_back(u);
  }
  return false;
}

inline bool has_cycle(const Aig& g) {
  // gray/black DFS over fanins
  std::vector<int> state(g.n(), 0);
  std::vector<std::pair<int, int>> stack;
  for (int start = 0; start < g.n(); ++start) {
    if (state[start]) continue;
    stack.push_back({start, 0});
    state[start] = 1;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      if (next < arity(g.kind[v])) {
        int f = g.fanin[v][next++];
        if (state[f] == 1) return true;
        if (state[f] == 0) {
          state[f] = 1;
          stack.push_back({f, 0});
        }
      } else {
        state[v] = 2;
        stack.pop_back();
      }
    }
  }
  return false;
}

// nodes within `hops-1` fanin edge steps of root (shortest distance), the
// membership set extract_khop_cone must reproduce
inline std::set<int> cone_members(const Aig& g, int root, int hops) {
  std::set<int> seen{root};
  std::vector<int> frontier{root};
  for (int d = 0; d + 1 < hops && !frontier.empty(); ++d) {
    std::vector<int> next;
    for (int v : frontier)
      for (int s = 0; s < arity(g.kind[v]); ++s) {
        int f = g.fanin[v][s];
        if (seen.insert(f).second) next.push_back(f);
      }
    frontier = std::move(next);
  }
  return seen;
}

// exact digraph isomorphism respecting gate kinds, by backtracking
inline bool isomorphic(const Aig& a, const Aig& b) {
  const int n = a.n();
  if (b.n() != n) return false;
  auto edge = [](const Aig& g, int u, int v) {
    for (int s = 0; s < arity(g.kind[v]); ++s)
      if (g.fanin[v][s] == u) return true;
    return false;
  };
  std::vector<int> map(n, -1), used(n, 0);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::function<bool(int)> go = [&](int pos) -> bool {
    if (pos == n) return true;
    const int u = order[pos];
    for (int v = 0; v < n; ++v) {
      if (used[v] || a.kind[u] != b.kind[v]) continue;
      bool ok = true;
      for (int w = 0; w < n && ok; ++w) {
        if (map[w] < 0) continue;
        if (edge(a, u, w) != edge(b, v, map[w])) ok = false;
        if (edge(a, w, u) != edge(b, map[w], v)) ok = false;
      }
      // self loops cannot occur in a DAG, skip the u==w case
      if (!ok) continue;
      map[u] = v;
      used[v] = 1;
      if (go(pos + 1)) return true;
      map[u] = -1;
      used[v] = 0;
    }
    return false;
  };
  return go(0);
}

// number of kind-preserving automorphisms (1 means rigid)
inline int automorphism_count(const Aig& g) {
  const int n = g.n();
  auto edge = [](const Aig& gg, int u, int v) {
    for (int s = 0; s < arity(gg.kind[v]); ++s)
      if (gg.fanin[v][s] == u) return true;
    return false;
  };
  std::vector<int> map(n, -1), used(n, 0);
  int count = 0;
  std::function<void(int)> go = [&](int pos) {
    if (pos == n) {
      ++count;
      return;
    }
    for (int v = 0; v < n; ++v) {
      if (used[v] || g.kind[pos] != g.kind[v]) continue;
      bool ok = true;
      for (int w = 0; w < n && ok; ++w) {
        if (map[w] < 0) continue;
        if (edge(g, pos, w) != edge(g, v, map[w])) ok = false;
        if (edge(g, w, pos) != edge(g, map[w], v)) ok = false;
      }
      if (!ok) continue;
      map[pos] = v;
      used[v] = 1;
      go(pos + 1);
      map[pos] = -1;
      used[v] = 0;
    }
  };
  go(0);
  return count;
}

// random topological reordering of the same DAG; returns the permuted graph
// and perm with perm[old] = new
inline std::pair<Aig, std::vector<int>> random_topo_permutation(const Aig& g, aigrl::Rng& rng,
                                                                bool keep_pi_order = true) {
  const int n = g.n();
  std::vector<int> remaining_fanins(n);
  std::vector<std::vector<int>> fanout(n);
  for (int v = 0; v < n; ++v) {
    remaining_fanins[v] = arity(g.kind[v]);
    for (int s = 0; s < arity(g.kind[v]); ++s) fanout[g.fanin[v][s]].push_back(v);
  }
  std::vector<int> ready;
  for (int v = 0; v < n; ++v)
    if (remaining_fanins[v] == 0) ready.push_back(v);
  std::vector<int> order;  // order[new] = old
  while (!ready.empty()) {
    int pick;
    if (keep_pi_order) {
      // choose randomly but never let a PI overtake an earlier PI
      std::vector<int> candidates;
      int first_pi = -1;
      for (int v : ready)
        if (g.kind[v] == GateKind::PI && (first_pi < 0 || v < first_pi)) first_pi = v;
      for (int v : ready)
        if (g.kind[v] != GateKind::PI || v == first_pi) candidates.push_back(v);
      pick = candidates[rng.index(static_cast<int>(candidates.size()))];
    } else {
      pick = ready[rng.index(static_cast<int>(ready.size()))];
    }
    ready.erase(std::find(ready.begin(), ready.end(), pick));
    order.push_back(pick);
    for (int u : fanout[pick])
      if (--remaining_fanins[u] == 0) ready.push_back(u);
  }
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[order[i]] = i;
  Aig out;
  for (int i = 0; i < n; ++i) {
    const int old = order[i];
    int f0 = -1, f1 = -1;
    if (arity(g.kind[old]) > 0) f0 = perm[g.fanin[old][0]];
    if (arity(g.kind[old]) > 1) f1 = perm[g.fanin[old][1]];
    out.add_gate(g.kind[old], f0, f1);
  }
  finalize(out);
  return {out, perm};
}

}  // namespace oracle
