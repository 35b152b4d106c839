#include "aigrl/aig.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "aigrl/rng.hpp"

namespace aigrl {

void finalize(Aig& aig) {
  const int n = aig.n();
  aig.level.assign(n, 0);
  aig.pis.clear();
  aig.pos.clear();
  std::vector<int> fanout_count(n, 0);
  for (int g = 0; g < n; ++g) {
    const GateKind k = aig.kind[g];
    const int want = arity(k);
    for (int s = 0; s < 2; ++s) {
      const int f = aig.fanin[g][s];
      if (s < want) {
        if (f < 0 || f >= g)
          throw ArgumentError("gate " + std::to_string(g) + ": fanin " + std::to_string(f) +
                              " must precede its consumer");
        fanout_count[f]++;
        aig.level[g] = std::max(aig.level[g], aig.level[f] + 1);
      } else if (f != -1) {
        throw ArgumentError("gate " + std::to_string(g) + ": unexpected fanin in slot " +
                            std::to_string(s));
      }
    }
    if (k == GateKind::PI) aig.pis.push_back(g);
  }
  for (int g = 0; g < n; ++g)
    if (fanout_count[g] == 0) aig.pos.push_back(g);
}

void validate(const Aig& aig, int max_gates) {
  if (max_gates >= 0 && aig.n() > max_gates)
    throw ArgumentError("gate count " + std::to_string(aig.n()) + " exceeds cap " +
                        std::to_string(max_gates));
  Aig copy = aig;
  finalize(copy);
  if (copy.level != aig.level) throw ArgumentError("stored levels are inconsistent");
  if (copy.pis != aig.pis) throw ArgumentError("stored pi list is inconsistent");
  if (copy.pos != aig.pos) throw ArgumentError("stored po list is inconsistent");
}

// ---------------------------------------------------------------------------
// AIGER
// ---------------------------------------------------------------------------

namespace {

struct AndDef {
  int rhs0 = 0, rhs1 = 0;
  int line = 0;
  int node = -1;
  bool in_progress = false;
};

struct AigerBuilder {
  Aig aig;
  std::map<int, int> pi_node;     // var -> node
  std::map<int, AndDef> and_def;  // var -> definition
  std::map<int, int> not_node;    // var -> NOT node above it

  int resolve_var(int var, int at_line) {
    if (auto it = pi_node.find(var); it != pi_node.end()) return it->second;
    auto it = and_def.find(var);
    if (it == and_def.end())
      throw ParseError(at_line, "literal references undefined variable " + std::to_string(var));
    AndDef& d = it->second;
    if (d.node >= 0) return d.node;
    if (d.in_progress) throw ParseError(d.line, "cyclic AND definition");
    d.in_progress = true;
    const int f0 = resolve_lit(d.rhs0, d.line);
    const int f1 = resolve_lit(d.rhs1, d.line);
    d.in_progress = false;
    d.node = aig.add_gate(GateKind::AND2, f0, f1);
    return d.node;
  }

  int resolve_lit(int lit, int at_line) {
    if (lit < 2) throw ParseError(at_line, "constant literal " + std::to_string(lit) + " unsupported");
    const int var = lit >> 1;
    const int node = resolve_var(var, at_line);
    if (!(lit & 1)) return node;
    if (auto it = not_node.find(var); it != not_node.end()) return it->second;
    const int inv = aig.add_gate(GateKind::NOT, node);
    not_node.emplace(var, inv);
    return inv;
  }
};

std::vector<long> parse_int_line(const std::string& line, int line_no, size_t expect) {
  std::istringstream ss(line);
  std::vector<long> out;
  long v;
  while (ss >> v) out.push_back(v);
  std::string rest;
  if (ss.bad() || (ss.clear(), ss >> rest))
    throw ParseError(line_no, "unexpected token in '" + line + "'");
  if (expect != 0 && out.size() != expect)
    throw ParseError(line_no, "expected " + std::to_string(expect) + " integers, got " +
                                  std::to_string(out.size()));
  return out;
}

}  // namespace

Aig parse_aiger(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto next_line = [&]() -> std::string {
    if (!std::getline(in, line)) throw ParseError(line_no + 1, "unexpected end of file");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  std::string header = next_line();
  std::istringstream hs(header);
  std::string magic;
  hs >> magic;
  if (magic != "aag") throw ParseError(1, "expected 'aag' header");
  long m, i_cnt, l_cnt, o_cnt, a_cnt;
  if (!(hs >> m >> i_cnt >> l_cnt >> o_cnt >> a_cnt))
    throw ParseError(1, "malformed 'aag' header");
  std::string trail;
  if (hs >> trail) throw ParseError(1, "trailing tokens in header");
  if (m < 0 || i_cnt < 0 || l_cnt < 0 || o_cnt < 0 || a_cnt < 0)
    throw ParseError(1, "negative count in header");
  if (l_cnt > 0) throw ParseError(1, "latches unsupported");
  if (m < i_cnt + a_cnt) throw ParseError(1, "header max index smaller than I+A");

  AigerBuilder b;
  for (long i = 0; i < i_cnt; ++i) {
    auto v = parse_int_line(next_line(), line_no, 1);
    const long lit = v[0];
    if (lit < 2 || (lit & 1) || (lit >> 1) > m)
      throw ParseError(line_no, "bad input literal " + std::to_string(lit));
    const int var = static_cast<int>(lit >> 1);
    if (b.pi_node.count(var)) throw ParseError(line_no, "duplicate input variable");
    b.pi_node.emplace(var, b.aig.add_gate(GateKind::PI));
  }
  struct OutRef {
    int lit, line;
  };
  std::vector<OutRef> outs;
  for (long i = 0; i < o_cnt; ++i) {
    auto v = parse_int_line(next_line(), line_no, 1);
    outs.push_back({static_cast<int>(v[0]), line_no});
  }
  for (long i = 0; i < a_cnt; ++i) {
    auto v = parse_int_line(next_line(), line_no, 3);
    const long lhs = v[0];
    if (lhs < 2 || (lhs & 1) || (lhs >> 1) > m)
      throw ParseError(line_no, "bad AND literal " + std::to_string(lhs));
    const int var = static_cast<int>(lhs >> 1);
    if (b.pi_node.count(var) || b.and_def.count(var))
      throw ParseError(line_no, "variable " + std::to_string(var) + " redefined");
    AndDef d;
    d.rhs0 = static_cast<int>(v[1]);
    d.rhs1 = static_cast<int>(v[2]);
    d.line = line_no;
    b.and_def.emplace(var, d);
  }
  // symbol table and comments, if any, are ignored

  for (auto& [var, def] : b.and_def) b.resolve_var(var, def.line);
  for (const auto& o : outs) b.resolve_lit(o.lit, o.line);

  finalize(b.aig);
  return b.aig;
}

std::string write_aiger(const Aig& aig) {
  const int n = aig.n();
  std::vector<int> lit(n, -1);
  int next_var = 1;
  int n_ands = 0;
  for (int g = 0; g < n; ++g) {
    switch (aig.kind[g]) {
      case GateKind::PI:
        lit[g] = 2 * next_var++;
        break;
      case GateKind::AND2:
        lit[g] = 2 * next_var++;
        ++n_ands;
        break;
      case GateKind::NOT:
        lit[g] = lit[aig.fanin[g][0]] ^ 1;
        break;
    }
  }
  std::ostringstream out;
  out << "aag " << (next_var - 1) << ' ' << aig.pis.size() << " 0 " << aig.pos.size() << ' '
      << n_ands << '\n';
  for (int pi : aig.pis) out << lit[pi] << '\n';
  for (int po : aig.pos) out << lit[po] << '\n';
  for (int g = 0; g < n; ++g)
    if (aig.kind[g] == GateKind::AND2)
      out << lit[g] << ' ' << lit[aig.fanin[g][0]] << ' ' << lit[aig.fanin[g][1]] << '\n';
  return out.str();
}

Aig generate_random_aig(uint64_t seed, int n_pis, int n_gates) {
  if (n_pis < 1) throw ArgumentError("n_pis must be >= 1");
  if (n_gates < 0) throw ArgumentError("n_gates must be >= 0");
  Rng rng(mix_seed(seed, 0x41494721));
  Aig aig;
  for (int i = 0; i < n_pis; ++i) aig.add_gate(GateKind::PI);
  for (int i = 0; i < n_gates; ++i) {
    const int id = aig.n();
    const bool is_and = rng.bernoulli(0.72);
    if (is_and) {
      const int f0 = rng.index(id);
      int f1 = rng.index(id);
      while (f1 == f0 && id >= 2) f1 = rng.index(id);
      aig.add_gate(GateKind::AND2, std::min(f0, f1), std::max(f0, f1));
    } else {
      aig.add_gate(GateKind::NOT, rng.index(id));
    }
  }
  finalize(aig);
  return aig;
}

// ---------------------------------------------------------------------------
// Reachability
// ---------------------------------------------------------------------------

int pair_class(const Aig& aig, int i, int j) {
  const int n = aig.n();
  if (i == j) throw ArgumentError("pair_class requires i != j");
  if (i < 0 || i >= n || j < 0 || j >= n) throw ArgumentError("gate index out of range");
  auto reaches = [&](int src, int dst) {
    // path src -> dst iff DFS from dst over fanins hits src
    std::vector<int> stack{dst};
    std::vector<uint8_t> seen(n, 0);
    seen[dst] = 1;
    while (!stack.empty()) {
      const int g = stack.back();
      stack.pop_back();
      if (g == src) return true;
      for (int s = 0; s < arity(aig.kind[g]); ++s) {
        const int f = aig.fanin[g][s];
        if (!seen[f] && f >= src) {  // nodes below src cannot lead back to it
          seen[f] = 1;
          stack.push_back(f);
        }
        if (f == src) return true;
      }
    }
    return false;
  };
  if (reaches(i, j)) return 0;
  if (reaches(j, i)) return 1;
  return 2;
}

std::vector<uint64_t> ancestor_sets(const Aig& aig, int& words_per_row) {
  const int n = aig.n();
  const int w = (n + 63) / 64;
  words_per_row = w;
  std::vector<uint64_t> anc(static_cast<size_t>(n) * w, 0);
  for (int g = 0; g < n; ++g) {
    uint64_t* row = anc.data() + static_cast<size_t>(g) * w;
    row[g / 64] |= uint64_t(1) << (g % 64);
    for (int s = 0; s < arity(aig.kind[g]); ++s) {
      const uint64_t* frow = anc.data() + static_cast<size_t>(aig.fanin[g][s]) * w;
      for (int t = 0; t < w; ++t) row[t] |= frow[t];
    }
  }
  return anc;
}

ConeMask cone_mask(const Aig& aig) {
  const int n = aig.n();
  int w = 0;
  const auto anc = ancestor_sets(aig, w);
  ConeMask mask(n);
  for (int q = 0; q < n; ++q) {
    const uint64_t* row = anc.data() + static_cast<size_t>(q) * w;
    for (int t = 0; t < mask.words_per_row; ++t)
      mask.bits[static_cast<size_t>(q) * mask.words_per_row + t] |= row[t];
    // transpose: q in anc(k) means k is in the fanout cone of q
    for (int k = 0; k < n; ++k) {
      const uint64_t* krow = anc.data() + static_cast<size_t>(k) * w;
      if ((krow[q / 64] >> (q % 64)) & 1u) mask.set(q, k);
    }
  }
#ifndef NDEBUG
  for (int q = 0; q < n; ++q)
    for (int k = 0; k < n; ++k) assert(mask.allow(q, k) == mask.allow(k, q));
#endif
  return mask;
}

// ---------------------------------------------------------------------------
// Cone extraction
// ---------------------------------------------------------------------------

SubGraph extract_khop_cone(const Aig& aig, int root, int hops) {
  const int n = aig.n();
  if (root < 0 || root >= n) throw ArgumentError("cone root out of range");
  if (hops < 1) throw ArgumentError("hops must be >= 1");

  // shortest edge distance from root over fanins
  std::map<int, int> dist;
  dist[root] = 0;
  std::vector<int> frontier{root};
  for (int d = 0; d + 1 < hops && !frontier.empty(); ++d) {
    std::vector<int> next;
    for (int g : frontier) {
      for (int s = 0; s < arity(aig.kind[g]); ++s) {
        const int f = aig.fanin[g][s];
        if (!dist.count(f)) {
          dist[f] = d + 1;
          next.push_back(f);
        }
      }
    }
    frontier = std::move(next);
  }

  std::vector<int> members;
  members.reserve(dist.size());
  for (const auto& [g, d] : dist) members.push_back(g);
  std::sort(members.begin(), members.end(), [&](int a, int b) {
    if (aig.level[a] != aig.level[b]) return aig.level[a] < aig.level[b];
    return a < b;
  });

  SubGraph sub;
  std::map<int, int> local_id;
  for (int g : members) local_id.emplace(g, static_cast<int>(local_id.size()));
  for (int g : members) {
    const bool is_frontier = dist[g] == hops - 1 || aig.kind[g] == GateKind::PI;
    if (is_frontier) {
      sub.local.add_gate(GateKind::PI);
    } else {
      const int f0 = local_id.at(aig.fanin[g][0]);
      const int f1 = aig.kind[g] == GateKind::AND2 ? local_id.at(aig.fanin[g][1]) : -1;
      sub.local.add_gate(aig.kind[g], f0, f1);
    }
    sub.parent_index.push_back(g);
  }
  finalize(sub.local);
  sub.root = local_id.at(root);
  sub.canonical_pi_order.assign(sub.local.pis.begin(), sub.local.pis.end());
  sub.size = sub.local.n();
  sub.depth = 0;
  for (int lv : sub.local.level) sub.depth = std::max(sub.depth, lv);
  assert(hops > 20 || static_cast<int>(sub.local.pis.size()) <= (1 << (hops - 1)));
  assert(hops > 20 || sub.size <= (1 << hops) - 1);
  return sub;
}

// ---------------------------------------------------------------------------
// Canonical labeling: color refinement + individualization over the ordered
// partition, exact for the small graphs this is used on.
// ---------------------------------------------------------------------------

namespace {

std::string serialize_order(const Aig& g, const std::vector<int>& order) {
  const int n = g.n();
  std::vector<int> inv(n);
  for (int i = 0; i < n; ++i) inv[order[i]] = i;
  std::string out;
  out.reserve(static_cast<size_t>(n) * 4);
  for (int i = 0; i < n; ++i) {
    const int old = order[i];
    out.push_back(static_cast<char>(g.kind[old]));
    int f[2] = {-1, -1};
    const int a = arity(g.kind[old]);
    for (int s = 0; s < a; ++s) f[s] = inv[g.fanin[old][s]];
    if (a == 2 && f[0] > f[1]) std::swap(f[0], f[1]);
    for (int s = 0; s < a; ++s) out.push_back(static_cast<char>(f[s]));
    out.push_back(static_cast<char>(0x7f));
  }
  return out;
}

struct CanonSearch {
  const Aig& g;
  std::vector<std::vector<int>> fanouts;
  std::string best;
  std::vector<int> best_order;
  long leaves = 0;

  explicit CanonSearch(const Aig& graph) : g(graph), fanouts(graph.n()) {
    for (int v = 0; v < g.n(); ++v)
      for (int s = 0; s < arity(g.kind[v]); ++s) fanouts[g.fanin[v][s]].push_back(v);
  }

  void refine(std::vector<int>& color) const {
    const int n = g.n();
    while (true) {
      std::vector<std::tuple<int, std::vector<int>, std::vector<int>, int>> sig(n);
      for (int v = 0; v < n; ++v) {
        std::vector<int> fin, fout;
        for (int s = 0; s < arity(g.kind[v]); ++s) fin.push_back(color[g.fanin[v][s]]);
        for (int u : fanouts[v]) fout.push_back(color[u]);
        std::sort(fin.begin(), fin.end());
        std::sort(fout.begin(), fout.end());
        sig[v] = {color[v], std::move(fin), std::move(fout), v};
      }
      std::vector<int> idx(n);
      for (int v = 0; v < n; ++v) idx[v] = v;
      std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        return std::tie(std::get<0>(sig[a]), std::get<1>(sig[a]), std::get<2>(sig[a])) <
               std::tie(std::get<0>(sig[b]), std::get<1>(sig[b]), std::get<2>(sig[b]));
      });
      std::vector<int> next(n, 0);
      int classes = 0;
      for (int r = 0; r < n; ++r) {
        if (r > 0 && std::tie(std::get<0>(sig[idx[r]]), std::get<1>(sig[idx[r]]),
                              std::get<2>(sig[idx[r]])) !=
                         std::tie(std::get<0>(sig[idx[r - 1]]), std::get<1>(sig[idx[r - 1]]),
                                  std::get<2>(sig[idx[r - 1]])))
          ++classes;
        next[idx[r]] = classes;
      }
      std::vector<int> distinct = color;
      std::sort(distinct.begin(), distinct.end());
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      // cells only ever split; an unchanged cell count means a fixed point
      const bool stable = classes + 1 == static_cast<int>(distinct.size());
      if (stable && next == color) break;
      color = std::move(next);
      if (stable) break;
    }
  }

  void descend(std::vector<int> color) {
    refine(color);
    const int n = g.n();
    // locate the first non-singleton cell in color order
    std::vector<int> count(n, 0);
    for (int v = 0; v < n; ++v) count[color[v]]++;
    int target = -1;
    for (int c = 0; c < n; ++c)
      if (count[c] > 1) {
        target = c;
        break;
      }
    if (target < 0) {
      std::vector<int> order(n);
      for (int v = 0; v < n; ++v) order[color[v]] = v;
      std::string ser = serialize_order(g, order);
      ++leaves;
      if (best.empty() || ser < best) {
        best = std::move(ser);
        best_order = std::move(order);
      }
      return;
    }
    assert(leaves < 1000000);
    for (int v = 0; v < n; ++v) {
      if (color[v] != target) continue;
      std::vector<int> split(n);
      for (int u = 0; u < n; ++u) split[u] = color[u] * 2 + (u == v ? 0 : 1);
      descend(std::move(split));
    }
  }
};

std::vector<int> canonical_order(const Aig& g) {
  const int n = g.n();
  // initial colors: (level, kind) rank; level leads so the final order stays
  // topological
  std::vector<std::pair<int, int>> keys(n);
  for (int v = 0; v < n; ++v) keys[v] = {g.level[v], static_cast<int>(g.kind[v])};
  std::vector<std::pair<int, int>> uniq = keys;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<int> color(n);
  for (int v = 0; v < n; ++v)
    color[v] =
        static_cast<int>(std::lower_bound(uniq.begin(), uniq.end(), keys[v]) - uniq.begin());
  CanonSearch search(g);
  search.descend(std::move(color));
  return search.best_order;
}

}  // namespace

SubGraph canonical_form(const SubGraph& sub) {
  const auto order = canonical_order(sub.local);
  const int n = sub.local.n();
  std::vector<int> inv(n);
  for (int i = 0; i < n; ++i) inv[order[i]] = i;

  SubGraph out;
  for (int i = 0; i < n; ++i) {
    const int old = order[i];
    const GateKind k = sub.local.kind[old];
    int f[2] = {-1, -1};
    const int a = arity(k);
    for (int s = 0; s < a; ++s) f[s] = inv[sub.local.fanin[old][s]];
    if (a == 2 && f[0] > f[1]) std::swap(f[0], f[1]);
    out.local.add_gate(k, f[0], f[1]);
    out.parent_index.push_back(sub.parent_index.empty() ? old : sub.parent_index[old]);
  }
  finalize(out.local);
  out.root = inv[sub.root];
  out.canonical_pi_order.assign(out.local.pis.begin(), out.local.pis.end());
  out.size = n;
  out.depth = 0;
  for (int lv : out.local.level) out.depth = std::max(out.depth, lv);
  return out;
}

std::string graph_signature(const Aig& aig) {
  std::vector<int> identity(aig.n());
  for (int i = 0; i < aig.n(); ++i) identity[i] = i;
  return serialize_order(aig, identity);
}

// ---------------------------------------------------------------------------
// Canonical JSON
// ---------------------------------------------------------------------------

std::string aig_to_json(const Aig& aig) {
  nlohmann::ordered_json j;
  j["v"] = 1;
  j["n"] = aig.n();
  auto& kinds = j["kind"] = nlohmann::ordered_json::array();
  auto& fanins = j["fanin"] = nlohmann::ordered_json::array();
  for (int g = 0; g < aig.n(); ++g) {
    kinds.push_back(static_cast<int>(aig.kind[g]));
    auto arr = nlohmann::ordered_json::array();
    for (int s = 0; s < arity(aig.kind[g]); ++s) arr.push_back(aig.fanin[g][s]);
    fanins.push_back(arr);
  }
  j["level"] = aig.level;
  j["pis"] = aig.pis;
  j["pos"] = aig.pos;
  return j.dump();
}

Aig aig_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.contains("v") || j["v"].get<int>() != 1)
    throw SchemaError("unsupported aig json version");
  Aig aig;
  const int n = j["n"].get<int>();
  for (int g = 0; g < n; ++g) {
    const auto k = static_cast<GateKind>(j["kind"][g].get<int>());
    const auto& f = j["fanin"][g];
    int f0 = f.size() > 0 ? f[0].get<int>() : -1;
    int f1 = f.size() > 1 ? f[1].get<int>() : -1;
    aig.add_gate(k, f0, f1);
  }
  finalize(aig);
  return aig;
}

}  // namespace aigrl
