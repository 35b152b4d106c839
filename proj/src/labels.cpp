#include "aigrl/labels.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cassert>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "aigrl/rng.hpp"

namespace aigrl {

// ---------------------------------------------------------------------------
// Graph edit distance
// ---------------------------------------------------------------------------

namespace {

struct GedGraph {
  int n = 0;
  std::vector<GateKind> kind;
  std::vector<uint16_t> out_adj;  // bit v set on row u iff edge u->v
  int n_edges = 0;

  explicit GedGraph(const Aig& g) : n(g.n()), kind(g.kind), out_adj(g.n(), 0) {
    for (int v = 0; v < n; ++v)
      for (int s = 0; s < arity(g.kind[v]); ++s) {
        out_adj[g.fanin[v][s]] |= uint16_t(1) << v;
        ++n_edges;
      }
  }
  bool edge(int u, int v) const { return (out_adj[u] >> v) & 1; }
};

struct GedState {
  std::array<int8_t, 16> map{};  // G1 node -> G2 node, -1 deleted
  uint16_t used = 0;
  int cost = 0;
};

int closing_cost(const GedGraph& g2, const GedState& st) {
  int cost = std::popcount(static_cast<unsigned>(~st.used & ((1u << g2.n) - 1)));
  for (int x = 0; x < g2.n; ++x)
    for (int y = 0; y < g2.n; ++y)
      if (g2.edge(x, y) && (!((st.used >> x) & 1) || !((st.used >> y) & 1))) ++cost;
  return cost;
}

int step_cost(const GedGraph& g1, const GedGraph& g2, const GedState& st, int u, int v) {
  // v < 0 deletes u
  int cost = 0;
  if (v < 0) {
    cost += 1;
    for (int w = 0; w < u; ++w) {
      cost += g1.edge(u, w);
      cost += g1.edge(w, u);
    }
  } else {
    cost += g1.kind[u] != g2.kind[v];
    for (int w = 0; w < u; ++w) {
      const int fw = st.map[w];
      if (fw < 0) {
        cost += g1.edge(u, w);
        cost += g1.edge(w, u);
      } else {
        cost += g1.edge(u, w) != g2.edge(v, fw);
        cost += g1.edge(w, u) != g2.edge(fw, v);
      }
    }
  }
  return cost;
}

int remaining_bound(const GedGraph& g2, const GedState& st, int pos, int n1) {
  const int r1 = n1 - pos;
  const int u2 = g2.n - std::popcount(static_cast<unsigned>(st.used));
  return std::abs(r1 - u2);
}

int ged_exact(const GedGraph& g1, const GedGraph& g2) {
  int best = g1.n + g2.n + g1.n_edges + g2.n_edges;
  GedState init;
  std::vector<std::pair<GedState, int>> stack{{init, 0}};
  while (!stack.empty()) {
    auto [st, pos] = stack.back();
    stack.pop_back();
    if (st.cost + remaining_bound(g2, st, pos, g1.n) >= best) continue;
    if (pos == g1.n) {
      best = std::min(best, st.cost + closing_cost(g2, st));
      continue;
    }
    for (int v = -1; v < g2.n; ++v) {
      if (v >= 0 && ((st.used >> v) & 1)) continue;
      GedState next = st;
      next.cost += step_cost(g1, g2, st, pos, v);
      if (v >= 0) {
        next.map[pos] = static_cast<int8_t>(v);
        next.used |= uint16_t(1) << v;
      } else {
        next.map[pos] = -1;
      }
      if (next.cost + remaining_bound(g2, next, pos + 1, g1.n) < best)
        stack.push_back({next, pos + 1});
    }
  }
  return best;
}

// full cost of an explicit mapping, map[u] in [-1, n2)
int mapping_cost(const GedGraph& g1, const GedGraph& g2, const std::array<int8_t, 16>& map) {
  GedState st;
  for (int u = 0; u < g1.n; ++u) {
    st.cost += step_cost(g1, g2, st, u, map[u]);
    st.map[u] = map[u];
    if (map[u] >= 0) st.used |= uint16_t(1) << map[u];
  }
  return st.cost + closing_cost(g2, st);
}

int ged_beam(const GedGraph& g1, const GedGraph& g2, int width) {
  std::vector<GedState> beam{GedState{}};
  for (int pos = 0; pos < g1.n; ++pos) {
    std::vector<GedState> next;
    for (const auto& st : beam) {
      for (int v = -1; v < g2.n; ++v) {
        if (v >= 0 && ((st.used >> v) & 1)) continue;
        GedState ns = st;
        ns.cost += step_cost(g1, g2, st, pos, v);
        if (v >= 0) {
          ns.map[pos] = static_cast<int8_t>(v);
          ns.used |= uint16_t(1) << v;
        } else {
          ns.map[pos] = -1;
        }
        next.push_back(ns);
      }
    }
    std::sort(next.begin(), next.end(), [&](const GedState& a, const GedState& b) {
      return a.cost + remaining_bound(g2, a, pos + 1, g1.n) <
             b.cost + remaining_bound(g2, b, pos + 1, g1.n);
    });
    if (static_cast<int>(next.size()) > width) next.resize(width);
    beam = std::move(next);
  }
  // canonicalized cones align index to index, so the aligned mapping is a
  // strong upper-bound candidate alongside the beam survivors
  std::array<int8_t, 16> aligned{};
  for (int u = 0; u < g1.n; ++u) aligned[u] = u < g2.n ? static_cast<int8_t>(u) : int8_t(-1);
  int best = mapping_cost(g1, g2, aligned);
  for (const auto& st : beam) best = std::min(best, st.cost + closing_cost(g2, st));
  return best;
}

}  // namespace

GedResult graph_edit_distance(const SubGraph& s1, const SubGraph& s2) {
  if (s1.local.n() > 15 || s2.local.n() > 15)
    throw CapacityError("graph_edit_distance limited to 15 nodes");
  const Aig* a = &s1.local;
  const Aig* b = &s2.local;
  // canonical argument order keeps the computation symmetric
  if (std::make_pair(a->n(), graph_signature(*a)) > std::make_pair(b->n(), graph_signature(*b)))
    std::swap(a, b);
  GedGraph g1(*a), g2(*b);
  GedResult res;
  if (g1.n <= 8 && g2.n <= 8) {
    res.cost = ged_exact(g1, g2);
    res.exact = true;
  } else {
    res.cost = ged_beam(g1, g2, 128);
    res.exact = false;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Label pack construction
// ---------------------------------------------------------------------------

namespace {

int classify_pair(const std::vector<uint64_t>& anc, int words, int i, int j) {
  const bool i_to_j = (anc[static_cast<size_t>(j) * words + i / 64] >> (i % 64)) & 1;
  const bool j_to_i = (anc[static_cast<size_t>(i) * words + j / 64] >> (j % 64)) & 1;
  return i_to_j ? 0 : (j_to_i ? 1 : 2);
}

}  // namespace

LabelPack build_labelpack(const Aig& aig, const LabelConfig& config) {
  if (config.n_patterns < 1) throw ArgumentError("n_patterns must be >= 1");
  if (config.hops < 1) throw ArgumentError("hops must be >= 1");
  const int n = aig.n();
  LabelPack pack;
  pack.workload = random_workload(aig, mix_seed(config.seed, 0x01));
  pack.sim_seed = mix_seed(config.seed, 0x02);
  pack.n_patterns = config.n_patterns;
  const SimResult sim = simulate(aig, pack.workload, config.n_patterns, pack.sim_seed);
  pack.prob = sim.prob;
  pack.lev = aig.level;

  // gate truth-table pairs, preferring same-level partners
  {
    Rng rng(mix_seed(config.seed, 0x03));
    std::map<int, std::vector<int>> by_level;
    for (int g = 0; g < n; ++g) by_level[aig.level[g]].push_back(g);
    std::set<std::pair<int, int>> seen;
    int attempts = 0;
    while (static_cast<int>(pack.tt_pairs.size()) < config.n_tt_pairs &&
           attempts < config.n_tt_pairs * 64) {
      ++attempts;
      if (n < 2) break;
      const int a = rng.index(n);
      int b = -1;
      const auto& level_mates = by_level[aig.level[a]];
      if (level_mates.size() > 1) {
        b = level_mates[rng.index(static_cast<int>(level_mates.size()))];
        if (b == a) continue;
      } else {
        b = rng.index(n);
        if (b == a) continue;
      }
      const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
      if (!seen.insert(key).second) continue;
      TtPair p;
      p.i = key.first;
      p.j = key.second;
      p.dist = hamming_fraction(sim.responses[p.i], sim.responses[p.j], config.n_patterns);
      pack.tt_pairs.push_back(p);
    }
    if (static_cast<int>(pack.tt_pairs.size()) < config.n_tt_pairs)
      pack.warnings.push_back("tt_pairs: sampled " + std::to_string(pack.tt_pairs.size()) +
                              " of " + std::to_string(config.n_tt_pairs));
  }

  // connection pairs, stratified toward class balance
  {
    Rng rng(mix_seed(config.seed, 0x04));
    int words = 0;
    const auto anc = ancestor_sets(aig, words);
    const int target = (config.n_con_pairs + 2) / 3;
    int bucket[3] = {0, 0, 0};
    std::set<std::pair<int, int>> seen;
    int attempts = 0;
    while (static_cast<int>(pack.con_pairs.size()) < config.n_con_pairs &&
           attempts < config.n_con_pairs * 96) {
      ++attempts;
      if (n < 2) break;
      const int i = rng.index(n);
      const int j = rng.index(n);
      if (i == j || !seen.insert({i, j}).second) continue;
      const int cls = classify_pair(anc, words, i, j);
      const bool strict_phase = attempts < config.n_con_pairs * 64;
      if (strict_phase && bucket[cls] >= target) continue;
      bucket[cls]++;
      pack.con_pairs.push_back({i, j, cls});
    }
    if (static_cast<int>(pack.con_pairs.size()) < config.n_con_pairs)
      pack.warnings.push_back("con_pairs: sampled " + std::to_string(pack.con_pairs.size()) +
                              " of " + std::to_string(config.n_con_pairs));
  }

  // cone samples with canonical form, exact tables and the 64-bit target
  {
    Rng rng(mix_seed(config.seed, 0x05));
    std::set<int> used_roots;
    int attempts = 0;
    while (static_cast<int>(pack.cones.size()) < config.n_cones &&
           attempts < config.n_cones * 64) {
      ++attempts;
      const int root = rng.index(n);
      if (!used_roots.insert(root).second) continue;
      ConeSample cs;
      cs.sub = canonical_form(extract_khop_cone(aig, root, config.hops));
      const int k = static_cast<int>(cs.sub.canonical_pi_order.size());
      if (k > 16) continue;
      cs.sub.truth_table = exact_truth_table(cs.sub);
      cs.plan.n_pis = k;
      if (k < 6) {
        cs.table64 = pad_truth_table(*cs.sub.truth_table);
      } else if (k == 6) {
        cs.table64 = *cs.sub.truth_table;
      } else {
        Rng fix_rng(mix_seed(config.seed, 0x0500 + pack.cones.size()));
        for (int j = 6; j < k; ++j) cs.plan.fixings.push_back({j, fix_rng.index(2)});
        cs.table64 = condition_truth_table(cs.sub, cs.plan.fixings);
      }
      pack.cones.push_back(std::move(cs));
    }
    if (static_cast<int>(pack.cones.size()) < config.n_cones)
      pack.warnings.push_back("cones: sampled " + std::to_string(pack.cones.size()) + " of " +
                              std::to_string(config.n_cones));
  }

  const int n_cones = static_cast<int>(pack.cones.size());

  // cone pair distances
  {
    Rng rng(mix_seed(config.seed, 0x06));
    std::set<std::pair<int, int>> seen;
    int attempts = 0;
    while (static_cast<int>(pack.graph_tt_pairs.size()) < config.n_graph_tt_pairs &&
           attempts < config.n_graph_tt_pairs * 64) {
      ++attempts;
      if (n_cones < 2) break;
      const int a = rng.index(n_cones);
      const int b = rng.index(n_cones);
      if (a == b) continue;
      const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
      if (!seen.insert(key).second) continue;
      GraphTtPair p;
      p.s1 = key.first;
      p.s2 = key.second;
      p.dist = hamming_fraction(pack.cones[p.s1].table64, pack.cones[p.s2].table64);
      pack.graph_tt_pairs.push_back(p);
    }
    if (static_cast<int>(pack.graph_tt_pairs.size()) < config.n_graph_tt_pairs)
      pack.warnings.push_back("graph_tt_pairs: sampled " +
                              std::to_string(pack.graph_tt_pairs.size()) + " of " +
                              std::to_string(config.n_graph_tt_pairs));
  }
  {
    Rng rng(mix_seed(config.seed, 0x07));
    std::set<std::pair<int, int>> seen;
    int attempts = 0;
    while (static_cast<int>(pack.graph_ged_pairs.size()) < config.n_ged_pairs &&
           attempts < config.n_ged_pairs * 64) {
      ++attempts;
      if (n_cones < 2) break;
      const int a = rng.index(n_cones);
      const int b = rng.index(n_cones);
      if (a == b) continue;
      const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
      if (!seen.insert(key).second) continue;
      GraphGedPair p;
      p.s1 = key.first;
      p.s2 = key.second;
      const GedResult ged = graph_edit_distance(pack.cones[p.s1].sub, pack.cones[p.s2].sub);
      p.ged_raw = ged.cost;
      p.ged_norm = static_cast<double>(ged.cost) /
                   (pack.cones[p.s1].sub.size + pack.cones[p.s2].sub.size);
      p.exact = ged.exact;
      pack.graph_ged_pairs.push_back(p);
    }
    if (static_cast<int>(pack.graph_ged_pairs.size()) < config.n_ged_pairs)
      pack.warnings.push_back("graph_ged_pairs: sampled " +
                              std::to_string(pack.graph_ged_pairs.size()) + " of " +
                              std::to_string(config.n_ged_pairs));
  }

  // membership samples, balanced positive/negative
  {
    Rng rng(mix_seed(config.seed, 0x08));
    int attempts = 0;
    while (static_cast<int>(pack.in_samples.size()) < config.n_in_samples &&
           attempts < config.n_in_samples * 96) {
      ++attempts;
      if (n_cones == 0) break;
      const int cone = rng.index(n_cones);
      const auto& members = pack.cones[cone].sub.parent_index;
      const bool want_positive = pack.in_samples.size() % 2 == 0;
      if (want_positive) {
        const int gate = members[rng.index(static_cast<int>(members.size()))];
        pack.in_samples.push_back({gate, cone, 1});
      } else {
        if (static_cast<int>(members.size()) >= n) continue;
        int gate = rng.index(n);
        bool inside = std::find(members.begin(), members.end(), gate) != members.end();
        if (inside) continue;
        pack.in_samples.push_back({gate, cone, 0});
      }
    }
    if (static_cast<int>(pack.in_samples.size()) < config.n_in_samples)
      pack.warnings.push_back("in_samples: sampled " + std::to_string(pack.in_samples.size()) +
                              " of " + std::to_string(config.n_in_samples));
  }

  return pack;
}

// ---------------------------------------------------------------------------
// Dataset serialization
// ---------------------------------------------------------------------------

namespace {

using njson = nlohmann::ordered_json;

std::string bits_to_string(const std::vector<uint8_t>& bits) {
  std::string s;
  s.reserve(bits.size());
  for (uint8_t b : bits) s.push_back(b ? '1' : '0');
  return s;
}

std::vector<uint8_t> string_to_bits(const std::string& s) {
  std::vector<uint8_t> bits;
  bits.reserve(s.size());
  for (char c : s) {
    if (c != '0' && c != '1') throw SchemaError("bad bit string");
    bits.push_back(c == '1');
  }
  return bits;
}

njson subgraph_to_json(const SubGraph& sub) {
  njson j;
  j["aig"] = njson::parse(aig_to_json(sub.local));
  j["parent"] = sub.parent_index;
  j["root"] = sub.root;
  j["pi_order"] = sub.canonical_pi_order;
  j["size"] = sub.size;
  j["depth"] = sub.depth;
  if (sub.truth_table) {
    j["tt_k"] = sub.truth_table->k;
    j["tt"] = bits_to_string(sub.truth_table->bits);
  }
  return j;
}

SubGraph subgraph_from_json(const njson& j) {
  SubGraph sub;
  sub.local = aig_from_json(j.at("aig").dump());
  sub.parent_index = j.at("parent").get<std::vector<int32_t>>();
  sub.root = j.at("root").get<int32_t>();
  sub.canonical_pi_order = j.at("pi_order").get<std::vector<int32_t>>();
  sub.size = j.at("size").get<int32_t>();
  sub.depth = j.at("depth").get<int32_t>();
  if (j.contains("tt")) {
    TruthTable tt;
    tt.k = j.at("tt_k").get<int>();
    tt.bits = string_to_bits(j.at("tt").get<std::string>());
    sub.truth_table = std::move(tt);
  }
  return sub;
}

}  // namespace

std::string record_to_json(const CircuitRecord& rec) {
  njson j;
  j["aig"] = njson::parse(aig_to_json(rec.aig));
  j["workload"] = rec.pack.workload.p;
  j["sim_seed"] = rec.pack.sim_seed;
  j["n_patterns"] = rec.pack.n_patterns;
  j["prob"] = rec.pack.prob;
  j["lev"] = rec.pack.lev;
  auto& tt = j["tt_pairs"] = njson::array();
  for (const auto& p : rec.pack.tt_pairs) tt.push_back({p.i, p.j, p.dist});
  auto& con = j["con_pairs"] = njson::array();
  for (const auto& p : rec.pack.con_pairs) con.push_back({p.i, p.j, p.cls});
  auto& cones = j["cones"] = njson::array();
  for (const auto& c : rec.pack.cones) {
    njson cj;
    cj["sub"] = subgraph_to_json(c.sub);
    cj["n_pis"] = c.plan.n_pis;
    auto& fix = cj["fixings"] = njson::array();
    for (const auto& f : c.plan.fixings) fix.push_back({f.first, f.second});
    cj["table64"] = bits_to_string(c.table64.bits);
    cones.push_back(std::move(cj));
  }
  auto& gtt = j["graph_tt_pairs"] = njson::array();
  for (const auto& p : rec.pack.graph_tt_pairs) gtt.push_back({p.s1, p.s2, p.dist});
  auto& ged = j["graph_ged_pairs"] = njson::array();
  for (const auto& p : rec.pack.graph_ged_pairs)
    ged.push_back({p.s1, p.s2, p.ged_raw, p.ged_norm, p.exact});
  auto& ins = j["in_samples"] = njson::array();
  for (const auto& p : rec.pack.in_samples) ins.push_back({p.gate, p.cone, p.bit});
  j["warnings"] = rec.pack.warnings;
  return j.dump();
}

CircuitRecord record_from_json(const std::string& text) {
  const njson j = njson::parse(text);
  CircuitRecord rec;
  rec.aig = aig_from_json(j.at("aig").dump());
  rec.pack.workload.p = j.at("workload").get<std::vector<double>>();
  rec.pack.sim_seed = j.at("sim_seed").get<uint64_t>();
  rec.pack.n_patterns = j.at("n_patterns").get<int>();
  rec.pack.prob = j.at("prob").get<std::vector<double>>();
  rec.pack.lev = j.at("lev").get<std::vector<int32_t>>();
  for (const auto& p : j.at("tt_pairs"))
    rec.pack.tt_pairs.push_back({p[0].get<int32_t>(), p[1].get<int32_t>(), p[2].get<double>()});
  for (const auto& p : j.at("con_pairs"))
    rec.pack.con_pairs.push_back({p[0].get<int32_t>(), p[1].get<int32_t>(), p[2].get<int32_t>()});
  for (const auto& cj : j.at("cones")) {
    ConeSample c;
    c.sub = subgraph_from_json(cj.at("sub"));
    c.plan.n_pis = cj.at("n_pis").get<int>();
    for (const auto& f : cj.at("fixings"))
      c.plan.fixings.push_back({f[0].get<int>(), f[1].get<int>()});
    c.table64.k = 6;
    c.table64.bits = string_to_bits(cj.at("table64").get<std::string>());
    rec.pack.cones.push_back(std::move(c));
  }
  for (const auto& p : j.at("graph_tt_pairs"))
    rec.pack.graph_tt_pairs.push_back(
        {p[0].get<int32_t>(), p[1].get<int32_t>(), p[2].get<double>()});
  for (const auto& p : j.at("graph_ged_pairs"))
    rec.pack.graph_ged_pairs.push_back({p[0].get<int32_t>(), p[1].get<int32_t>(),
                                        p[2].get<int32_t>(), p[3].get<double>(),
                                        p[4].get<bool>()});
  for (const auto& p : j.at("in_samples"))
    rec.pack.in_samples.push_back({p[0].get<int32_t>(), p[1].get<int32_t>(), p[2].get<int32_t>()});
  rec.pack.warnings = j.at("warnings").get<std::vector<std::string>>();

  const int n = rec.aig.n();
  const int n_cones = static_cast<int>(rec.pack.cones.size());
  auto in_range = [](double v) { return v >= 0.0 && v <= 1.0; };
  for (double p : rec.pack.workload.p)
    if (!in_range(p)) throw SchemaError("workload probability out of range");
  for (const auto& p : rec.pack.tt_pairs)
    if (p.i < 0 || p.i >= n || p.j < 0 || p.j >= n || !in_range(p.dist))
      throw SchemaError("bad tt pair");
  for (const auto& p : rec.pack.con_pairs)
    if (p.i < 0 || p.i >= n || p.j < 0 || p.j >= n || p.cls < 0 || p.cls > 2)
      throw SchemaError("bad con pair");
  for (const auto& p : rec.pack.graph_tt_pairs)
    if (p.s1 < 0 || p.s1 >= n_cones || p.s2 < 0 || p.s2 >= n_cones || !in_range(p.dist))
      throw SchemaError("bad graph tt pair");
  for (const auto& p : rec.pack.graph_ged_pairs)
    if (p.s1 < 0 || p.s1 >= n_cones || p.s2 < 0 || p.s2 >= n_cones || p.ged_raw < 0)
      throw SchemaError("bad ged pair");
  for (const auto& s : rec.pack.in_samples)
    if (s.gate < 0 || s.gate >= n || s.cone < 0 || s.cone >= n_cones ||
        (s.bit != 0 && s.bit != 1))
      throw SchemaError("bad membership sample");
  return rec;
}

void write_dataset(const std::vector<CircuitRecord>& records, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ArgumentError("cannot open " + tmp + " for writing");
    njson header;
    header["v"] = 1;
    header["kind"] = "aigrl-dataset";
    header["count"] = records.size();
    out << header.dump() << '\n';
    for (const auto& rec : records) out << record_to_json(rec) << '\n';
    if (!out) {
      std::remove(tmp.c_str());
      throw ArgumentError("write failed for " + tmp);
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw ArgumentError("cannot move " + tmp + " into place");
  }
}

std::vector<CircuitRecord> read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing dataset header");
  njson header;
  try {
    header = njson::parse(line);
  } catch (const std::exception&) {
    throw ParseError(1, "bad dataset header");
  }
  if (!header.contains("v") || header["v"].get<int>() != 1 ||
      header.value("kind", std::string()) != "aigrl-dataset")
    throw SchemaError("unsupported dataset version");
  std::vector<CircuitRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(line));
    } catch (const std::exception& e) {
      throw ParseError(line_no, std::string("bad record: ") + e.what());
    }
  }
  return records;
}

}  // namespace aigrl
