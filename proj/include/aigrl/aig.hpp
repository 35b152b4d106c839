#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aigrl/error.hpp"
#include "aigrl/truth_table.hpp"

namespace aigrl {

enum class GateKind : uint8_t { PI = 0, AND2 = 1, NOT = 2 };

inline int arity(GateKind k) { return k == GateKind::PI ? 0 : (k == GateKind::NOT ? 1 : 2); }

// And-inverter graph with inverters materialized as NOT nodes.
// Nodes are stored in topological order: every fanin index is smaller than
// the index of its consumer. POs are the zero-fanout gates.
struct Aig {
  std::vector<GateKind> kind;
  std::vector<std::array<int32_t, 2>> fanin;  // unused slots hold -1
  std::vector<int32_t> level;
  std::vector<int32_t> pis;
  std::vector<int32_t> pos;

  int n() const { return static_cast<int>(kind.size()); }

  int add_gate(GateKind k, int32_t f0 = -1, int32_t f1 = -1) {
    kind.push_back(k);
    fanin.push_back({f0, f1});
    return n() - 1;
  }
};

// Recomputes levels, pi and po lists; throws ArgumentError on a structural
// violation (bad arity, fanin not preceding its consumer).
void finalize(Aig& aig);

// Checks all structural invariants; max_gates < 0 disables the size cap.
void validate(const Aig& aig, int max_gates = -1);

// Pairwise attention availability: allow(q, k) is true iff k lies in the
// fanin cone or fanout cone of q, or k == q. Rows are bit-packed.
struct ConeMask {
  int n = 0;
  int words_per_row = 0;
  std::vector<uint64_t> bits;

  ConeMask() = default;
  explicit ConeMask(int n_)
      : n(n_), words_per_row((n_ + 63) / 64), bits(static_cast<size_t>(n_) * words_per_row, 0) {}

  bool allow(int q, int k) const {
    return (bits[static_cast<size_t>(q) * words_per_row + k / 64] >> (k % 64)) & 1u;
  }
  void set(int q, int k) {
    bits[static_cast<size_t>(q) * words_per_row + k / 64] |= uint64_t(1) << (k % 64);
  }
};

// An extracted fanin cone, re-indexed as a standalone Aig. parent_index maps
// local node ids back to the parent circuit. canonical_pi_order lists local
// PI ids in the order used for truth-table indexing.
struct SubGraph {
  Aig local;
  std::vector<int32_t> parent_index;
  int32_t root = 0;
  std::vector<int32_t> canonical_pi_order;
  int32_t size = 0;
  int32_t depth = 0;
  std::optional<TruthTable> truth_table;
};

// ASCII AIGER ("aag") reader. Latches and constant literals are rejected.
// Negated literals materialize NOT nodes, at most one per driven literal.
Aig parse_aiger(const std::string& text);

// ASCII AIGER writer; NOT nodes fold back into negated literals.
std::string write_aiger(const Aig& aig);

// Deterministic random DAG: n_pis inputs followed by n_gates AND2/NOT gates
// whose fanins are drawn from strictly earlier nodes.
Aig generate_random_aig(uint64_t seed, int n_pis, int n_gates);

// 0: path i->j exists, 1: path j->i exists, 2: unrelated. i == j is an error.
int pair_class(const Aig& aig, int i, int j);

// Per-gate fanin-cone membership bitsets (self included), one word row per
// gate; anc[g] bit k set iff k is g or an ancestor of g.
std::vector<uint64_t> ancestor_sets(const Aig& aig, int& words_per_row);

ConeMask cone_mask(const Aig& aig);

// Fanin cone of `root` spanning `hops` node layers: nodes at shortest edge
// distance <= hops-1, with the distance hops-1 frontier re-typed as local PIs.
SubGraph extract_khop_cone(const Aig& aig, int root, int hops);

// Deterministic canonical relabeling (color refinement + individualization).
// Isomorphic inputs yield identical canonical serializations; node order stays
// topological. The stored truth table, if any, is dropped (PI order changes).
SubGraph canonical_form(const SubGraph& sub);

// Byte string identifying the local graph up to isomorphism once canonicalized.
std::string graph_signature(const Aig& aig);

// Canonical JSON for an Aig. Field order: v, n, kind, fanin, level, pis, pos.
std::string aig_to_json(const Aig& aig);
Aig aig_from_json(const std::string& text);

}  // namespace aigrl
