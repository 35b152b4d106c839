#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "aigrl/aig.hpp"
#include "aigrl/sim.hpp"

namespace aigrl {

struct GedResult {
  int cost = 0;
  bool exact = true;
};

// Unit-cost edit distance (node insert/delete/relabel, edge insert/delete)
// between the local graphs. Exact up to 8 nodes on the smaller side pair,
// beam-limited upper bound above that (flagged in the result). Symmetric by
// construction; both graphs must stay within 15 nodes.
GedResult graph_edit_distance(const SubGraph& s1, const SubGraph& s2);

// How a cone's PI slots map onto the fixed 6-input truth table: pad with
// don't-care slots below 6 PIs, fix the highest canonical PIs above 6.
struct TokenPlan {
  int n_pis = 0;
  std::vector<std::pair<int, int>> fixings;  // (canonical PI position, value)
  int pad_count() const { return n_pis < 6 ? 6 - n_pis : 0; }
};

struct ConeSample {
  SubGraph sub;        // canonicalized; carries the exact (unpadded) table
  TokenPlan plan;
  TruthTable table64;  // 64-bit training target after pad/condition
};

struct TtPair {
  int32_t i = 0, j = 0;
  double dist = 0.0;
};
struct ConPair {
  int32_t i = 0, j = 0;
  int32_t cls = 0;
};
struct GraphTtPair {
  int32_t s1 = 0, s2 = 0;
  double dist = 0.0;
};
struct GraphGedPair {
  int32_t s1 = 0, s2 = 0;
  int32_t ged_raw = 0;
  double ged_norm = 0.0;
  bool exact = true;
};
struct InSample {
  int32_t gate = 0, cone = 0;
  int32_t bit = 0;
};

struct LabelConfig {
  int n_patterns = 1024;
  int n_tt_pairs = 32;
  int n_con_pairs = 32;
  int n_cones = 8;
  int n_graph_tt_pairs = 8;
  int n_ged_pairs = 8;
  int n_in_samples = 16;
  int hops = 4;
  uint64_t seed = 0;
};

// Full supervision package for one circuit. Every label is reproducible from
// the stored primitives (workload, sim seed and pattern count, cones).
struct LabelPack {
  Workload workload;
  uint64_t sim_seed = 0;
  int n_patterns = 0;
  std::vector<double> prob;
  std::vector<int32_t> lev;
  std::vector<TtPair> tt_pairs;
  std::vector<ConPair> con_pairs;
  std::vector<ConeSample> cones;
  std::vector<GraphTtPair> graph_tt_pairs;
  std::vector<GraphGedPair> graph_ged_pairs;
  std::vector<InSample> in_samples;
  std::vector<std::string> warnings;
};

LabelPack build_labelpack(const Aig& aig, const LabelConfig& config);

struct CircuitRecord {
  Aig aig;
  LabelPack pack;
};

std::string record_to_json(const CircuitRecord& rec);
CircuitRecord record_from_json(const std::string& text);

// Line-delimited JSON, one circuit per line after a versioned header line.
void write_dataset(const std::vector<CircuitRecord>& records, const std::string& path);
std::vector<CircuitRecord> read_dataset(const std::string& path);

}  // namespace aigrl
