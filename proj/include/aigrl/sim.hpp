#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "aigrl/aig.hpp"
#include "aigrl/truth_table.hpp"

namespace aigrl {

// Per-PI probability of logic-1 driving random simulation.
struct Workload {
  std::vector<double> p;
};

// Uniform [0,1] probability per PI, deterministic per seed.
Workload random_workload(const Aig& aig, uint64_t seed);

struct SimResult {
  int n_patterns = 0;
  std::vector<std::vector<uint64_t>> responses;  // per gate, bit-packed patterns
  std::vector<double> prob;                      // per gate logic-1 frequency
};

// Evaluates every gate over explicit PI pattern words (64 patterns per word).
std::vector<std::vector<uint64_t>> eval_patterns(const Aig& aig,
                                                 const std::vector<std::vector<uint64_t>>& pi_bits,
                                                 int n_patterns);

// Random simulation: PI i draws i.i.d. Bernoulli(p_i) bits from the seeded
// generator, PI-major then pattern order. Deterministic per seed.
SimResult simulate(const Aig& aig, const Workload& workload, int n_patterns, uint64_t seed);

// Exact table of the cone root over all assignments of its canonical PIs.
// Canonical PI 0 is the MSB of the row index. k <= 16.
TruthTable exact_truth_table(const SubGraph& sub);

// Extends a k<6 table to 6 inputs by appending don't-care inputs on the
// low-significance side; each source bit repeats 2^(6-k) times.
TruthTable pad_truth_table(const TruthTable& tt);

// Cofactor of a k>6 cone under the given (canonical PI position, value)
// fixings, leaving exactly 6 free PIs in canonical order.
TruthTable condition_truth_table(const SubGraph& sub,
                                 const std::vector<std::pair<int, int>>& fixings);

double hamming_fraction(const TruthTable& a, const TruthTable& b);
double hamming_fraction(const std::vector<uint64_t>& a, const std::vector<uint64_t>& b,
                        int n_bits);

}  // namespace aigrl
