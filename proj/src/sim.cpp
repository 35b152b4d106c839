#include "aigrl/sim.hpp"

#include <algorithm>
#include <bit>
#include <cassert>

#include "aigrl/rng.hpp"

namespace aigrl {

namespace {

int words_for(int n_bits) { return (n_bits + 63) / 64; }

uint64_t tail_mask(int n_bits) {
  const int rem = n_bits % 64;
  return rem == 0 ? ~uint64_t(0) : ((uint64_t(1) << rem) - 1);
}

}  // namespace

Workload random_workload(const Aig& aig, uint64_t seed) {
  Rng rng(mix_seed(seed, 0x574b4c44));
  Workload w;
  w.p.reserve(aig.pis.size());
  for (size_t i = 0; i < aig.pis.size(); ++i) w.p.push_back(rng.u01());
  return w;
}

std::vector<std::vector<uint64_t>> eval_patterns(const Aig& aig,
                                                 const std::vector<std::vector<uint64_t>>& pi_bits,
                                                 int n_patterns) {
  if (pi_bits.size() != aig.pis.size()) throw ArgumentError("pi pattern row count mismatch");
  const int w = words_for(n_patterns);
  std::vector<std::vector<uint64_t>> rows(aig.n());
  int next_pi = 0;
  for (int g = 0; g < aig.n(); ++g) {
    switch (aig.kind[g]) {
      case GateKind::PI:
        rows[g] = pi_bits[next_pi++];
        rows[g].resize(w, 0);
        break;
      case GateKind::AND2: {
        rows[g].resize(w);
        const auto& a = rows[aig.fanin[g][0]];
        const auto& b = rows[aig.fanin[g][1]];
        for (int t = 0; t < w; ++t) rows[g][t] = a[t] & b[t];
        break;
      }
      case GateKind::NOT: {
        rows[g].resize(w);
        const auto& a = rows[aig.fanin[g][0]];
        for (int t = 0; t < w; ++t) rows[g][t] = ~a[t];
        break;
      }
    }
  }
  // clear pattern bits beyond n_patterns in the last word
  const uint64_t tm = tail_mask(n_patterns);
  for (auto& r : rows)
    if (!r.empty()) r.back() &= tm;
  return rows;
}

SimResult simulate(const Aig& aig, const Workload& workload, int n_patterns, uint64_t seed) {
  if (workload.p.size() != aig.pis.size())
    throw ArgumentError("workload length " + std::to_string(workload.p.size()) +
                        " does not match PI count " + std::to_string(aig.pis.size()));
  for (double p : workload.p)
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("workload probability out of [0,1]");
  if (n_patterns < 1) throw ArgumentError("n_patterns must be >= 1");

  Rng rng(mix_seed(seed, 0x53494d50));
  const int w = words_for(n_patterns);
  std::vector<std::vector<uint64_t>> pi_bits(aig.pis.size());
  for (size_t i = 0; i < aig.pis.size(); ++i) {
    auto& row = pi_bits[i];
    row.assign(w, 0);
    for (int t = 0; t < n_patterns; ++t)
      if (rng.bernoulli(workload.p[i])) row[t / 64] |= uint64_t(1) << (t % 64);
  }

  SimResult res;
  res.n_patterns = n_patterns;
  res.responses = eval_patterns(aig, pi_bits, n_patterns);
  res.prob.resize(aig.n());
  for (int g = 0; g < aig.n(); ++g) {
    int64_t ones = 0;
    for (uint64_t word : res.responses[g]) ones += std::popcount(word);
    res.prob[g] = static_cast<double>(ones) / n_patterns;
  }
  return res;
}

TruthTable exact_truth_table(const SubGraph& sub) {
  const int k = static_cast<int>(sub.canonical_pi_order.size());
  if (k > 16) throw CapacityError("exact truth table limited to 16 PIs, got " + std::to_string(k));
  const int n_rows = 1 << k;
  const int w = words_for(n_rows);

  // variable masks: table PI j toggles with period 2^(k-1-j)
  static constexpr uint64_t kVarMask[6] = {0xAAAAAAAAAAAAAAAAull, 0xCCCCCCCCCCCCCCCCull,
                                           0xF0F0F0F0F0F0F0F0ull, 0xFF00FF00FF00FF00ull,
                                           0xFFFF0000FFFF0000ull, 0xFFFFFFFF00000000ull};
  std::vector<std::vector<uint64_t>> pi_bits(sub.local.pis.size());
  for (int j = 0; j < k; ++j) {
    const int r = k - 1 - j;
    std::vector<uint64_t> row(w);
    for (int t = 0; t < w; ++t)
      row[t] = r < 6 ? kVarMask[r] : (((t >> (r - 6)) & 1) ? ~uint64_t(0) : 0);
    // canonical position j corresponds to local pi node canonical_pi_order[j]
    const int local_pi = sub.canonical_pi_order[j];
    const auto it = std::find(sub.local.pis.begin(), sub.local.pis.end(), local_pi);
    assert(it != sub.local.pis.end());
    pi_bits[it - sub.local.pis.begin()] = std::move(row);
  }

  const auto rows = eval_patterns(sub.local, pi_bits, n_rows);
  const auto& root_row = rows[sub.root];
  TruthTable tt;
  tt.k = k;
  tt.bits.resize(n_rows);
  for (int m = 0; m < n_rows; ++m) tt.bits[m] = (root_row[m / 64] >> (m % 64)) & 1u;
  return tt;
}

TruthTable pad_truth_table(const TruthTable& tt) {
  if (tt.k >= 6) throw ArgumentError("pad_truth_table requires k < 6");
  if (static_cast<int>(tt.bits.size()) != (1 << tt.k))
    throw ArgumentError("truth table length does not match k");
  TruthTable out;
  out.k = 6;
  out.bits.resize(64);
  const int rep = 1 << (6 - tt.k);
  for (int m = 0; m < (1 << tt.k); ++m)
    for (int j = 0; j < rep; ++j) out.bits[m * rep + j] = tt.bits[m];
  return out;
}

TruthTable condition_truth_table(const SubGraph& sub,
                                 const std::vector<std::pair<int, int>>& fixings) {
  const int k = static_cast<int>(sub.canonical_pi_order.size());
  if (k <= 6) throw ArgumentError("condition_truth_table requires k > 6");
  if (static_cast<int>(fixings.size()) != k - 6)
    throw ArgumentError("expected " + std::to_string(k - 6) + " fixings, got " +
                        std::to_string(fixings.size()));
  std::vector<int> fixed_value(k, -1);
  for (const auto& [pos, val] : fixings) {
    if (pos < 0 || pos >= k) throw ArgumentError("fixing position out of range");
    if (val != 0 && val != 1) throw ArgumentError("fixing value must be 0 or 1");
    if (fixed_value[pos] != -1) throw ArgumentError("duplicate fixing position");
    fixed_value[pos] = val;
  }
  std::vector<int> free_pos;
  for (int j = 0; j < k; ++j)
    if (fixed_value[j] < 0) free_pos.push_back(j);
  assert(free_pos.size() == 6);

  const TruthTable full = exact_truth_table(sub);
  TruthTable out;
  out.k = 6;
  out.bits.resize(64);
  for (int m = 0; m < 64; ++m) {
    int row = 0;
    for (int j = 0; j < k; ++j) {
      int bit;
      if (fixed_value[j] >= 0) {
        bit = fixed_value[j];
      } else {
        const int fj =
            static_cast<int>(std::find(free_pos.begin(), free_pos.end(), j) - free_pos.begin());
        bit = (m >> (5 - fj)) & 1;
      }
      row = (row << 1) | bit;
    }
    out.bits[m] = full.bits[row];
  }
  return out;
}

double hamming_fraction(const TruthTable& a, const TruthTable& b) {
  if (a.bits.size() != b.bits.size() || a.bits.empty())
    throw ArgumentError("hamming_fraction requires equal non-empty lengths");
  int diff = 0;
  for (size_t m = 0; m < a.bits.size(); ++m) diff += a.bits[m] != b.bits[m];
  return static_cast<double>(diff) / static_cast<double>(a.bits.size());
}

double hamming_fraction(const std::vector<uint64_t>& a, const std::vector<uint64_t>& b,
                        int n_bits) {
  if (n_bits < 1) throw ArgumentError("hamming_fraction requires n_bits >= 1");
  const int w = words_for(n_bits);
  if (static_cast<int>(a.size()) < w || static_cast<int>(b.size()) < w)
    throw ArgumentError("bit vector shorter than n_bits");
  int64_t diff = 0;
  for (int t = 0; t < w; ++t) {
    uint64_t x = a[t] ^ b[t];
    if (t == w - 1) x &= tail_mask(n_bits);
    diff += std::popcount(x);
  }
  return static_cast<double>(diff) / static_cast<double>(n_bits);
}

}  // namespace aigrl
