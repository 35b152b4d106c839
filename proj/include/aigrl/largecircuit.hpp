#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "aigrl/model.hpp"
#include "aigrl/train.hpp"

namespace aigrl {

// Ordered level-band areas covering the whole circuit. Areas are sorted gate
// index lists; band_of_area maps each area to its level band so overlap
// checks can work band-wise after sub-splitting.
struct AreaPartition {
  std::vector<std::vector<int32_t>> areas;
  std::vector<int32_t> band_of_area;
  int hops = 4;
  int delta = 2;
  int max_gates = 512;
};

// Bands sit at levels l, l+delta, ... with the final band clamped to the max
// level. A band merges the l-hop fanin cones of its root gates; zero-fanout
// gates between band levels root into the next band up, and any gate still
// uncovered contributes its own cone so coverage is total. Oversized bands
// split greedily by whole cones in root order.
AreaPartition partition_areas(const Aig& aig, int hops, int delta, int max_gates = 512);

// Throws ArgumentError when coverage, the size cap, or band overlap fails.
void validate_partition(const Aig& aig, const AreaPartition& partition);

// The induced sub-circuit on one area: edges with both endpoints inside.
Aig induced_subcircuit(const Aig& aig, const std::vector<int32_t>& gates);

template <class S>
struct WindowEncodeResult {
  int d = 0;
  std::vector<S> hf, hs;      // n x d merged refined rows
  std::vector<int> visits;    // per gate
};

// Algorithm: tokenize the whole circuit (the sweep has no sequence cap), then
// slide over the areas in order; each area's rows run through both Refine
// Transformers under the area-local mask and merge back as the running mean
// over the visits so far, which later areas then read.
template <class S>
WindowEncodeResult<S> window_shift_encode(const Model<S>& model, const Aig& aig,
                                          const Workload& workload, uint64_t pi_seed,
                                          const AreaPartition& partition) {
  const int n = aig.n();
  const int d = model.cfg.d;
  if (partition.areas.empty()) throw ArgumentError("empty partition");
  for (const auto& area : partition.areas)
    for (int g : area)
      if (g < 0 || g >= n) throw ArgumentError("partition references a gate outside the circuit");

  WindowEncodeResult<S> out;
  out.d = d;
  {
    Tape<S> tape;
    Binder<S> binder(tape, model.store);
    auto state = tokenize(tape, binder, model, aig, workload, pi_seed, /*enforce_cap=*/false);
    auto hf = tape.val(state.hf);
    auto hs = tape.val(state.hs);
    out.hf.assign(hf.begin(), hf.end());
    out.hs.assign(hs.begin(), hs.end());
  }
  out.visits.assign(n, 0);
  std::vector<std::vector<S>> sum_hf(n), sum_hs(n);

  for (const auto& area : partition.areas) {
    const int m = static_cast<int>(area.size());
    const Aig sub = induced_subcircuit(aig, area);
    const ConeMask mask = cone_mask(sub);
    std::vector<S> hf_rows(static_cast<size_t>(m) * d), hs_rows(static_cast<size_t>(m) * d);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < d; ++j) {
        hf_rows[i * d + j] = out.hf[static_cast<size_t>(area[i]) * d + j];
        hs_rows[i * d + j] = out.hs[static_cast<size_t>(area[i]) * d + j];
      }
    Tape<S> tape;
    Binder<S> binder(tape, model.store);
    EmbeddingState<S> st;
    st.hf = tape.leaf(m, d, hf_rows);
    st.hs = tape.leaf(m, d, hs_rows);
    auto refined = refine(tape, binder, model, st, mask);
    auto rf = tape.val(refined.hf);
    auto rs = tape.val(refined.hs);
    for (int i = 0; i < m; ++i) {
      const int g = area[i];
      auto& fh = sum_hf[g];
      auto& sh = sum_hs[g];
      if (fh.empty()) {
        fh.assign(d, S(0));
        sh.assign(d, S(0));
      }
      for (int j = 0; j < d; ++j) {
        fh[j] += rf[i * d + j];
        sh[j] += rs[i * d + j];
      }
      out.visits[g] += 1;
      // merged row = mean of the refined values seen so far
      for (int j = 0; j < d; ++j) {
        out.hf[static_cast<size_t>(g) * d + j] = fh[j] / S(out.visits[g]);
        out.hs[static_cast<size_t>(g) * d + j] = sh[j] / S(out.visits[g]);
      }
    }
  }
  return out;
}

struct FinetuneConfig {
  int steps = 100;
  double lr = 1e-4;
  uint64_t seed = 0;
  // parameter-name prefixes that stay trainable; everything else freezes
  std::vector<std::string> trainable_prefixes = {"rt_", "head.gate_tt"};
};

// Pair-wise truth-table distance fine-tuning through the window encoder.
// Gradients flow through each area's Refine Transformer pass; reads of
// previously merged rows and of the tokenized embeddings are detached, so
// the tokenizer cannot train here.
template <class S>
std::vector<double> finetune_tt_pair(Model<S>& model, const Aig& aig, const Workload& workload,
                                     uint64_t pi_seed, const AreaPartition& partition,
                                     const std::vector<TtPair>& pairs,
                                     const FinetuneConfig& cfg) {
  using Idx = typename Tape<S>::Idx;
  if (pairs.empty()) throw ArgumentError("finetune_tt_pair: no pairs available");
  for (const auto& prefix : cfg.trainable_prefixes)
    if (prefix.rfind("tok_", 0) == 0)
      throw ArgumentError("tokenizer parameters cannot train through the window encoder");
  const int n = aig.n();
  const int d = model.cfg.d;

  for (size_t p = 0; p < model.store.names.size(); ++p) {
    bool train = false;
    for (const auto& prefix : cfg.trainable_prefixes)
      if (model.store.names[p].rfind(prefix, 0) == 0) train = true;
    model.store.trainable[p] = train;
  }
  AdamState<S> adam;
  adam.lr = cfg.lr;
  adam.init_like(model.store);

  // the tokenizer is frozen, so its output is constant across steps
  std::vector<S> tok_hf, tok_hs;
  {
    Tape<S> tape;
    Binder<S> binder(tape, model.store);
    auto state = tokenize(tape, binder, model, aig, workload, pi_seed, false);
    auto hf = tape.val(state.hf);
    auto hs = tape.val(state.hs);
    tok_hf.assign(hf.begin(), hf.end());
    tok_hs.assign(hs.begin(), hs.end());
  }

  std::vector<S> dists;
  dists.reserve(pairs.size());
  for (const auto& p : pairs) dists.push_back(static_cast<S>(p.dist));

  std::vector<double> history;
  for (int step = 0; step < cfg.steps; ++step) {
    Tape<S> tape;
    Binder<S> binder(tape, model.store);
    std::vector<S> merged_hf = tok_hf, merged_hs = tok_hs;
    std::vector<int> visits(n, 0);
    std::vector<std::vector<S>> sum_hf(n), sum_hs(n);
    std::vector<std::vector<std::pair<Idx, int>>> visit_nodes_hf(n);

    for (const auto& area : partition.areas) {
      const int m = static_cast<int>(area.size());
      const Aig sub = induced_subcircuit(aig, area);
      const ConeMask mask = cone_mask(sub);
      std::vector<S> hf_rows(static_cast<size_t>(m) * d), hs_rows(static_cast<size_t>(m) * d);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < d; ++j) {
          hf_rows[i * d + j] = merged_hf[static_cast<size_t>(area[i]) * d + j];
          hs_rows[i * d + j] = merged_hs[static_cast<size_t>(area[i]) * d + j];
        }
      EmbeddingState<S> st;
      st.hf = tape.leaf(m, d, hf_rows);  // detached read of merged state
      st.hs = tape.leaf(m, d, hs_rows);
      auto refined = refine(tape, binder, model, st, mask);
      auto rf = tape.val(refined.hf);
      auto rs = tape.val(refined.hs);
      for (int i = 0; i < m; ++i) {
        const int g = area[i];
        visit_nodes_hf[g].push_back({refined.hf, i});
        auto& fh = sum_hf[g];
        auto& sh = sum_hs[g];
        if (fh.empty()) {
          fh.assign(d, S(0));
          sh.assign(d, S(0));
        }
        for (int j = 0; j < d; ++j) {
          fh[j] += rf[i * d + j];
          sh[j] += rs[i * d + j];
        }
        visits[g] += 1;
        for (int j = 0; j < d; ++j) {
          merged_hf[static_cast<size_t>(g) * d + j] = fh[j] / S(visits[g]);
          merged_hs[static_cast<size_t>(g) * d + j] = sh[j] / S(visits[g]);
        }
      }
    }

    auto final_row = [&](int g) -> Idx {
      if (visit_nodes_hf[g].empty())
        throw ArgumentError("finetune pair references an uncovered gate");
      if (visit_nodes_hf[g].size() == 1) {
        auto [node, r] = visit_nodes_hf[g][0];
        return tape.row(node, r);
      }
      return tape.mean_rows(tape.stack_rows(visit_nodes_hf[g]));
    };
    std::vector<std::pair<Idx, int>> a_rows, b_rows;
    for (const auto& p : pairs) {
      a_rows.push_back({final_row(std::min(p.i, p.j)), 0});
      b_rows.push_back({final_row(std::max(p.i, p.j)), 0});
    }
    Idx input = tape.concat_cols(tape.stack_rows(a_rows), tape.stack_rows(b_rows));
    Idx pred = apply_head(tape, binder, model, Head::gate_tt, input);
    Idx loss = tape.l1_loss(pred, dists);
    history.push_back(static_cast<double>(tape.scalar(loss)));
    tape.backward(loss);
    adam_step(model.store, binder.grads(), adam);
  }
  return history;
}

struct ScoredPair {
  int32_t i = 0, j = 0;
  double score = 0.0;
};

// Scores candidate pairs with the pair-distance head over merged functional
// rows. Emits pairs whose score crosses theta (>= by default, <= when
// emit_above is false), sorted by descending score then ascending indices.
template <class S>
std::vector<ScoredPair> correlated_pairs(const Model<S>& model, const std::vector<S>& merged_hf,
                                         int n, double theta,
                                         const std::vector<std::pair<int, int>>& candidates,
                                         bool emit_above = true) {
  using Idx = typename Tape<S>::Idx;
  if (!(theta >= 0.0 && theta <= 1.0)) throw ArgumentError("theta must lie in [0, 1]");
  const int d = model.cfg.d;
  if (static_cast<int>(merged_hf.size()) != n * d)
    throw ArgumentError("merged row buffer size mismatch");
  std::vector<ScoredPair> out;
  if (candidates.empty()) return out;
  Tape<S> tape;
  Binder<S> binder(tape, model.store);
  Idx rows = tape.leaf(n, d, merged_hf);
  std::vector<std::pair<Idx, int>> a_rows, b_rows;
  for (const auto& [i, j] : candidates) {
    if (i == j || i < 0 || j < 0 || i >= n || j >= n)
      throw ArgumentError("bad candidate pair");
    a_rows.push_back({rows, std::min(i, j)});
    b_rows.push_back({rows, std::max(i, j)});
  }
  Idx input = tape.concat_cols(tape.stack_rows(a_rows), tape.stack_rows(b_rows));
  Idx pred = apply_head(tape, binder, model, Head::gate_tt, input);
  auto pv = tape.val(pred);
  for (size_t c = 0; c < candidates.size(); ++c) {
    const double score = static_cast<double>(pv[c]);
    const bool keep = emit_above ? score >= theta : score <= theta;
    if (keep)
      out.push_back({std::min(candidates[c].first, candidates[c].second),
                     std::max(candidates[c].first, candidates[c].second), score});
  }
  std::sort(out.begin(), out.end(), [](const ScoredPair& a, const ScoredPair& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  return out;
}

// Plain text export: header comment with theta, seed and checkpoint hash,
// then one "i j score" line per pair.
std::string format_pair_export(const std::vector<ScoredPair>& pairs, double theta, uint64_t seed,
                               const std::string& checkpoint_hash);

}  // namespace aigrl
