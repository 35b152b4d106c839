#pragma once

#include <array>
#include <cmath>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "aigrl/aig.hpp"
#include "aigrl/labels.hpp"
#include "aigrl/rng.hpp"
#include "aigrl/sim.hpp"
#include "aigrl/tensor.hpp"

namespace aigrl {

struct ModelConfig {
  int d = 128;
  int rt_depth = 12;
  int pt_depth = 3;
  int n_heads = 4;
  int head_hidden = 0;  // 0 selects 2*d
  int ff_mult = 4;
  int tokenizer_rounds = 1;
  int seq_cap = 512;
  int pt_seq_cap = 64;

  int hidden() const { return head_hidden > 0 ? head_hidden : 2 * d; }
  void check() const {
    if (d < 1 || rt_depth < 1 || pt_depth < 1 || n_heads < 1 || tokenizer_rounds < 1)
      throw ArgumentError("model config: dimensions and depths must be >= 1");
    if (d % n_heads != 0) throw ArgumentError("model config: d must be divisible by n_heads");
  }
};

// handles into the ParamStore
struct LinearP {
  int w = -1, b = -1;
};
struct NormP {
  int gamma = -1, beta = -1;
};
struct AttnP {
  LinearP q, k, v, o;
};
struct BlockP {
  NormP norm_q, norm_kv, norm_ff;
  AttnP attn;
  LinearP ff1, ff2;
};
struct GruP {
  LinearP z_in, z_h, r_in, r_h, h_in, h_h;
};
struct TokStreamP {
  LinearP agg_and, agg_not;
  GruP gru;
};
struct MlpP {
  LinearP l1, l2, l3;
};

enum class Head { prob, gate_tt, lev, con, size, depth, tt, graph_tt, graph_ged, in_graph };

inline const char* head_name(Head h) {
  switch (h) {
    case Head::prob: return "prob";
    case Head::gate_tt: return "gate_tt";
    case Head::lev: return "lev";
    case Head::con: return "con";
    case Head::size: return "size";
    case Head::depth: return "depth";
    case Head::tt: return "tt";
    case Head::graph_tt: return "graph_tt";
    case Head::graph_ged: return "graph_ged";
    case Head::in_graph: return "in";
  }
  return "?";
}

struct ModelParams {
  TokStreamP tok_f, tok_s;
  std::vector<BlockP> rt_f, rt_s;
  std::vector<BlockP> pt_f, pt_s;
  int cls = -1, dont_care = -1, zero_tok = -1, one_tok = -1;
  int pos_f = -1, pos_s = -1;
  std::array<MlpP, 10> heads;
};

template <class S>
struct Model {
  ModelConfig cfg;
  ParamStore<S> store;
  ModelParams p;
};

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

namespace detail {

template <class S>
Tensor<S> xavier(Rng& rng, int fan_in, int fan_out) {
  Tensor<S> t = Tensor<S>::zeros({fan_in, fan_out});
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : t.data) v = static_cast<S>((rng.u01() * 2.0 - 1.0) * limit);
  return t;
}

template <class S>
Tensor<S> small_normal(Rng& rng, std::vector<int64_t> shape, double scale = 0.02) {
  Tensor<S> t = Tensor<S>::zeros(std::move(shape));
  for (auto& v : t.data) v = static_cast<S>(rng.normal() * scale);
  return t;
}

template <class S>
LinearP add_linear(ParamStore<S>& store, Rng& rng, const std::string& name, int fan_in,
                   int fan_out) {
  LinearP p;
  p.w = store.add(name + ".w", xavier<S>(rng, fan_in, fan_out));
  p.b = store.add(name + ".b", Tensor<S>::zeros({fan_out}));
  return p;
}

template <class S>
NormP add_norm(ParamStore<S>& store, const std::string& name, int d) {
  NormP p;
  Tensor<S> ones = Tensor<S>::zeros({d});
  for (auto& v : ones.data) v = S(1);
  p.gamma = store.add(name + ".gamma", std::move(ones));
  p.beta = store.add(name + ".beta", Tensor<S>::zeros({d}));
  return p;
}

template <class S>
BlockP add_block(ParamStore<S>& store, Rng& rng, const std::string& name, int d, int ff_mult) {
  BlockP blk;
  blk.norm_q = add_norm<S>(store, name + ".norm_q", d);
  blk.norm_kv = add_norm<S>(store, name + ".norm_kv", d);
  blk.norm_ff = add_norm<S>(store, name + ".norm_ff", d);
  blk.attn.q = add_linear<S>(store, rng, name + ".attn.q", d, d);
  blk.attn.k = add_linear<S>(store, rng, name + ".attn.k", d, d);
  blk.attn.v = add_linear<S>(store, rng, name + ".attn.v", d, d);
  blk.attn.o = add_linear<S>(store, rng, name + ".attn.o", d, d);
  blk.ff1 = add_linear<S>(store, rng, name + ".ff1", d, ff_mult * d);
  blk.ff2 = add_linear<S>(store, rng, name + ".ff2", ff_mult * d, d);
  return blk;
}

template <class S>
TokStreamP add_tok_stream(ParamStore<S>& store, Rng& rng, const std::string& name, int d) {
  TokStreamP p;
  p.agg_and = add_linear<S>(store, rng, name + ".agg_and", d, d);
  p.agg_not = add_linear<S>(store, rng, name + ".agg_not", d, d);
  p.gru.z_in = add_linear<S>(store, rng, name + ".gru.z_in", d, d);
  p.gru.z_h = add_linear<S>(store, rng, name + ".gru.z_h", d, d);
  p.gru.r_in = add_linear<S>(store, rng, name + ".gru.r_in", d, d);
  p.gru.r_h = add_linear<S>(store, rng, name + ".gru.r_h", d, d);
  p.gru.h_in = add_linear<S>(store, rng, name + ".gru.h_in", d, d);
  p.gru.h_h = add_linear<S>(store, rng, name + ".gru.h_h", d, d);
  return p;
}

inline int head_input_cols(Head h, int d) {
  switch (h) {
    case Head::prob:
    case Head::lev:
    case Head::size:
    case Head::depth:
    case Head::tt:
      return d;
    default:
      return 2 * d;
  }
}

inline int head_output_cols(Head h) {
  switch (h) {
    case Head::tt: return 64;
    case Head::con: return 3;
    default: return 1;
  }
}

}  // namespace detail

template <class S>
Model<S> init_model(const ModelConfig& cfg, uint64_t seed) {
  cfg.check();
  Model<S> m;
  m.cfg = cfg;
  Rng rng(mix_seed(seed, 0x4d4f44));
  m.p.tok_f = detail::add_tok_stream<S>(m.store, rng, "tok_f", cfg.d);
  m.p.tok_s = detail::add_tok_stream<S>(m.store, rng, "tok_s", cfg.d);
  for (int l = 0; l < cfg.rt_depth; ++l) {
    m.p.rt_f.push_back(
        detail::add_block<S>(m.store, rng, "rt_f." + std::to_string(l), cfg.d, cfg.ff_mult));
    m.p.rt_s.push_back(
        detail::add_block<S>(m.store, rng, "rt_s." + std::to_string(l), cfg.d, cfg.ff_mult));
  }
  for (int l = 0; l < cfg.pt_depth; ++l) {
    m.p.pt_f.push_back(
        detail::add_block<S>(m.store, rng, "pt_f." + std::to_string(l), cfg.d, cfg.ff_mult));
    m.p.pt_s.push_back(
        detail::add_block<S>(m.store, rng, "pt_s." + std::to_string(l), cfg.d, cfg.ff_mult));
  }
  m.p.cls = m.store.add("special.cls", detail::small_normal<S>(rng, {1, cfg.d}));
  m.p.dont_care = m.store.add("special.dont_care", detail::small_normal<S>(rng, {1, cfg.d}));
  m.p.zero_tok = m.store.add("special.zero", detail::small_normal<S>(rng, {1, cfg.d}));
  m.p.one_tok = m.store.add("special.one", detail::small_normal<S>(rng, {1, cfg.d}));
  m.p.pos_f = m.store.add("special.pos_f",
                          detail::small_normal<S>(rng, {cfg.pt_seq_cap, cfg.d}));
  m.p.pos_s = m.store.add("special.pos_s",
                          detail::small_normal<S>(rng, {cfg.pt_seq_cap, cfg.d}));
  for (int h = 0; h < 10; ++h) {
    const Head head = static_cast<Head>(h);
    const std::string name = std::string("head.") + head_name(head);
    const int din = detail::head_input_cols(head, cfg.d);
    const int hidden = cfg.hidden();
    m.p.heads[h].l1 = detail::add_linear<S>(m.store, rng, name + ".l1", din, hidden);
    m.p.heads[h].l2 = detail::add_linear<S>(m.store, rng, name + ".l2", hidden, hidden);
    m.p.heads[h].l3 =
        detail::add_linear<S>(m.store, rng, name + ".l3", hidden, detail::head_output_cols(head));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Tape binding
// ---------------------------------------------------------------------------

// Lazily binds store tensors as tape leaves; only touched parameters carry
// gradient buffers back to the optimizer.
template <class S>
class Binder {
 public:
  using Idx = typename Tape<S>::Idx;

  Binder(Tape<S>& tape, const ParamStore<S>& store)
      : tape_(tape), store_(store), bound_(store.values.size(), -1) {}

  Idx operator()(int handle) {
    if (handle < 0 || handle >= static_cast<int>(bound_.size()))
      throw ArgumentError("unknown parameter handle");
    if (bound_[handle] < 0) bound_[handle] = tape_.leaf(store_.values[handle]);
    return bound_[handle];
  }

  Tape<S>& tape() { return tape_; }

  // store-aligned gradient buffers; untouched tensors stay empty
  std::vector<std::vector<S>> grads() const {
    std::vector<std::vector<S>> out(bound_.size());
    for (size_t h = 0; h < bound_.size(); ++h)
      if (bound_[h] >= 0) {
        auto g = tape_.grad(bound_[h]);
        out[h].assign(g.begin(), g.end());
      }
    return out;
  }

 private:
  Tape<S>& tape_;
  const ParamStore<S>& store_;
  std::vector<Idx> bound_;
};

// ---------------------------------------------------------------------------
// Forward blocks
// ---------------------------------------------------------------------------

namespace detail {

template <class S>
typename Tape<S>::Idx linear(Tape<S>& tape, Binder<S>& B, const LinearP& p,
                             typename Tape<S>::Idx x) {
  return tape.add_rowvec(tape.matmul(x, B(p.w)), B(p.b));
}

template <class S>
typename Tape<S>::Idx multi_head_attention(Tape<S>& tape, Binder<S>& B, const AttnP& p,
                                           typename Tape<S>::Idx xq, typename Tape<S>::Idx xkv,
                                           const std::vector<std::vector<int>>& allowed,
                                           int n_heads) {
  using Idx = typename Tape<S>::Idx;
  const int d = tape.cols(xq);
  const int dh = d / n_heads;
  Idx q = linear(tape, B, p.q, xq);
  Idx k = linear(tape, B, p.k, xkv);
  Idx v = linear(tape, B, p.v, xkv);
  Idx merged = -1;
  for (int h = 0; h < n_heads; ++h) {
    Idx qh = tape.slice_cols(q, h * dh, (h + 1) * dh);
    Idx kh = tape.slice_cols(k, h * dh, (h + 1) * dh);
    Idx vh = tape.slice_cols(v, h * dh, (h + 1) * dh);
    Idx scores = tape.scale(tape.matmul_nt(qh, kh), S(1.0 / std::sqrt(double(dh))));
    Idx probs = tape.softmax_masked(scores, allowed);
    Idx ctx = tape.matmul(probs, vh);
    merged = h == 0 ? ctx : tape.concat_cols(merged, ctx);
  }
  return linear(tape, B, p.o, merged);
}

// pre-norm block; queries evolve while keys and values come from kv_src, so
// a row's receptive field never grows beyond its allowed key set no matter
// how many blocks are stacked
template <class S>
typename Tape<S>::Idx block(Tape<S>& tape, Binder<S>& B, const BlockP& blk,
                            typename Tape<S>::Idx x, typename Tape<S>::Idx kv_src,
                            const std::vector<std::vector<int>>& allowed, int n_heads) {
  using Idx = typename Tape<S>::Idx;
  Idx xq = tape.layer_norm(x, B(blk.norm_q.gamma), B(blk.norm_q.beta));
  Idx kv = tape.layer_norm(kv_src, B(blk.norm_kv.gamma), B(blk.norm_kv.beta));
  Idx attn = multi_head_attention(tape, B, blk.attn, xq, kv, allowed, n_heads);
  x = tape.add(x, attn);
  Idx h = tape.layer_norm(x, B(blk.norm_ff.gamma), B(blk.norm_ff.beta));
  Idx ff = linear(tape, B, blk.ff2, tape.relu(linear(tape, B, blk.ff1, h)));
  return tape.add(x, ff);
}

template <class S>
typename Tape<S>::Idx gru_update(Tape<S>& tape, Binder<S>& B, const GruP& p,
                                 typename Tape<S>::Idx agg, typename Tape<S>::Idx h_prev) {
  using Idx = typename Tape<S>::Idx;
  Idx z = tape.sigmoid(tape.add(linear(tape, B, p.z_in, agg), linear(tape, B, p.z_h, h_prev)));
  Idx r = tape.sigmoid(tape.add(linear(tape, B, p.r_in, agg), linear(tape, B, p.r_h, h_prev)));
  Idx htil = tape.tanh_(tape.add(linear(tape, B, p.h_in, agg),
                                 linear(tape, B, p.h_h, tape.mul(r, h_prev))));
  // h = h_prev + z * (htil - h_prev)
  return tape.add(h_prev, tape.mul(z, tape.sub(htil, h_prev)));
}

// seeded orthonormal rows; wraps with sign flips when k exceeds d
template <class S>
Tensor<S> pi_orthonormal(int k, int d, uint64_t seed) {
  Rng rng(mix_seed(seed, 0x4f525448));
  const int base_rows = std::min(k, d);
  std::vector<std::vector<double>> basis;
  while (static_cast<int>(basis.size()) < base_rows) {
    std::vector<double> v(d);
    for (auto& x : v) x = rng.normal();
    for (const auto& b : basis) {
      double dot = 0;
      for (int j = 0; j < d; ++j) dot += v[j] * b[j];
      for (int j = 0; j < d; ++j) v[j] -= dot * b[j];
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;  // redraw a degenerate vector
    for (auto& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  Tensor<S> t = Tensor<S>::zeros({k, d});
  for (int i = 0; i < k; ++i) {
    if (i < d) {
      for (int j = 0; j < d; ++j) t.data[i * d + j] = static_cast<S>(basis[i][j]);
    } else {
      // orthogonality is impossible past d rows; reuse with sign flips
      if (i == d)
        std::cerr << "[model] warning: " << k << " PIs exceed width " << d
                  << ", PI structural rows wrap with sign flips\n";
      for (int j = 0; j < d; ++j)
        t.data[i * d + j] =
            static_cast<S>(basis[i % d][j] * (rng.bernoulli(0.5) ? 1.0 : -1.0));
    }
  }
  return t;
}

inline std::vector<std::vector<int>> full_attention(int n) {
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  return std::vector<std::vector<int>>(n, all);
}

inline std::vector<std::vector<int>> mask_to_lists(const ConeMask& mask) {
  std::vector<std::vector<int>> allowed(mask.n);
  for (int q = 0; q < mask.n; ++q)
    for (int k = 0; k < mask.n; ++k)
      if (mask.allow(q, k)) allowed[q].push_back(k);
  return allowed;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

template <class S>
struct EmbeddingState {
  typename Tape<S>::Idx hs = -1;
  typename Tape<S>::Idx hf = -1;
  bool refined = false;
};

// Two-stream GNN tokenizer: PI functional rows repeat the workload
// probability, PI structural rows form a seeded orthonormal set, and a
// level-synchronous gate-type-conditioned aggregation with a gated recurrent
// update fills the remaining rows.
template <class S>
EmbeddingState<S> tokenize(Tape<S>& tape, Binder<S>& B, const Model<S>& model, const Aig& aig,
                           const Workload& workload, uint64_t pi_seed, bool enforce_cap = true) {
  using Idx = typename Tape<S>::Idx;
  const int n = aig.n();
  const int d = model.cfg.d;
  if (enforce_cap && n > model.cfg.seq_cap)
    throw CapacityError("circuit of " + std::to_string(n) + " gates exceeds sequence cap " +
                        std::to_string(model.cfg.seq_cap) + "; partition first");
  if (workload.p.size() != aig.pis.size())
    throw ArgumentError("workload length does not match PI count");

  const int n_pis = static_cast<int>(aig.pis.size());
  Tensor<S> pi_hf = Tensor<S>::zeros({std::max(n_pis, 1), d});
  for (int i = 0; i < n_pis; ++i)
    for (int j = 0; j < d; ++j) pi_hf.data[i * d + j] = static_cast<S>(workload.p[i]);
  Idx pi_hf_idx = tape.leaf(pi_hf);
  Idx pi_hs_idx = tape.leaf(detail::pi_orthonormal<S>(std::max(n_pis, 1), d, pi_seed));

  // per-gate row references into level-batch matrices
  std::vector<std::pair<Idx, int>> row_f(n, {-1, 0}), row_s(n, {-1, 0});
  for (int i = 0; i < n_pis; ++i) {
    row_f[aig.pis[i]] = {pi_hf_idx, i};
    row_s[aig.pis[i]] = {pi_hs_idx, i};
  }

  int max_level = 0;
  for (int g = 0; g < n; ++g) max_level = std::max(max_level, static_cast<int>(aig.level[g]));
  std::vector<std::vector<int>> ands_at(max_level + 1), nots_at(max_level + 1);
  for (int g = 0; g < n; ++g) {
    if (aig.kind[g] == GateKind::AND2) ands_at[aig.level[g]].push_back(g);
    if (aig.kind[g] == GateKind::NOT) nots_at[aig.level[g]].push_back(g);
  }

  for (int round = 0; round < model.cfg.tokenizer_rounds; ++round) {
    for (int lvl = 1; lvl <= max_level; ++lvl) {
      for (int pass = 0; pass < 2; ++pass) {
        const auto& gates = pass == 0 ? ands_at[lvl] : nots_at[lvl];
        if (gates.empty()) continue;
        const int m = static_cast<int>(gates.size());
        auto sweep_stream = [&](std::vector<std::pair<Idx, int>>& rows, const TokStreamP& tok) {
          std::vector<std::pair<Idx, int>> f0, f1, prev;
          for (int g : gates) {
            f0.push_back(rows[aig.fanin[g][0]]);
            if (pass == 0) f1.push_back(rows[aig.fanin[g][1]]);
            prev.push_back(rows[g]);
          }
          Idx agg;
          if (pass == 0) {
            Idx a0 = detail::linear(tape, B, tok.agg_and, tape.stack_rows(f0));
            Idx a1 = detail::linear(tape, B, tok.agg_and, tape.stack_rows(f1));
            agg = tape.scale(tape.add(a0, a1), S(0.5));
          } else {
            agg = detail::linear(tape, B, tok.agg_not, tape.stack_rows(f0));
          }
          Idx h_prev = round == 0 && rows[gates[0]].first < 0 ? tape.zeros(m, d)
                                                              : tape.stack_rows(prev);
          Idx h = detail::gru_update(tape, B, tok.gru, agg, h_prev);
          for (int i = 0; i < m; ++i) rows[gates[i]] = {h, i};
        };
        sweep_stream(row_f, model.p.tok_f);
        sweep_stream(row_s, model.p.tok_s);
      }
    }
  }

  EmbeddingState<S> state;
  state.hf = tape.stack_rows(row_f);
  state.hs = tape.stack_rows(row_s);
  state.refined = false;
  return state;
}

// ---------------------------------------------------------------------------
// Refine Transformers
// ---------------------------------------------------------------------------

// Two independent stacks over the summed streams. Queries evolve through the
// stack; keys and values stay pinned to the stage input so that a gate's
// refined row depends on exactly its fanin/fanout cone rows.
template <class S>
EmbeddingState<S> refine(Tape<S>& tape, Binder<S>& B, const Model<S>& model,
                         const EmbeddingState<S>& state, const ConeMask& mask) {
  using Idx = typename Tape<S>::Idx;
  const int n = tape.rows(state.hf);
  if (mask.n != n) throw ArgumentError("mask dimension " + std::to_string(mask.n) +
                                       " does not match row count " + std::to_string(n));
  if (n > model.cfg.seq_cap)
    throw CapacityError("refine sequence of " + std::to_string(n) + " exceeds cap " +
                        std::to_string(model.cfg.seq_cap));
  const auto allowed = detail::mask_to_lists(mask);
  Idx x0 = tape.add(state.hf, state.hs);
  Idx xf = x0, xs = x0;
  for (const auto& blk : model.p.rt_f)
    xf = detail::block(tape, B, blk, xf, x0, allowed, model.cfg.n_heads);
  for (const auto& blk : model.p.rt_s)
    xs = detail::block(tape, B, blk, xs, x0, allowed, model.cfg.n_heads);
  EmbeddingState<S> out;
  out.hf = xf;
  out.hs = xs;
  out.refined = true;
  return out;
}

// ---------------------------------------------------------------------------
// Pooling Transformers
// ---------------------------------------------------------------------------

// Functional pooling: [CLS] + PI slot tokens + PO token, self-attention,
// final [CLS] row. Slots follow the canonical PI order; a short cone pads
// with [Don't care] slots up to 6, a wide cone replaces the planned PIs with
// [Zero]/[One] tokens.
template <class S>
typename Tape<S>::Idx pool_functional(Tape<S>& tape, Binder<S>& B, const Model<S>& model,
                                      const SubGraph& sub, const TokenPlan& plan,
                                      typename Tape<S>::Idx refined_hf,
                                      const std::vector<int>& parent_rows) {
  using Idx = typename Tape<S>::Idx;
  const int k = static_cast<int>(sub.canonical_pi_order.size());
  if (plan.n_pis != k)
    throw ArgumentError("token plan PI count " + std::to_string(plan.n_pis) +
                        " does not match cone PI count " + std::to_string(k));
  std::vector<int> fixed_value(k, -1);
  if (k > 6) {
    if (static_cast<int>(plan.fixings.size()) != k - 6)
      throw ArgumentError("token plan must fix exactly " + std::to_string(k - 6) + " PIs");
    for (const auto& [pos, val] : plan.fixings) {
      if (pos < 0 || pos >= k || (val != 0 && val != 1) || fixed_value[pos] != -1)
        throw ArgumentError("invalid fixing in token plan");
      fixed_value[pos] = val;
    }
  } else if (!plan.fixings.empty()) {
    throw ArgumentError("token plan with fixings on a narrow cone");
  }

  std::vector<std::pair<Idx, int>> seq;
  seq.push_back({B(model.p.cls), 0});
  const int n_slots = std::max(k, 6);
  for (int slot = 0; slot < n_slots; ++slot) {
    if (slot >= k) {
      seq.push_back({B(model.p.dont_care), 0});
    } else if (fixed_value[slot] == 0) {
      seq.push_back({B(model.p.zero_tok), 0});
    } else if (fixed_value[slot] == 1) {
      seq.push_back({B(model.p.one_tok), 0});
    } else {
      const int parent_row = parent_rows[sub.canonical_pi_order[slot]];
      seq.push_back({refined_hf, parent_row});
    }
  }
  seq.push_back({refined_hf, parent_rows[sub.root]});

  const int len = static_cast<int>(seq.size());
  if (len > model.cfg.pt_seq_cap)
    throw CapacityError("pooling sequence exceeds pt_seq_cap");
  Idx x = tape.stack_rows(seq);
  std::vector<int> positions(len);
  for (int i = 0; i < len; ++i) positions[i] = i;
  x = tape.add(x, tape.gather_rows(B(model.p.pos_f), positions));
  const auto allowed = detail::full_attention(len);
  for (const auto& blk : model.p.pt_f)
    x = detail::block(tape, B, blk, x, x, allowed, model.cfg.n_heads);
  return tape.row(x, 0);
}

// Structural pooling: [CLS] + every gate row in canonical order.
template <class S>
typename Tape<S>::Idx pool_structural(Tape<S>& tape, Binder<S>& B, const Model<S>& model,
                                      const SubGraph& sub, typename Tape<S>::Idx refined_hs,
                                      const std::vector<int>& parent_rows) {
  using Idx = typename Tape<S>::Idx;
  const int len = sub.local.n() + 1;
  if (len > model.cfg.pt_seq_cap)
    throw CapacityError("pooling sequence of " + std::to_string(len) + " exceeds pt_seq_cap " +
                        std::to_string(model.cfg.pt_seq_cap));
  std::vector<std::pair<Idx, int>> seq;
  seq.push_back({B(model.p.cls), 0});
  for (int v = 0; v < sub.local.n(); ++v) seq.push_back({refined_hs, parent_rows[v]});
  Idx x = tape.stack_rows(seq);
  std::vector<int> positions(len);
  for (int i = 0; i < len; ++i) positions[i] = i;
  x = tape.add(x, tape.gather_rows(B(model.p.pos_s), positions));
  const auto allowed = detail::full_attention(len);
  for (const auto& blk : model.p.pt_s)
    x = detail::block(tape, B, blk, x, x, allowed, model.cfg.n_heads);
  return tape.row(x, 0);
}

// ---------------------------------------------------------------------------
// Prediction heads
// ---------------------------------------------------------------------------

// 3-layer MLP readout; input is m x d for single-embedding heads or m x 2d
// for pair heads. Output activation fixes the declared range per head.
template <class S>
typename Tape<S>::Idx apply_head(Tape<S>& tape, Binder<S>& B, const Model<S>& model, Head head,
                                 typename Tape<S>::Idx input) {
  using Idx = typename Tape<S>::Idx;
  const int expect = detail::head_input_cols(head, model.cfg.d);
  if (tape.cols(input) != expect)
    throw ArgumentError(std::string("head ") + head_name(head) + " expects " +
                        std::to_string(expect) + " input columns, got " +
                        std::to_string(tape.cols(input)));
  const MlpP& mlp = model.p.heads[static_cast<int>(head)];
  Idx h = tape.relu(detail::linear(tape, B, mlp.l1, input));
  h = tape.relu(detail::linear(tape, B, mlp.l2, h));
  Idx out = detail::linear(tape, B, mlp.l3, h);
  switch (head) {
    case Head::prob:
    case Head::gate_tt:
    case Head::graph_tt:
    case Head::in_graph:
    case Head::tt:
      return tape.sigmoid(out);
    case Head::lev:
    case Head::size:
    case Head::depth:
    case Head::graph_ged:
      return tape.softplus(out);
    case Head::con:
      return out;  // raw 3-class logits
  }
  throw ArgumentError("unknown head");
}

}  // namespace aigrl
