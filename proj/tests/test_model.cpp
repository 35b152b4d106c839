#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "aigrl/checkpoint.hpp"
#include "aigrl/model.hpp"
#include "aigrl/rng.hpp"
#include "oracles.hpp"

using namespace aigrl;

namespace {

ModelConfig tiny_cfg(int d = 8, int rt = 2, int pt = 1, int heads = 2) {
  ModelConfig cfg;
  cfg.d = d;
  cfg.rt_depth = rt;
  cfg.pt_depth = pt;
  cfg.n_heads = heads;
  cfg.head_hidden = 2 * d;
  cfg.ff_mult = 2;
  cfg.seq_cap = 512;
  cfg.pt_seq_cap = 32;
  return cfg;
}

template <class S>
std::pair<std::vector<S>, std::vector<S>> tokenized_values(const Model<S>& model, const Aig& aig,
                                                           const Workload& wl, uint64_t seed) {
  Tape<S> tape;
  Binder<S> binder(tape, model.store);
  auto state = tokenize(tape, binder, model, aig, wl, seed);
  auto hf = tape.val(state.hf);
  auto hs = tape.val(state.hs);
  return {{hf.begin(), hf.end()}, {hs.begin(), hs.end()}};
}

template <class S>
std::pair<std::vector<S>, std::vector<S>> refined_from_raw(const Model<S>& model,
                                                           const std::vector<S>& hf_raw,
                                                           const std::vector<S>& hs_raw, int n,
                                                           const ConeMask& mask) {
  Tape<S> tape;
  Binder<S> binder(tape, model.store);
  EmbeddingState<S> st;
  st.hf = tape.leaf(n, model.cfg.d, hf_raw);
  st.hs = tape.leaf(n, model.cfg.d, hs_raw);
  auto refined = refine(tape, binder, model, st, mask);
  auto hf = tape.val(refined.hf);
  auto hs = tape.val(refined.hs);
  return {{hf.begin(), hf.end()}, {hs.begin(), hs.end()}};
}

}  // namespace

TEST_CASE("tokenize repeats the PI probability across the functional row") {
  Aig g;
  g.add_gate(GateKind::PI);
  finalize(g);
  auto model = init_model<double>(tiny_cfg(4, 1, 1, 1), 7);
  auto [hf, hs] = tokenized_values(model, g, Workload{{0.25}}, 3);
  REQUIRE(hf.size() == 4);
  for (double v : hf) CHECK(v == 0.25);
}

TEST_CASE("tokenize gives PIs orthogonal structural rows") {
  Aig g;
  g.add_gate(GateKind::PI);
  g.add_gate(GateKind::PI);
  finalize(g);
  auto model = init_model<double>(tiny_cfg(8, 1, 1, 1), 7);
  auto [hf, hs] = tokenized_values(model, g, Workload{{0.5, 0.5}}, 3);
  double dot = 0, n0 = 0, n1 = 0;
  for (int j = 0; j < 8; ++j) {
    dot += hs[j] * hs[8 + j];
    n0 += hs[j] * hs[j];
    n1 += hs[8 + j] * hs[8 + j];
  }
  CHECK(std::abs(dot) < 1e-6);
  CHECK(n0 == doctest::Approx(1.0));
  CHECK(n1 == doctest::Approx(1.0));
}

TEST_CASE("tokenize commutes with storage permutation") {
  Rng rng(13);
  auto model = init_model<double>(tiny_cfg(8, 1, 1, 2), 11);
  for (int trial = 0; trial < 5; ++trial) {
    Aig g = generate_random_aig(40 + trial, 4, 25);
    Workload wl = random_workload(g, 5);
    auto [permuted, perm] = oracle::random_topo_permutation(g, rng, true);
    auto [hf_a, hs_a] = tokenized_values(model, g, wl, 9);
    auto [hf_b, hs_b] = tokenized_values(model, permuted, wl, 9);
    const int d = model.cfg.d;
    for (int v = 0; v < g.n(); ++v)
      for (int j = 0; j < d; ++j) {
        CHECK(hf_a[v * d + j] == doctest::Approx(hf_b[perm[v] * d + j]).epsilon(1e-6));
        CHECK(hs_a[v * d + j] == doctest::Approx(hs_b[perm[v] * d + j]).epsilon(1e-6));
      }
  }
}

TEST_CASE("tokenizer rounds feed the previous sweep back as recurrent state") {
  Aig g = generate_random_aig(61, 4, 25);
  Workload wl = random_workload(g, 3);
  auto cfg1 = tiny_cfg(8, 1, 1, 2);
  auto cfg2 = cfg1;
  cfg2.tokenizer_rounds = 2;
  auto m1 = init_model<double>(cfg1, 5);
  auto m2 = init_model<double>(cfg2, 5);  // identical params, one extra sweep
  auto [hf1, hs1] = tokenized_values(m1, g, wl, 9);
  auto [hf2, hs2] = tokenized_values(m2, g, wl, 9);
  CHECK(hf1 != hf2);
  // PI rows stay fixed across rounds
  const int d = cfg1.d;
  for (int pi : g.pis)
    for (int j = 0; j < d; ++j) CHECK(hf1[pi * d + j] == hf2[pi * d + j]);
  auto [hf2b, hs2b] = tokenized_values(m2, g, wl, 9);
  CHECK(hf2 == hf2b);
}

TEST_CASE("tokenize wraps structural rows when PI count exceeds the width") {
  Aig g;
  for (int i = 0; i < 12; ++i) g.add_gate(GateKind::PI);
  int acc = 0;
  for (int i = 1; i < 12; ++i) acc = g.add_gate(GateKind::AND2, acc, i);
  finalize(g);
  auto model = init_model<double>(tiny_cfg(8, 1, 1, 2), 7);
  Workload wl;
  wl.p.assign(12, 0.5);
  auto [hf, hs] = tokenized_values(model, g, wl, 11);
  // every PI structural row keeps unit norm, including the wrapped ones
  for (int i = 0; i < 12; ++i) {
    double norm = 0;
    for (int j = 0; j < 8; ++j) norm += hs[i * 8 + j] * hs[i * 8 + j];
    CHECK(norm == doctest::Approx(1.0));
  }
}

TEST_CASE("tokenize enforces the sequence cap unless disabled") {
  auto cfg = tiny_cfg(4, 1, 1, 1);
  cfg.seq_cap = 8;
  auto model = init_model<float>(cfg, 1);
  Aig g = generate_random_aig(3, 4, 20);
  Workload wl = random_workload(g, 1);
  Tape<float> tape;
  Binder<float> binder(tape, model.store);
  CHECK_THROWS_AS(tokenize(tape, binder, model, g, wl, 1), CapacityError);
  CHECK_NOTHROW(tokenize(tape, binder, model, g, wl, 1, false));
}

TEST_CASE("refine with a diagonal-only mask keeps rows independent") {
  auto model = init_model<float>(tiny_cfg(8, 2, 1, 2), 3);
  const int n = 6, d = 8;
  Rng rng(77);
  std::vector<float> hf(n * d), hs(n * d);
  for (auto& v : hf) v = static_cast<float>(rng.normal());
  for (auto& v : hs) v = static_cast<float>(rng.normal());
  ConeMask diag(n);
  for (int i = 0; i < n; ++i) diag.set(i, i);
  auto [rf, rs] = refined_from_raw(model, hf, hs, n, diag);
  // perturb row 2 and verify every other row is bitwise unchanged
  auto hf2 = hf;
  auto hs2 = hs;
  for (int j = 0; j < d; ++j) {
    hf2[2 * d + j] += 0.5f;
    hs2[2 * d + j] -= 0.25f;
  }
  auto [rf2, rs2] = refined_from_raw(model, hf2, hs2, n, diag);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == 2) continue;
      CHECK(rf[i * d + j] == rf2[i * d + j]);
      CHECK(rs[i * d + j] == rs2[i * d + j]);
    }
}

TEST_CASE("refine locality: gates outside both cones never alter a row") {
  auto model = init_model<float>(tiny_cfg(8, 3, 1, 2), 5);
  Rng rng(15);
  for (int trial = 0; trial < 5; ++trial) {
    Aig g = generate_random_aig(90 + trial, 4, 30);
    Workload wl = random_workload(g, 2);
    const int n = g.n();
    const int d = model.cfg.d;
    ConeMask mask = cone_mask(g);
    auto [hf, hs] = tokenized_values(model, g, wl, 4);
    auto [rf, rs] = refined_from_raw(model, hf, hs, n, mask);
    for (int probe = 0; probe < 6; ++probe) {
      const int q = rng.index(n);
      std::vector<int> outside;
      for (int k = 0; k < n; ++k)
        if (!mask.allow(q, k)) outside.push_back(k);
      if (outside.empty()) continue;
      const int j = outside[rng.index(static_cast<int>(outside.size()))];
      auto hf2 = hf;
      auto hs2 = hs;
      for (int c = 0; c < d; ++c) {
        hf2[j * d + c] += 1.0f;
        hs2[j * d + c] += 1.0f;
      }
      auto [rf2, rs2] = refined_from_raw(model, hf2, hs2, n, mask);
      for (int c = 0; c < d; ++c) {
        CHECK(rf[q * d + c] == rf2[q * d + c]);
        CHECK(rs[q * d + c] == rs2[q * d + c]);
      }
    }
  }
}

TEST_CASE("refine with zeroed value/out projections and ff2 is the identity") {
  auto model = init_model<float>(tiny_cfg(8, 2, 1, 2), 9);
  for (auto& blk : model.p.rt_f) {
    for (int h : {blk.attn.v.w, blk.attn.v.b, blk.attn.o.w, blk.attn.o.b, blk.ff2.w, blk.ff2.b})
      std::fill(model.store.values[h].data.begin(), model.store.values[h].data.end(), 0.0f);
  }
  const int n = 5, d = 8;
  Rng rng(3);
  std::vector<float> hf(n * d), hs(n * d);
  for (auto& v : hf) v = static_cast<float>(rng.normal());
  for (auto& v : hs) v = static_cast<float>(rng.normal());
  ConeMask full(n);
  for (int q = 0; q < n; ++q)
    for (int k = 0; k < n; ++k) full.set(q, k);
  auto [rf, rs] = refined_from_raw(model, hf, hs, n, full);
  for (int i = 0; i < n * d; ++i) CHECK(rf[i] == hf[i] + hs[i]);
}

TEST_CASE("pool_functional honors the token plan") {
  auto model = init_model<float>(tiny_cfg(8, 1, 2, 2), 21);
  const int d = model.cfg.d;

  auto pooled = [&](const SubGraph& sub, const TokenPlan& plan, int n_parent_rows,
                    uint64_t row_seed) {
    Tape<float> tape;
    Binder<float> binder(tape, model.store);
    Rng rng(row_seed);
    std::vector<float> rows(static_cast<size_t>(n_parent_rows) * d);
    for (auto& v : rows) v = static_cast<float>(rng.normal());
    auto hf = tape.leaf(n_parent_rows, d, rows);
    std::vector<int> parent_rows(sub.parent_index.begin(), sub.parent_index.end());
    auto out = pool_functional(tape, binder, model, sub, plan, hf, parent_rows);
    auto v = tape.val(out);
    return std::vector<float>(v.begin(), v.end());
  };

  // 3-PI cone: don't-care slots are live, zero/one tokens are not
  Aig g3;
  for (int i = 0; i < 3; ++i) g3.add_gate(GateKind::PI);
  g3.add_gate(GateKind::AND2, 0, 1);
  g3.add_gate(GateKind::AND2, 2, 3);
  finalize(g3);
  SubGraph s3 = canonical_form(extract_khop_cone(g3, 4, 4));
  TokenPlan plan3;
  plan3.n_pis = 3;
  auto& dc = model.store.values[model.p.dont_care].data;
  auto& zt = model.store.values[model.p.zero_tok].data;
  const auto dc_saved = dc;
  const auto zt_saved = zt;
  auto base = pooled(s3, plan3, g3.n(), 1);
  for (auto& v : dc) v += 0.5f;
  auto moved = pooled(s3, plan3, g3.n(), 1);
  CHECK(base != moved);
  dc = dc_saved;
  for (auto& v : zt) v += 0.5f;
  CHECK(pooled(s3, plan3, g3.n(), 1) == base);
  zt = zt_saved;

  // 6-PI cone: no special PI tokens participate
  Aig g6;
  for (int i = 0; i < 6; ++i) g6.add_gate(GateKind::PI);
  int a = g6.add_gate(GateKind::AND2, 0, 1);
  int b = g6.add_gate(GateKind::AND2, 2, 3);
  int c = g6.add_gate(GateKind::AND2, 4, 5);
  int ab = g6.add_gate(GateKind::AND2, a, b);
  g6.add_gate(GateKind::AND2, ab, c);
  finalize(g6);
  SubGraph s6 = canonical_form(extract_khop_cone(g6, g6.n() - 1, 4));
  REQUIRE(s6.canonical_pi_order.size() == 6);
  TokenPlan plan6;
  plan6.n_pis = 6;
  auto base6 = pooled(s6, plan6, g6.n(), 2);
  for (auto& v : dc) v += 0.5f;
  CHECK(pooled(s6, plan6, g6.n(), 2) == base6);
  dc = dc_saved;

  // 8-PI cone with two fixings: the planned token slots are live
  Aig g8;
  std::vector<int> layer;
  for (int i = 0; i < 8; ++i) layer.push_back(g8.add_gate(GateKind::PI));
  while (layer.size() > 1) {
    std::vector<int> next;
    for (size_t i = 0; i < layer.size(); i += 2)
      next.push_back(g8.add_gate(GateKind::AND2, layer[i], layer[i + 1]));
    layer = std::move(next);
  }
  finalize(g8);
  SubGraph s8 = canonical_form(extract_khop_cone(g8, g8.n() - 1, 4));
  REQUIRE(s8.canonical_pi_order.size() == 8);
  TokenPlan plan8;
  plan8.n_pis = 8;
  plan8.fixings = {{6, 0}, {7, 1}};
  auto base8 = pooled(s8, plan8, g8.n(), 3);
  for (auto& v : zt) v += 0.5f;
  CHECK(pooled(s8, plan8, g8.n(), 3) != base8);
  zt = zt_saved;
  auto& ot = model.store.values[model.p.one_tok].data;
  const auto ot_saved = ot;
  for (auto& v : ot) v += 0.5f;
  CHECK(pooled(s8, plan8, g8.n(), 3) != base8);
  ot = ot_saved;

  // plan errors
  TokenPlan bad;
  bad.n_pis = 8;
  CHECK_THROWS_AS(pooled(s8, bad, g8.n(), 3), ArgumentError);
  TokenPlan bad3;
  bad3.n_pis = 3;
  bad3.fixings = {{0, 1}};
  CHECK_THROWS_AS(pooled(s3, bad3, g3.n(), 3), ArgumentError);
}

TEST_CASE("pool_structural is storage-order independent through canonical form") {
  auto model = init_model<float>(tiny_cfg(8, 1, 2, 2), 33);
  Rng rng(6);
  const int d = model.cfg.d;
  int done = 0;
  for (uint64_t seed = 0; done < 5 && seed < 200; ++seed) {
    Aig g = generate_random_aig(7000 + seed, 4, 22);
    SubGraph s = extract_khop_cone(g, g.n() - 1, 4);
    if (s.local.n() < 4) continue;
    // an automorphic cone can legally swap indistinguishable parents between
    // relabelings; the bitwise contract is for rigid cones
    if (oracle::automorphism_count(s.local) != 1) continue;
    ++done;
    auto [permuted, perm] = oracle::random_topo_permutation(s.local, rng, false);
    SubGraph sp;
    sp.local = permuted;
    sp.root = perm[s.root];
    sp.parent_index.resize(permuted.n());
    for (int old = 0; old < permuted.n(); ++old)
      sp.parent_index[perm[old]] = s.parent_index[old];
    SubGraph c1 = canonical_form(s);
    SubGraph c2 = canonical_form(sp);

    std::vector<float> rows(static_cast<size_t>(g.n()) * d);
    for (auto& v : rows) v = static_cast<float>(rng.normal());
    auto pooled = [&](const SubGraph& sub) {
      Tape<float> tape;
      Binder<float> binder(tape, model.store);
      auto hs = tape.leaf(g.n(), d, rows);
      std::vector<int> parent_rows(sub.parent_index.begin(), sub.parent_index.end());
      auto out = pool_structural(tape, binder, model, sub, hs, parent_rows);
      auto v = tape.val(out);
      return std::vector<float>(v.begin(), v.end());
    };
    CHECK(pooled(c1) == pooled(c2));
  }
}

TEST_CASE("pool_structural enforces the sequence cap") {
  auto cfg = tiny_cfg(8, 1, 1, 2);
  cfg.pt_seq_cap = 4;
  auto model = init_model<float>(cfg, 2);
  Aig g = generate_random_aig(5, 4, 30);
  SubGraph s = canonical_form(extract_khop_cone(g, g.n() - 1, 4));
  if (s.local.n() + 1 > 4) {
    Tape<float> tape;
    Binder<float> binder(tape, model.store);
    auto hs = tape.leaf(g.n(), 8, std::vector<float>(g.n() * 8, 0.1f));
    std::vector<int> parent_rows(s.parent_index.begin(), s.parent_index.end());
    CHECK_THROWS_AS(pool_structural(tape, binder, model, s, hs, parent_rows), CapacityError);
  }
}

TEST_CASE("heads respect declared ranges and shapes") {
  auto model = init_model<double>(tiny_cfg(8, 1, 1, 2), 17);
  Rng rng(25);
  for (double scale : {0.5, 1000.0}) {
    Tape<double> tape;
    Binder<double> binder(tape, model.store);
    std::vector<double> single(8), pair(16);
    for (auto& v : single) v = rng.normal() * scale;
    for (auto& v : pair) v = rng.normal() * scale;
    auto si = tape.leaf(1, 8, single);
    auto pi = tape.leaf(1, 16, pair);

    auto prob = tape.val(apply_head(tape, binder, model, Head::prob, si));
    CHECK(prob.size() == 1);
    CHECK(prob[0] >= 0.0);
    CHECK(prob[0] <= 1.0);

    auto tt = tape.val(apply_head(tape, binder, model, Head::tt, si));
    CHECK(tt.size() == 64);
    for (double v : tt) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }

    auto lev = tape.val(apply_head(tape, binder, model, Head::lev, si));
    CHECK(lev[0] >= 0.0);
    auto ged = tape.val(apply_head(tape, binder, model, Head::graph_ged, pi));
    CHECK(ged[0] >= 0.0);

    auto con = tape.val(apply_head(tape, binder, model, Head::con, pi));
    CHECK(con.size() == 3);

    auto gate_tt = tape.val(apply_head(tape, binder, model, Head::gate_tt, pi));
    CHECK(gate_tt[0] >= 0.0);
    CHECK(gate_tt[0] <= 1.0);

    CHECK_THROWS_AS(apply_head(tape, binder, model, Head::prob, pi), ArgumentError);
    CHECK_THROWS_AS(apply_head(tape, binder, model, Head::con, si), ArgumentError);
  }
}

TEST_CASE("checkpoint round trip restores params and adam state bitwise") {
  auto model = init_model<float>(tiny_cfg(8, 1, 1, 2), 41);
  AdamState<float> adam;
  adam.lr = 3e-4;
  adam.init_like(model.store);
  Rng rng(8);
  for (auto& m : adam.m)
    for (auto& v : m) v = static_cast<float>(rng.normal());
  adam.step = 17;
  nlohmann::json extra;
  extra["epoch"] = 3;
  const std::string path = "/tmp/aigrl_ckpt_test_" + std::to_string(::getpid());
  save_checkpoint(path, model.store, &adam, extra);

  auto model2 = init_model<float>(tiny_cfg(8, 1, 1, 2), 999);
  AdamState<float> adam2;
  auto ck = load_checkpoint<float>(path);
  CHECK(restore_params(ck, model2.store, &adam2));
  for (size_t i = 0; i < model.store.values.size(); ++i)
    CHECK(model.store.values[i].data == model2.store.values[i].data);
  CHECK(adam2.step == 17);
  CHECK(adam2.lr == 3e-4);
  CHECK(adam2.m == adam.m);
  CHECK(ck.manifest["extra"]["epoch"] == 3);

  CHECK_THROWS_AS(load_checkpoint<double>(path), SchemaError);
  std::remove(path.c_str());
}
