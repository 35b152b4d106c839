#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "aigrl/train.hpp"
#include "oracles.hpp"

using namespace aigrl;

namespace {

ModelConfig tiny_cfg() {
  ModelConfig cfg;
  cfg.d = 8;
  cfg.rt_depth = 1;
  cfg.pt_depth = 1;
  cfg.n_heads = 2;
  cfg.head_hidden = 16;
  cfg.ff_mult = 2;
  cfg.pt_seq_cap = 32;
  return cfg;
}

std::vector<CircuitRecord> tiny_dataset(int count, uint64_t seed, int gates = 20,
                                        LabelConfig base = {}) {
  std::vector<CircuitRecord> recs;
  for (int i = 0; i < count; ++i) {
    Aig g = generate_random_aig(seed + i, 4, gates);
    LabelConfig cfg = base;
    cfg.seed = mix_seed(seed, 1000 + i);
    recs.push_back({g, build_labelpack(g, cfg)});
  }
  return recs;
}

std::string temp_path(const char* name) {
  return std::string("/tmp/aigrl_train_") + name + "_" + std::to_string(::getpid());
}

}  // namespace

TEST_CASE("compute_losses bookkeeping: total equals the component sum") {
  auto model = init_model<double>(tiny_cfg(), 3);
  auto recs = tiny_dataset(3, 50);
  std::vector<const CircuitRecord*> batch;
  for (auto& r : recs) batch.push_back(&r);
  Tape<double> tape;
  Binder<double> binder(tape, model.store);
  auto fwd = compute_losses<double>(tape, binder, model, batch);
  double manual = 0;
  for (int i = 0; i < 10; ++i) manual += fwd.bundle.comp[i];
  CHECK(std::abs(fwd.bundle.all - manual) < 1e-12);
  CHECK(std::abs(static_cast<double>(tape.scalar(fwd.loss_all)) - manual) < 1e-6);
  for (int i = 0; i < 10; ++i) CHECK(fwd.bundle.count[i] > 0);
}

TEST_CASE("constructed labels equal to predictions zero the L1 components") {
  auto model = init_model<double>(tiny_cfg(), 5);
  auto recs = tiny_dataset(2, 80);

  // extract predictions along the same forward path and write them back as
  // labels for the double-valued regression targets
  for (auto& rec : recs) {
    Tape<double> tape;
    Binder<double> binder(tape, model.store);
    const ConeMask mask = cone_mask(rec.aig);
    auto state = tokenize(tape, binder, model, rec.aig, rec.pack.workload, rec.pack.sim_seed);
    auto refined = refine(tape, binder, model, state, mask);
    std::vector<int> all_gates(rec.aig.n());
    for (int g = 0; g < rec.aig.n(); ++g) all_gates[g] = g;
    auto prob_pred =
        tape.val(apply_head(tape, binder, model, Head::prob, tape.gather_rows(refined.hf, all_gates)));
    for (int g = 0; g < rec.aig.n(); ++g) rec.pack.prob[g] = prob_pred[g];
    for (auto& p : rec.pack.tt_pairs) {
      auto input = tape.concat_cols(tape.row(refined.hf, p.i), tape.row(refined.hf, p.j));
      p.dist = tape.val(apply_head(tape, binder, model, Head::gate_tt, input))[0];
    }
    std::vector<typename Tape<double>::Idx> hf_pool, hs_pool;
    for (auto& cone : rec.pack.cones) {
      std::vector<int> parent_rows(cone.sub.parent_index.begin(), cone.sub.parent_index.end());
      hf_pool.push_back(
          pool_functional(tape, binder, model, cone.sub, cone.plan, refined.hf, parent_rows));
      hs_pool.push_back(pool_structural(tape, binder, model, cone.sub, refined.hs, parent_rows));
    }
    for (auto& p : rec.pack.graph_tt_pairs) {
      auto input = tape.concat_cols(tape.row(hf_pool[p.s1], 0), tape.row(hf_pool[p.s2], 0));
      p.dist = tape.val(apply_head(tape, binder, model, Head::graph_tt, input))[0];
    }
    for (auto& p : rec.pack.graph_ged_pairs) {
      auto input = tape.concat_cols(tape.row(hs_pool[p.s1], 0), tape.row(hs_pool[p.s2], 0));
      p.ged_norm = tape.val(apply_head(tape, binder, model, Head::graph_ged, input))[0];
    }
  }

  std::vector<const CircuitRecord*> batch;
  for (auto& r : recs) batch.push_back(&r);
  Tape<double> tape;
  Binder<double> binder(tape, model.store);
  auto fwd = compute_losses<double>(tape, binder, model, batch);
  CHECK(fwd.bundle.comp[0] == 0.0);  // prob
  CHECK(fwd.bundle.comp[1] == 0.0);  // gate tt pair
  CHECK(fwd.bundle.comp[7] == 0.0);  // graph tt pair
  CHECK(fwd.bundle.comp[8] == 0.0);  // graph ged pair
}

TEST_CASE("untrained balanced membership loss sits near ln 2") {
  auto model = init_model<double>(tiny_cfg(), 777);
  LabelConfig lc;
  lc.n_in_samples = 64;
  auto recs = tiny_dataset(4, 21, 30, lc);
  std::vector<const CircuitRecord*> batch;
  for (auto& r : recs) batch.push_back(&r);
  Tape<double> tape;
  Binder<double> binder(tape, model.store);
  auto fwd = compute_losses<double>(tape, binder, model, batch);
  CHECK(fwd.bundle.comp[9] > std::log(2.0) - 0.2);
  CHECK(fwd.bundle.comp[9] < std::log(2.0) + 0.2);
}

TEST_CASE("metrics on a constructed perfect predictor") {
  auto model = init_model<float>(tiny_cfg(), 11);
  auto recs = tiny_dataset(2, 60);
  // first pass: read predictions, rewrite the classification labels to match
  {
    std::vector<const CircuitRecord*> batch;
    for (auto& r : recs) batch.push_back(&r);
    Tape<float> tape;
    Binder<float> binder(tape, model.store);
    auto fwd = compute_losses<float>(tape, binder, model, batch);
    size_t con_at = 0, in_at = 0, cone_at = 0;
    for (auto& rec : recs) {
      for (auto& p : rec.pack.con_pairs) p.cls = fwd.con_argmax[con_at++];
      for (auto& s : rec.pack.in_samples) s.bit = fwd.in_pred[in_at++] > 0.5 ? 1 : 0;
      for (auto& cone : rec.pack.cones) {
        for (int b = 0; b < 64; ++b)
          cone.table64.bits[b] = fwd.tt_pred[cone_at][b] > 0.5 ? 1 : 0;
        ++cone_at;
      }
    }
  }
  EvalReport rep = metrics(model, recs);
  CHECK(rep.p_tt == 0.0);
  CHECK(rep.p_con == 1.0);
  CHECK(rep.p_in == 1.0);
  CHECK(rep.n_cones > 0);
}

TEST_CASE("metrics bounds and chance-level con accuracy") {
  auto model = init_model<float>(tiny_cfg(), 2);
  LabelConfig lc;
  lc.n_con_pairs = 120;
  auto recs = tiny_dataset(6, 31, 60, lc);
  EvalReport rep = metrics(model, recs);
  CHECK(rep.p_con >= 0.0);
  CHECK(rep.p_con <= 1.0);
  CHECK(rep.p_in >= 0.0);
  CHECK(rep.p_in <= 1.0);
  CHECK(rep.p_tt >= 0.0);
  CHECK(rep.p_tt <= 1.0);
  CHECK(rep.n_con >= 500);
  // an untrained predictor on near-balanced three classes sits near chance
  CHECK(rep.p_con < 0.6);
  CHECK_THROWS_AS(metrics(model, std::vector<CircuitRecord>{}), ArgumentError);
}

TEST_CASE("pretrain smoke: one epoch, readable checkpoint, history written") {
  auto model = init_model<float>(tiny_cfg(), 4);
  AdamState<float> adam;
  adam.init_like(model.store);
  auto recs = tiny_dataset(2, 90);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 2;
  tc.lr = 1e-3;
  tc.seed = 7;
  const std::string path = temp_path("smoke");
  auto history = pretrain(model, adam, recs, nullptr, tc, 0, path);
  CHECK(history.size() == 1);
  CHECK(history[0].train.all > 0.0);
  auto ck = load_checkpoint<float>(path);
  CHECK(ck.manifest["extra"]["epoch"] == 1);
  std::remove(path.c_str());
}

TEST_CASE("resume reproduces the uninterrupted run bitwise") {
  auto recs = tiny_dataset(4, 140);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 2;
  tc.lr = 1e-3;
  tc.seed = 13;

  auto direct = init_model<float>(tiny_cfg(), 29);
  AdamState<float> adam_direct;
  adam_direct.init_like(direct.store);
  pretrain(direct, adam_direct, recs, nullptr, tc);

  const std::string path = temp_path("resume");
  auto part = init_model<float>(tiny_cfg(), 29);
  AdamState<float> adam_part;
  adam_part.init_like(part.store);
  TrainConfig tc1 = tc;
  tc1.epochs = 1;
  pretrain(part, adam_part, recs, nullptr, tc1, 0, path);

  auto resumed = init_model<float>(tiny_cfg(), 999);  // init is irrelevant after restore
  AdamState<float> adam_resumed;
  auto ck = load_checkpoint<float>(path);
  restore_params(ck, resumed.store, &adam_resumed);
  const int start_epoch = ck.manifest["extra"]["epoch"].get<int>();
  CHECK(start_epoch == 1);
  pretrain(resumed, adam_resumed, recs, nullptr, tc, start_epoch);

  for (size_t i = 0; i < direct.store.values.size(); ++i)
    CHECK(direct.store.values[i].data == resumed.store.values[i].data);
  std::remove(path.c_str());
}

TEST_CASE("scaling harness degeneracy at fraction 1.0 and csv schema") {
  auto recs = tiny_dataset(6, 200, 16);
  auto eval_set = tiny_dataset(3, 300, 16);
  ModelConfig mc = tiny_cfg();
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 3;
  tc.lr = 1e-3;
  tc.seed = 17;

  auto rows = scaling_harness<float>(recs, eval_set, {1.0}, mc, tc);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].n_train == 6);

  auto model = init_model<float>(mc, tc.seed);
  AdamState<float> adam;
  adam.lr = tc.lr;
  adam.init_like(model.store);
  pretrain(model, adam, recs, nullptr, tc);
  EvalReport direct = metrics(model, eval_set);
  CHECK(rows[0].report.losses.all == doctest::Approx(direct.losses.all).epsilon(1e-12));
  CHECK(rows[0].report.p_con == doctest::Approx(direct.p_con).epsilon(1e-12));

  auto rows3 = scaling_harness<float>(recs, eval_set, {0.5, 0.2, 1.0}, mc, tc);
  std::string csv = scaling_csv(rows3);
  // fractions are sorted ascending, header + 3 rows, 15 columns each
  size_t lines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(lines == 4);
  std::string header = csv.substr(0, csv.find('\n'));
  CHECK(std::count(header.begin(), header.end(), ',') == 14);
  CHECK(header == scaling_csv_header());

  // nestedness: the 0.2 subset must be a prefix-subset of the 0.5 subset
  CHECK(rows3[0].fraction == 0.2);
  CHECK(rows3[0].n_train <= rows3[1].n_train);

  auto skipped = scaling_harness<float>(recs, eval_set, {0.05}, mc, tc);
  CHECK(skipped[0].skipped);
  CHECK_THROWS_AS(scaling_harness<float>(recs, eval_set, {1.5}, mc, tc), ArgumentError);
}

TEST_CASE("end-to-end gradients match finite differences on a small circuit") {
  auto model = init_model<double>(tiny_cfg(), 71);
  LabelConfig lc;
  lc.n_tt_pairs = 3;
  lc.n_con_pairs = 3;
  lc.n_cones = 2;
  lc.n_graph_tt_pairs = 1;
  lc.n_ged_pairs = 1;
  lc.n_in_samples = 4;
  lc.seed = 5;
  Aig g = generate_random_aig(123, 3, 7);  // 10 gates
  CircuitRecord rec{g, build_labelpack(g, lc)};
  std::vector<const CircuitRecord*> batch{&rec};

  Tape<double> tape;
  Binder<double> binder(tape, model.store);
  auto fwd = compute_losses<double>(tape, binder, model, batch);
  tape.backward(fwd.loss_all);
  auto grads = binder.grads();
  for (auto& gvec : grads)
    if (gvec.empty()) gvec.assign(1, 0.0);  // placeholder for untouched tensors

  // finite differences over a strided sample of every tensor
  double worst = 0.0;
  int checked = 0;
  const double h = 1e-5;
  auto loss_now = [&] {
    Tape<double> t2;
    Binder<double> b2(t2, model.store);
    auto f2 = compute_losses<double>(t2, b2, model, batch);
    return static_cast<double>(t2.scalar(f2.loss_all));
  };
  for (size_t p = 0; p < model.store.values.size(); ++p) {
    auto& data = model.store.values[p].data;
    if (grads[p].size() != data.size()) continue;  // untouched tensor
    const size_t stride = std::max<size_t>(1, data.size() / 6);
    for (size_t i = 0; i < data.size(); i += stride) {
      const double keep = data[i];
      data[i] = keep + h;
      const double up = loss_now();
      data[i] = keep - h;
      const double down = loss_now();
      data[i] = keep;
      const double fd = (up - down) / (2 * h);
      const double an = grads[p][i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-5});
      worst = std::max(worst, std::abs(fd - an) / denom);
      ++checked;
    }
  }
  CHECK(checked > 200);
  CHECK(worst < 1e-3);
}
