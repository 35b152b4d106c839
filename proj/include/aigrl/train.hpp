#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aigrl/checkpoint.hpp"
#include "aigrl/labels.hpp"
#include "aigrl/model.hpp"

namespace aigrl {

// The ten supervision terms plus their sum. Values are sample means; counts
// make exact merging across batches possible.
struct LossBundle {
  std::array<double, 10> comp{};
  std::array<int64_t, 10> count{};
  double all = 0.0;

  static constexpr std::array<const char*, 10> kNames = {
      "l_gate_prob",  "l_gate_ttpair",  "l_gate_lev",      "l_gate_con",     "l_graph_size",
      "l_graph_depth", "l_graph_tt",    "l_graph_ttpair",  "l_graph_gedpair", "l_in"};

  void merge(const LossBundle& other) {
    for (int i = 0; i < 10; ++i) {
      const int64_t total = count[i] + other.count[i];
      if (total > 0)
        comp[i] = (comp[i] * count[i] + other.comp[i] * other.count[i]) / total;
      count[i] = total;
    }
    all = 0.0;
    for (int i = 0; i < 10; ++i) all += comp[i];
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    for (int i = 0; i < 10; ++i) {
      j[kNames[i]] = comp[i];
      j[std::string(kNames[i]) + "_n"] = count[i];
    }
    j["l_all"] = all;
    return j;
  }
};

struct TrainConfig {
  int epochs = 1;
  int batch_size = 128;
  double lr = 1e-4;
  uint64_t seed = 0;
  int eval_cadence = 0;  // epochs between eval passes; 0 disables
};

struct EvalReport {
  LossBundle losses;
  double p_tt = 0.0;
  double p_con = 0.0;
  double p_in = 0.0;
  int64_t n_cones = 0, n_con = 0, n_in = 0;
  double wall_seconds = 0.0;
  nlohmann::json config_echo;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["losses"] = losses.to_json();
    j["p_tt"] = p_tt;
    j["p_con"] = p_con;
    j["p_in"] = p_in;
    j["n_cones"] = n_cones;
    j["n_con"] = n_con;
    j["n_in"] = n_in;
    j["wall_seconds"] = wall_seconds;
    j["config"] = config_echo;
    return j;
  }
};

// Forward pass artifacts for one batch: the differentiable total loss plus
// raw predictions for the accuracy metrics.
template <class S>
struct BatchForward {
  LossBundle bundle;
  typename Tape<S>::Idx loss_all = -1;
  std::vector<std::array<double, 64>> tt_pred;  // per cone
  std::vector<uint8_t> tt_label_bits;           // 64 per cone, flattened
  std::vector<int> con_argmax, con_label;
  std::vector<double> in_pred;
  std::vector<int> in_label;
};

// ---------------------------------------------------------------------------
// compute_losses
// ---------------------------------------------------------------------------

template <class S>
BatchForward<S> compute_losses(Tape<S>& tape, Binder<S>& B, const Model<S>& model,
                               std::span<const CircuitRecord* const> batch) {
  using Idx = typename Tape<S>::Idx;
  BatchForward<S> out;

  struct RowRef {
    Idx node;
    int row;
  };
  std::vector<std::pair<Idx, int>> prob_rows, lev_rows;
  std::vector<S> prob_tgt, lev_tgt;
  std::vector<std::pair<Idx, int>> ttp_a, ttp_b;
  std::vector<S> ttp_tgt;
  std::vector<std::pair<Idx, int>> con_a, con_b;
  std::vector<int> con_cls;
  std::vector<Idx> cone_hf, cone_hs;
  std::vector<S> size_tgt, depth_tgt, tt_tgt;
  std::vector<std::pair<int, int>> gtt_pairs, ged_pairs;  // indices into cone_* (global)
  std::vector<S> gtt_tgt, ged_tgt;
  std::vector<std::pair<Idx, int>> in_gate_rows;
  std::vector<int> in_cone_idx;
  std::vector<S> in_tgt;

  for (const CircuitRecord* rec : batch) {
    const Aig& aig = rec->aig;
    const ConeMask mask = cone_mask(aig);
    auto state = tokenize(tape, B, model, aig, rec->pack.workload, rec->pack.sim_seed);
    auto refined = refine(tape, B, model, state, mask);

    for (int g = 0; g < aig.n(); ++g) {
      prob_rows.push_back({refined.hf, g});
      prob_tgt.push_back(static_cast<S>(rec->pack.prob[g]));
      lev_rows.push_back({refined.hs, g});
      lev_tgt.push_back(static_cast<S>(rec->pack.lev[g]));
    }
    for (const auto& p : rec->pack.tt_pairs) {
      ttp_a.push_back({refined.hf, p.i});
      ttp_b.push_back({refined.hf, p.j});
      ttp_tgt.push_back(static_cast<S>(p.dist));
    }
    for (const auto& p : rec->pack.con_pairs) {
      con_a.push_back({refined.hs, p.i});
      con_b.push_back({refined.hs, p.j});
      con_cls.push_back(p.cls);
    }
    const int cone_base = static_cast<int>(cone_hf.size());
    for (const auto& cone : rec->pack.cones) {
      std::vector<int> parent_rows(cone.sub.parent_index.begin(), cone.sub.parent_index.end());
      cone_hf.push_back(
          pool_functional(tape, B, model, cone.sub, cone.plan, refined.hf, parent_rows));
      cone_hs.push_back(pool_structural(tape, B, model, cone.sub, refined.hs, parent_rows));
      size_tgt.push_back(static_cast<S>(cone.sub.size));
      depth_tgt.push_back(static_cast<S>(cone.sub.depth));
      for (uint8_t bit : cone.table64.bits) {
        tt_tgt.push_back(static_cast<S>(bit));
        out.tt_label_bits.push_back(bit);
      }
    }
    for (const auto& p : rec->pack.graph_tt_pairs) {
      gtt_pairs.push_back({cone_base + p.s1, cone_base + p.s2});
      gtt_tgt.push_back(static_cast<S>(p.dist));
    }
    for (const auto& p : rec->pack.graph_ged_pairs) {
      ged_pairs.push_back({cone_base + p.s1, cone_base + p.s2});
      ged_tgt.push_back(static_cast<S>(p.ged_norm));
    }
    for (const auto& s : rec->pack.in_samples) {
      in_gate_rows.push_back({refined.hs, s.gate});
      in_cone_idx.push_back(cone_base + s.cone);
      in_tgt.push_back(static_cast<S>(s.bit));
      out.in_label.push_back(s.bit);
    }
  }

  std::vector<Idx> terms;
  auto add_term = [&](int slot, Idx loss, int64_t n) {
    const double v = static_cast<double>(tape.scalar(loss));
    if (!std::isfinite(v))
      throw TrainError(std::string("non-finite loss component ") + LossBundle::kNames[slot]);
    out.bundle.comp[slot] = v;
    out.bundle.count[slot] = n;
    terms.push_back(loss);
  };

  if (!prob_rows.empty()) {
    Idx pred = apply_head(tape, B, model, Head::prob, tape.stack_rows(prob_rows));
    add_term(0, tape.l1_loss(pred, prob_tgt), static_cast<int64_t>(prob_tgt.size()));
    Idx lev_pred = apply_head(tape, B, model, Head::lev, tape.stack_rows(lev_rows));
    add_term(2, tape.l1_loss(lev_pred, lev_tgt), static_cast<int64_t>(lev_tgt.size()));
  }
  if (!ttp_a.empty()) {
    Idx input = tape.concat_cols(tape.stack_rows(ttp_a), tape.stack_rows(ttp_b));
    Idx pred = apply_head(tape, B, model, Head::gate_tt, input);
    add_term(1, tape.l1_loss(pred, ttp_tgt), static_cast<int64_t>(ttp_tgt.size()));
  }
  if (!con_a.empty()) {
    Idx input = tape.concat_cols(tape.stack_rows(con_a), tape.stack_rows(con_b));
    Idx logits = apply_head(tape, B, model, Head::con, input);
    add_term(3, tape.cross_entropy(logits, con_cls), static_cast<int64_t>(con_cls.size()));
    const auto lv = tape.val(logits);
    for (size_t r = 0; r < con_cls.size(); ++r) {
      int arg = 0;
      for (int c = 1; c < 3; ++c)
        if (lv[r * 3 + c] > lv[r * 3 + arg]) arg = c;
      out.con_argmax.push_back(arg);
      out.con_label.push_back(con_cls[r]);
    }
  }
  if (!cone_hf.empty()) {
    std::vector<std::pair<Idx, int>> hs_rows, hf_rows;
    for (Idx c : cone_hs) hs_rows.push_back({c, 0});
    for (Idx c : cone_hf) hf_rows.push_back({c, 0});
    Idx hs_mat = tape.stack_rows(hs_rows);
    Idx hf_mat = tape.stack_rows(hf_rows);
    Idx size_pred = apply_head(tape, B, model, Head::size, hs_mat);
    add_term(4, tape.l1_loss(size_pred, size_tgt), static_cast<int64_t>(size_tgt.size()));
    Idx depth_pred = apply_head(tape, B, model, Head::depth, hs_mat);
    add_term(5, tape.l1_loss(depth_pred, depth_tgt), static_cast<int64_t>(depth_tgt.size()));
    Idx tt_pred = apply_head(tape, B, model, Head::tt, hf_mat);
    add_term(6, tape.bce_loss(tt_pred, tt_tgt), static_cast<int64_t>(cone_hf.size()));
    const auto tv = tape.val(tt_pred);
    for (size_t c = 0; c < cone_hf.size(); ++c) {
      std::array<double, 64> row{};
      for (int b = 0; b < 64; ++b) row[b] = static_cast<double>(tv[c * 64 + b]);
      out.tt_pred.push_back(row);
    }
  }
  if (!gtt_pairs.empty()) {
    std::vector<std::pair<Idx, int>> a, b;
    for (const auto& p : gtt_pairs) {
      a.push_back({cone_hf[p.first], 0});
      b.push_back({cone_hf[p.second], 0});
    }
    Idx input = tape.concat_cols(tape.stack_rows(a), tape.stack_rows(b));
    Idx pred = apply_head(tape, B, model, Head::graph_tt, input);
    add_term(7, tape.l1_loss(pred, gtt_tgt), static_cast<int64_t>(gtt_tgt.size()));
  }
  if (!ged_pairs.empty()) {
    std::vector<std::pair<Idx, int>> a, b;
    for (const auto& p : ged_pairs) {
      a.push_back({cone_hs[p.first], 0});
      b.push_back({cone_hs[p.second], 0});
    }
    Idx input = tape.concat_cols(tape.stack_rows(a), tape.stack_rows(b));
    Idx pred = apply_head(tape, B, model, Head::graph_ged, input);
    add_term(8, tape.l1_loss(pred, ged_tgt), static_cast<int64_t>(ged_tgt.size()));
  }
  if (!in_gate_rows.empty()) {
    std::vector<std::pair<Idx, int>> cone_rows;
    for (int c : in_cone_idx) cone_rows.push_back({cone_hs[c], 0});
    Idx input = tape.concat_cols(tape.stack_rows(in_gate_rows), tape.stack_rows(cone_rows));
    Idx pred = apply_head(tape, B, model, Head::in_graph, input);
    add_term(9, tape.bce_loss(pred, in_tgt), static_cast<int64_t>(in_tgt.size()));
    const auto pv = tape.val(pred);
    for (size_t r = 0; r < in_tgt.size(); ++r) out.in_pred.push_back(static_cast<double>(pv[r]));
  }

  Idx total = -1;
  for (Idx t : terms) total = total < 0 ? t : tape.add(total, t);
  if (total < 0) throw ArgumentError("compute_losses: batch has no samples at all");
  out.loss_all = total;
  out.bundle.all = 0.0;
  for (int i = 0; i < 10; ++i) out.bundle.all += out.bundle.comp[i];
  const double recomputed = static_cast<double>(tape.scalar(total));
  if (!std::isfinite(recomputed)) throw TrainError("non-finite total loss");
  return out;
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

template <class S>
EvalReport metrics(const Model<S>& model, const std::vector<CircuitRecord>& eval_set,
                   int chunk_size = 8) {
  if (eval_set.empty()) throw ArgumentError("metrics: empty eval set");
  const auto t0 = std::chrono::steady_clock::now();
  EvalReport rep;
  int64_t tt_hits = 0;  // counts differing bits actually
  int64_t con_hits = 0, in_hits = 0;
  double tt_frac_sum = 0.0;
  for (size_t at = 0; at < eval_set.size(); at += chunk_size) {
    std::vector<const CircuitRecord*> chunk;
    for (size_t i = at; i < std::min(eval_set.size(), at + chunk_size); ++i)
      chunk.push_back(&eval_set[i]);
    Tape<S> tape;
    Binder<S> binder(tape, model.store);
    auto fwd = compute_losses<S>(tape, binder, model, chunk);
    rep.losses.merge(fwd.bundle);
    for (size_t c = 0; c < fwd.tt_pred.size(); ++c) {
      int diff = 0;
      for (int b = 0; b < 64; ++b) {
        const int bit = fwd.tt_pred[c][b] > 0.5 ? 1 : 0;
        diff += bit != fwd.tt_label_bits[c * 64 + b];
      }
      tt_frac_sum += static_cast<double>(diff) / 64.0;
      rep.n_cones += 1;
    }
    for (size_t i = 0; i < fwd.con_argmax.size(); ++i) {
      con_hits += fwd.con_argmax[i] == fwd.con_label[i];
      rep.n_con += 1;
    }
    for (size_t i = 0; i < fwd.in_pred.size(); ++i) {
      in_hits += (fwd.in_pred[i] > 0.5 ? 1 : 0) == fwd.in_label[i];
      rep.n_in += 1;
    }
  }
  (void)tt_hits;
  rep.p_tt = rep.n_cones > 0 ? tt_frac_sum / rep.n_cones : 0.0;
  rep.p_con = rep.n_con > 0 ? static_cast<double>(con_hits) / rep.n_con : 0.0;
  rep.p_in = rep.n_in > 0 ? static_cast<double>(in_hits) / rep.n_in : 0.0;
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ---------------------------------------------------------------------------
// pretrain
// ---------------------------------------------------------------------------

struct HistoryEntry {
  int epoch = 0;
  LossBundle train;
  std::optional<EvalReport> eval;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["epoch"] = epoch;
    j["train"] = train.to_json();
    if (eval) j["eval"] = eval->to_json();
    return j;
  }
};

// One epoch over a fixed order; returns the merged bundle.
template <class S>
LossBundle train_epoch(Model<S>& model, AdamState<S>& adam,
                       const std::vector<CircuitRecord>& train,
                       const std::vector<int>& order, int batch_size) {
  LossBundle epoch_bundle;
  for (size_t at = 0; at < order.size(); at += batch_size) {
    std::vector<const CircuitRecord*> batch;
    for (size_t i = at; i < std::min(order.size(), at + static_cast<size_t>(batch_size)); ++i)
      batch.push_back(&train[order[i]]);
    Tape<S> tape;
    Binder<S> binder(tape, model.store);
    auto fwd = compute_losses<S>(tape, binder, model, batch);
    tape.backward(fwd.loss_all);
    adam_step(model.store, binder.grads(), adam);
    epoch_bundle.merge(fwd.bundle);
  }
  return epoch_bundle;
}

inline std::vector<int> epoch_order(size_t n, uint64_t seed, int epoch) {
  std::vector<int> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  Rng rng(mix_seed(seed, 0x45504f43 + static_cast<uint64_t>(epoch)));
  for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(static_cast<int>(i))]);
  return order;
}

// Seeded epoch loop with resumable checkpoints: the checkpoint carries the
// epoch counter, and per-epoch shuffles depend only on (seed, epoch), so a
// resumed run continues bit-identically.
template <class S>
std::vector<HistoryEntry> pretrain(Model<S>& model, AdamState<S>& adam,
                                   const std::vector<CircuitRecord>& train,
                                   const std::vector<CircuitRecord>* eval_set,
                                   const TrainConfig& cfg, int start_epoch = 0,
                                   const std::string& checkpoint_path = "",
                                   const nlohmann::json& extra_base = nlohmann::json::object()) {
  if (train.empty()) throw ArgumentError("pretrain: empty dataset");
  if (cfg.batch_size < 1 || cfg.epochs < 0) throw ArgumentError("pretrain: bad config");
  adam.lr = cfg.lr;
  std::vector<HistoryEntry> history;
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(train.size(), cfg.seed, epoch);
    HistoryEntry entry;
    entry.epoch = epoch;
    entry.train = train_epoch(model, adam, train, order, cfg.batch_size);
    if (eval_set && cfg.eval_cadence > 0 &&
        ((epoch + 1) % cfg.eval_cadence == 0 || epoch + 1 == cfg.epochs))
      entry.eval = metrics(model, *eval_set);
    history.push_back(std::move(entry));
    if (!checkpoint_path.empty()) {
      nlohmann::json extra = extra_base;
      extra["epoch"] = epoch + 1;
      save_checkpoint(checkpoint_path, model.store, &adam, extra);
    }
  }
  return history;
}

// ---------------------------------------------------------------------------
// scaling harness
// ---------------------------------------------------------------------------

struct ScalingRow {
  double fraction = 0.0;
  bool skipped = false;
  int n_train = 0;
  EvalReport report;
};

inline std::string scaling_csv_header() {
  std::string s = "fraction";
  for (const char* name : LossBundle::kNames) s += std::string(",") + name;
  s += ",l_all,p_tt,p_con,p_in";
  return s;
}

inline std::string scaling_csv(const std::vector<ScalingRow>& rows) {
  std::string csv = scaling_csv_header() + "\n";
  char buf[64];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%g", row.fraction);
    csv += buf;
    if (row.skipped) {
      for (int i = 0; i < 14; ++i) csv += ",";
      csv += "\n";
      continue;
    }
    for (int i = 0; i < 10; ++i) {
      std::snprintf(buf, sizeof buf, ",%.6f", row.report.losses.comp[i]);
      csv += buf;
    }
    std::snprintf(buf, sizeof buf, ",%.6f", row.report.losses.all);
    csv += buf;
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f", row.report.p_tt, row.report.p_con,
                  row.report.p_in);
    csv += buf;
    csv += "\n";
  }
  return csv;
}

// Nested seeded subsets (smaller fractions are prefixes of larger ones), one
// fresh training run per fraction with identical hyperparameters, all scored
// on the same held-out set.
template <class S>
std::vector<ScalingRow> scaling_harness(const std::vector<CircuitRecord>& train,
                                        const std::vector<CircuitRecord>& eval_set,
                                        std::vector<double> fractions, const ModelConfig& mc,
                                        const TrainConfig& tc) {
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0)) throw ArgumentError("fractions must lie in (0, 1]");
  std::sort(fractions.begin(), fractions.end());
  std::vector<int> shuffled(train.size());
  for (size_t i = 0; i < train.size(); ++i) shuffled[i] = static_cast<int>(i);
  Rng rng(mix_seed(tc.seed, 0x5343414c));
  for (size_t i = train.size(); i > 1; --i)
    std::swap(shuffled[i - 1], shuffled[rng.index(static_cast<int>(i))]);

  std::vector<ScalingRow> rows;
  for (double f : fractions) {
    ScalingRow row;
    row.fraction = f;
    const int take = static_cast<int>(std::floor(f * static_cast<double>(train.size())));
    row.n_train = take;
    if (take < 1) {
      row.skipped = true;
      rows.push_back(std::move(row));
      continue;
    }
    std::vector<CircuitRecord> subset;
    subset.reserve(take);
    if (take == static_cast<int>(train.size())) {
      subset = train;  // full fraction degenerates to the plain run
    } else {
      for (int i = 0; i < take; ++i) subset.push_back(train[shuffled[i]]);
    }
    auto model = init_model<S>(mc, tc.seed);
    AdamState<S> adam;
    adam.lr = tc.lr;
    adam.init_like(model.store);
    pretrain(model, adam, subset, nullptr, tc);
    row.report = metrics(model, eval_set);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace aigrl
