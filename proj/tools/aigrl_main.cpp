// aigrl command line: synthetic circuit generation, dataset building,
// pre-training, evaluation, data-scaling runs, large-circuit encoding,
// pair-distance fine-tuning and correlated-pair export.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aigrl/checkpoint.hpp"
#include "aigrl/largecircuit.hpp"
#include "aigrl/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aigrl;

namespace {

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ArgumentError("cannot open " + tmp + " for writing");
    out << content;
    if (!out) throw ArgumentError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw ArgumentError("cannot move " + tmp + " into place");
}

std::string hash_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

struct Manifest {
  std::string command;
  uint64_t seed = 0;
  json config = json::object();
  std::vector<std::pair<std::string, std::string>> inputs;
  std::vector<std::string> outputs;
  bool deterministic = false;

  void add_input(const std::string& path) { inputs.push_back({path, hash_hex(read_file(path))}); }

  void write(const std::string& artifact_path) const {
    json j;
    j["v"] = 1;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = config;
    auto arr = json::array();
    for (const auto& [path, hash] : inputs) arr.push_back({{"path", path}, {"fnv1a64", hash}});
    j["inputs"] = arr;
    j["outputs"] = outputs;
    j["deterministic"] = deterministic;
    write_file_atomic(artifact_path + ".manifest.json", j.dump(2) + "\n");
  }
};

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  return json::parse(read_file(path));
}

template <class T>
void take(const json& section, const char* key, T& into) {
  if (section.contains(key)) into = section[key].get<T>();
}

ModelConfig model_config_from(const json& cfg) {
  ModelConfig mc;
  if (!cfg.contains("model")) return mc;
  const json& m = cfg["model"];
  take(m, "d", mc.d);
  take(m, "rt_depth", mc.rt_depth);
  take(m, "pt_depth", mc.pt_depth);
  take(m, "n_heads", mc.n_heads);
  take(m, "head_hidden", mc.head_hidden);
  take(m, "ff_mult", mc.ff_mult);
  take(m, "tokenizer_rounds", mc.tokenizer_rounds);
  take(m, "seq_cap", mc.seq_cap);
  take(m, "pt_seq_cap", mc.pt_seq_cap);
  return mc;
}

json model_config_json(const ModelConfig& mc) {
  json m;
  m["d"] = mc.d;
  m["rt_depth"] = mc.rt_depth;
  m["pt_depth"] = mc.pt_depth;
  m["n_heads"] = mc.n_heads;
  m["head_hidden"] = mc.head_hidden;
  m["ff_mult"] = mc.ff_mult;
  m["tokenizer_rounds"] = mc.tokenizer_rounds;
  m["seq_cap"] = mc.seq_cap;
  m["pt_seq_cap"] = mc.pt_seq_cap;
  return m;
}

json train_config_json(const TrainConfig& tc) {
  json t;
  t["epochs"] = tc.epochs;
  t["batch_size"] = tc.batch_size;
  t["lr"] = tc.lr;
  t["seed"] = tc.seed;
  t["eval_cadence"] = tc.eval_cadence;
  return t;
}

// flags override config-file values override defaults
struct ModelFlags {
  CLI::Option *d = nullptr, *rt = nullptr, *pt = nullptr, *heads = nullptr, *hidden = nullptr,
              *ff = nullptr, *rounds = nullptr, *seq = nullptr, *ptseq = nullptr;
  ModelConfig staged;

  void attach(CLI::App* app) {
    d = app->add_option("--d", staged.d, "embedding width");
    rt = app->add_option("--rt-depth", staged.rt_depth, "refine transformer depth");
    pt = app->add_option("--pt-depth", staged.pt_depth, "pooling transformer depth");
    heads = app->add_option("--heads", staged.n_heads, "attention heads");
    hidden = app->add_option("--head-hidden", staged.head_hidden, "head MLP hidden size");
    ff = app->add_option("--ff-mult", staged.ff_mult, "feed-forward multiplier");
    rounds = app->add_option("--tokenizer-rounds", staged.tokenizer_rounds, "tokenizer sweeps");
    seq = app->add_option("--seq-cap", staged.seq_cap, "refine sequence cap");
    ptseq = app->add_option("--pt-seq-cap", staged.pt_seq_cap, "pooling sequence cap");
  }

  ModelConfig merge(const json& cfg) const {
    ModelConfig mc = model_config_from(cfg);
    if (d->count()) mc.d = staged.d;
    if (rt->count()) mc.rt_depth = staged.rt_depth;
    if (pt->count()) mc.pt_depth = staged.pt_depth;
    if (heads->count()) mc.n_heads = staged.n_heads;
    if (hidden->count()) mc.head_hidden = staged.head_hidden;
    if (ff->count()) mc.ff_mult = staged.ff_mult;
    if (rounds->count()) mc.tokenizer_rounds = staged.tokenizer_rounds;
    if (seq->count()) mc.seq_cap = staged.seq_cap;
    if (ptseq->count()) mc.pt_seq_cap = staged.pt_seq_cap;
    return mc;
  }
};

struct TrainFlags {
  CLI::Option *epochs = nullptr, *batch = nullptr, *lr = nullptr, *cadence = nullptr;
  TrainConfig staged;

  void attach(CLI::App* app) {
    epochs = app->add_option("--epochs", staged.epochs, "training epochs");
    batch = app->add_option("--batch", staged.batch_size, "batch size");
    lr = app->add_option("--lr", staged.lr, "learning rate");
    cadence = app->add_option("--eval-cadence", staged.eval_cadence, "epochs between evals");
  }

  TrainConfig merge(const json& cfg, uint64_t seed) const {
    TrainConfig tc;
    tc.batch_size = 128;
    if (cfg.contains("train")) {
      const json& t = cfg["train"];
      take(t, "epochs", tc.epochs);
      take(t, "batch_size", tc.batch_size);
      take(t, "lr", tc.lr);
      take(t, "eval_cadence", tc.eval_cadence);
    }
    if (epochs->count()) tc.epochs = staged.epochs;
    if (batch->count()) tc.batch_size = staged.batch_size;
    if (lr->count()) tc.lr = staged.lr;
    if (cadence->count()) tc.eval_cadence = staged.eval_cadence;
    tc.seed = seed;
    return tc;
  }
};

std::vector<std::string> list_aag(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ArgumentError("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".aag")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ArgumentError("no .aag files in " + dir);
  return files;
}

ModelConfig config_from_checkpoint(const json& manifest) {
  json wrapper;
  wrapper["model"] = manifest.at("extra").at("model_config");
  return model_config_from(wrapper);
}

std::string history_jsonl(const std::vector<HistoryEntry>& history) {
  std::string text;
  for (const auto& entry : history) text += entry.to_json().dump() + "\n";
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aigrl: AIG representation learning pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  uint64_t seed = 0;
  bool deterministic = false;
  app.add_option("--config", config_path, "JSON config file")->capture_default_str();
  app.add_option("--seed", seed, "global seed");
  app.add_flag("--deterministic", deterministic,
               "pin sequential execution (always on in this build; recorded in manifests)");

  // gen
  auto* gen = app.add_subcommand("gen", "generate synthetic AIGER circuits");
  std::string gen_out;
  int gen_n = 10, gen_pis = 4, gen_gates_min = 20, gen_gates_max = 60;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--n", gen_n, "number of circuits");
  gen->add_option("--pis", gen_pis, "primary inputs per circuit");
  gen->add_option("--gates-min", gen_gates_min, "minimum gate count");
  gen->add_option("--gates-max", gen_gates_max, "maximum gate count");

  // label
  auto* label = app.add_subcommand("label", "build a labeled dataset from AIGER files");
  std::string label_in, label_out;
  LabelConfig lc;
  label->add_option("--in", label_in, "directory of .aag files")->required();
  label->add_option("--out", label_out, "output dataset (jsonl)")->required();
  label->add_option("--patterns", lc.n_patterns, "simulation patterns");
  label->add_option("--tt-pairs", lc.n_tt_pairs, "gate truth-table pairs");
  label->add_option("--con-pairs", lc.n_con_pairs, "connection pairs");
  label->add_option("--cones", lc.n_cones, "cone samples");
  label->add_option("--graph-tt-pairs", lc.n_graph_tt_pairs, "cone table pairs");
  label->add_option("--ged-pairs", lc.n_ged_pairs, "cone edit-distance pairs");
  label->add_option("--in-samples", lc.n_in_samples, "membership samples");
  label->add_option("--hops", lc.hops, "cone hop count");

  // pretrain
  auto* pretrain_cmd = app.add_subcommand("pretrain", "pre-train on a labeled dataset");
  std::string pt_data, pt_eval, pt_out, pt_history;
  bool pt_resume = false;
  ModelFlags pt_model;
  TrainFlags pt_train;
  pretrain_cmd->add_option("--data", pt_data, "training dataset")->required();
  pretrain_cmd->add_option("--eval", pt_eval, "held-out dataset for cadence evals");
  pretrain_cmd->add_option("--out", pt_out, "checkpoint path")->required();
  pretrain_cmd->add_option("--history", pt_history, "history jsonl path");
  pretrain_cmd->add_flag("--resume", pt_resume, "continue from the checkpoint at --out");
  pt_model.attach(pretrain_cmd);
  pt_train.attach(pretrain_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string ev_data, ev_ckpt, ev_out;
  eval_cmd->add_option("--data", ev_data, "dataset")->required();
  eval_cmd->add_option("--ckpt", ev_ckpt, "checkpoint")->required();
  eval_cmd->add_option("--out", ev_out, "report json path")->required();

  // scale
  auto* scale_cmd = app.add_subcommand("scale", "data-scaling harness");
  std::string sc_data, sc_eval, sc_out, sc_fractions = "0.1,0.5,1.0";
  ModelFlags sc_model;
  TrainFlags sc_train;
  scale_cmd->add_option("--data", sc_data, "training dataset")->required();
  scale_cmd->add_option("--eval", sc_eval, "held-out dataset")->required();
  scale_cmd->add_option("--out", sc_out, "csv report path")->required();
  scale_cmd->add_option("--fractions", sc_fractions, "comma-separated fractions");
  sc_model.attach(scale_cmd);
  sc_train.attach(scale_cmd);

  // encode-large
  auto* enc = app.add_subcommand("encode-large", "partition and window-shift encode a circuit");
  std::string en_aig, en_ckpt, en_out;
  int en_hops = 4, en_delta = 2, en_max_gates = 512;
  enc->add_option("--aig", en_aig, "AIGER file")->required();
  enc->add_option("--ckpt", en_ckpt, "checkpoint")->required();
  enc->add_option("--out", en_out, "embedding container path")->required();
  enc->add_option("--hops", en_hops, "cone hop count l");
  enc->add_option("--delta", en_delta, "level gap between bands");
  enc->add_option("--max-gates", en_max_gates, "area size cap");

  // finetune-ttpair
  auto* ft = app.add_subcommand("finetune-ttpair", "pair-distance fine-tuning on a large AIG");
  std::string ft_aig, ft_ckpt, ft_out, ft_history;
  int ft_steps = 100, ft_pairs = 200, ft_hops = 4, ft_delta = 2, ft_max_gates = 512;
  int ft_patterns = 1024;
  double ft_lr = 1e-4;
  ft->add_option("--aig", ft_aig, "AIGER file")->required();
  ft->add_option("--ckpt", ft_ckpt, "input checkpoint")->required();
  ft->add_option("--out", ft_out, "output checkpoint")->required();
  ft->add_option("--steps", ft_steps, "optimizer steps");
  ft->add_option("--pairs", ft_pairs, "sampled gate pairs");
  ft->add_option("--patterns", ft_patterns, "simulation patterns for labels");
  ft->add_option("--lr", ft_lr, "learning rate");
  ft->add_option("--hops", ft_hops, "cone hop count l");
  ft->add_option("--delta", ft_delta, "level gap");
  ft->add_option("--max-gates", ft_max_gates, "area size cap");
  ft->add_option("--history", ft_history, "loss history jsonl path");

  // sat-pairs
  auto* sp = app.add_subcommand("sat-pairs", "export correlated gate pairs for a CDCL hook");
  std::string sp_aig, sp_ckpt, sp_out;
  double sp_theta = 0.9;
  int sp_candidates = 512, sp_hops = 4, sp_delta = 2, sp_max_gates = 512;
  bool sp_below = false;
  sp->add_option("--aig", sp_aig, "AIGER file")->required();
  sp->add_option("--ckpt", sp_ckpt, "checkpoint")->required();
  sp->add_option("--out", sp_out, "pair file path")->required();
  sp->add_option("--theta", sp_theta, "score threshold");
  sp->add_option("--candidates", sp_candidates, "random candidate pairs");
  sp->add_option("--hops", sp_hops, "cone hop count l");
  sp->add_option("--delta", sp_delta, "level gap");
  sp->add_option("--max-gates", sp_max_gates, "area size cap");
  sp->add_flag("--below", sp_below, "emit scores <= theta instead of >= theta");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();
  CLI11_PARSE(app, argc, argv);

  try {
    const json cfg = load_config_file(config_path);

    if (gen->parsed()) {
      if (gen_n < 1 || gen_pis < 1 || gen_gates_min < 0 || gen_gates_max < gen_gates_min)
        throw ArgumentError("gen: invalid size parameters");
      fs::create_directories(gen_out);
      Manifest man;
      man.command = "gen";
      man.seed = seed;
      man.deterministic = deterministic;
      man.config = {{"n", gen_n},
                    {"pis", gen_pis},
                    {"gates_min", gen_gates_min},
                    {"gates_max", gen_gates_max}};
      try {
        for (int i = 0; i < gen_n; ++i) {
          Rng size_rng(mix_seed(seed, 0xC000 + i));
          const int gates =
              gen_gates_min +
              (gen_gates_max > gen_gates_min ? size_rng.index(gen_gates_max - gen_gates_min + 1)
                                             : 0);
          Aig aig = generate_random_aig(mix_seed(seed, i), gen_pis, gates);
          char name[32];
          std::snprintf(name, sizeof name, "%05d.aag", i);
          write_file_atomic((fs::path(gen_out) / name).string(), write_aiger(aig));
          man.outputs.push_back(name);
        }
      } catch (...) {
        // no partial batches: drop whatever was already written
        for (const auto& name : man.outputs) fs::remove(fs::path(gen_out) / name);
        throw;
      }
      man.write((fs::path(gen_out) / "circuits").string());
      std::cout << "gen: wrote " << gen_n << " circuits to " << gen_out << "\n";
      return 0;
    }

    if (label->parsed()) {
      const auto files = list_aag(label_in);
      Manifest man;
      man.command = "label";
      man.seed = seed;
      man.deterministic = deterministic;
      man.config = {{"n_patterns", lc.n_patterns},
                    {"n_tt_pairs", lc.n_tt_pairs},
                    {"n_con_pairs", lc.n_con_pairs},
                    {"n_cones", lc.n_cones},
                    {"n_graph_tt_pairs", lc.n_graph_tt_pairs},
                    {"n_ged_pairs", lc.n_ged_pairs},
                    {"n_in_samples", lc.n_in_samples},
                    {"hops", lc.hops}};
      std::vector<CircuitRecord> records;
      for (size_t i = 0; i < files.size(); ++i) {
        man.add_input(files[i]);
        Aig aig = parse_aiger(read_file(files[i]));
        LabelConfig per = lc;
        per.seed = mix_seed(seed, i);
        LabelPack pack = build_labelpack(aig, per);
        records.push_back({std::move(aig), std::move(pack)});
      }
      write_dataset(records, label_out);
      man.outputs.push_back(label_out);
      man.write(label_out);
      std::cout << "label: wrote " << records.size() << " records to " << label_out << "\n";
      return 0;
    }

    if (pretrain_cmd->parsed()) {
      const auto train_set = read_dataset(pt_data);
      std::vector<CircuitRecord> eval_set;
      if (!pt_eval.empty()) eval_set = read_dataset(pt_eval);
      ModelConfig mc = pt_model.merge(cfg);
      TrainConfig tc = pt_train.merge(cfg, seed);

      auto model = init_model<float>(mc, seed);
      AdamState<float> adam;
      adam.lr = tc.lr;
      adam.init_like(model.store);
      int start_epoch = 0;
      if (pt_resume) {
        auto ck = load_checkpoint<float>(pt_out);
        mc = config_from_checkpoint(ck.manifest);
        model = init_model<float>(mc, seed);
        adam.init_like(model.store);
        restore_params(ck, model.store, &adam);
        start_epoch = ck.manifest.at("extra").value("epoch", 0);
      }
      json extra;
      extra["model_config"] = model_config_json(mc);
      extra["seed"] = seed;
      auto history = pretrain(model, adam, train_set, eval_set.empty() ? nullptr : &eval_set, tc,
                              start_epoch, pt_out, extra);
      if (!pt_history.empty()) write_file_atomic(pt_history, history_jsonl(history));
      if (history.empty() && start_epoch >= tc.epochs) {
        // nothing to do; keep the checkpoint as is
      } else if (history.empty()) {
        save_checkpoint(pt_out, model.store, &adam, extra);
      }
      Manifest man;
      man.command = "pretrain";
      man.seed = seed;
      man.deterministic = deterministic;
      man.config = {{"model", model_config_json(mc)}, {"train", train_config_json(tc)}};
      man.add_input(pt_data);
      if (!pt_eval.empty()) man.add_input(pt_eval);
      man.outputs.push_back(pt_out);
      man.write(pt_out);
      const double final_loss = history.empty() ? 0.0 : history.back().train.all;
      std::cout << "pretrain: " << history.size() << " epochs, final l_all " << final_loss
                << ", checkpoint " << pt_out << "\n";
      return 0;
    }

    if (eval_cmd->parsed()) {
      const auto eval_set = read_dataset(ev_data);
      auto ck = load_checkpoint<float>(ev_ckpt);
      ModelConfig mc = config_from_checkpoint(ck.manifest);
      auto model = init_model<float>(mc, seed);
      restore_params<float>(ck, model.store, nullptr);
      EvalReport rep = metrics(model, eval_set);
      rep.config_echo = {{"model", model_config_json(mc)}, {"seed", seed}};
      write_file_atomic(ev_out, rep.to_json().dump(2) + "\n");
      Manifest man;
      man.command = "eval";
      man.seed = seed;
      man.deterministic = deterministic;
      man.config = rep.config_echo;
      man.add_input(ev_data);
      man.add_input(ev_ckpt);
      man.outputs.push_back(ev_out);
      man.write(ev_out);
      std::cout << "eval: l_all " << rep.losses.all << " p_tt " << rep.p_tt << " p_con "
                << rep.p_con << " p_in " << rep.p_in << "\n";
      return 0;
    }

    if (scale_cmd->parsed()) {
      const auto train_set = read_dataset(sc_data);
      const auto eval_set = read_dataset(sc_eval);
      ModelConfig mc = sc_model.merge(cfg);
      TrainConfig tc = sc_train.merge(cfg, seed);
      std::vector<double> fractions;
      std::stringstream ss(sc_fractions);
      std::string tok;
      while (std::getline(ss, tok, ',')) fractions.push_back(std::stod(tok));
      auto rows = scaling_harness<float>(train_set, eval_set, fractions, mc, tc);
      write_file_atomic(sc_out, scaling_csv(rows));
      Manifest man;
      man.command = "scale";
      man.seed = seed;
      man.deterministic = deterministic;
      man.config = {{"model", model_config_json(mc)},
                    {"train", train_config_json(tc)},
                    {"fractions", fractions}};
      man.add_input(sc_data);
      man.add_input(sc_eval);
      man.outputs.push_back(sc_out);
      man.write(sc_out);
      std::cout << "scale: wrote " << rows.size() << " rows to " << sc_out << "\n";
      return 0;
    }

    if (enc->parsed()) {
      Aig aig = parse_aiger(read_file(en_aig));
      auto ck = load_checkpoint<float>(en_ckpt);
      ModelConfig mc = config_from_checkpoint(ck.manifest);
      auto model = init_model<float>(mc, seed);
      restore_params<float>(ck, model.store, nullptr);
      Workload wl = random_workload(aig, seed);
      AreaPartition part = partition_areas(aig, en_hops, en_delta, en_max_gates);
      validate_partition(aig, part);
      auto window = window_shift_encode(model, aig, wl, mix_seed(seed, 0x504f), part);
      ParamStore<float> out_store;
      Tensor<float> hf = Tensor<float>::zeros({aig.n(), mc.d});
      hf.data = window.hf;
      Tensor<float> hs = Tensor<float>::zeros({aig.n(), mc.d});
      hs.data = window.hs;
      Tensor<float> visits = Tensor<float>::zeros({aig.n()});
      for (int g = 0; g < aig.n(); ++g) visits.data[g] = static_cast<float>(window.visits[g]);
      out_store.add("emb.hf", std::move(hf));
      out_store.add("emb.hs", std::move(hs));
      out_store.add("emb.visits", std::move(visits));
      json extra;
      extra["model_config"] = model_config_json(mc);
      extra["seed"] = seed;
      extra["areas"] = part.areas.size();
      save_checkpoint(en_out, out_store, static_cast<AdamState<float>*>(nullptr), extra);
      Manifest man;
      man.command = "encode-large";
      man.seed = seed;
      man.deterministic = deterministic;
      man.config = {{"hops", en_hops}, {"delta", en_delta}, {"max_gates", en_max_gates}};
      man.add_input(en_aig);
      man.add_input(en_ckpt);
      man.outputs.push_back(en_out);
      man.write(en_out);
      std::cout << "encode-large: " << part.areas.size() << " areas over " << aig.n()
                << " gates -> " << en_out << "\n";
      return 0;
    }

    if (ft->parsed()) {
      Aig aig = parse_aiger(read_file(ft_aig));
      auto ck = load_checkpoint<float>(ft_ckpt);
      ModelConfig mc = config_from_checkpoint(ck.manifest);
      auto model = init_model<float>(mc, seed);
      restore_params<float>(ck, model.store, nullptr);
      LabelConfig pair_cfg;
      pair_cfg.n_patterns = ft_patterns;
      pair_cfg.n_tt_pairs = ft_pairs;
      pair_cfg.n_con_pairs = pair_cfg.n_cones = 0;
      pair_cfg.n_graph_tt_pairs = pair_cfg.n_ged_pairs = pair_cfg.n_in_samples = 0;
      pair_cfg.seed = mix_seed(seed, 0xF17E);
      LabelPack pack = build_labelpack(aig, pair_cfg);
      AreaPartition part = partition_areas(aig, ft_hops, ft_delta, ft_max_gates);
      validate_partition(aig, part);
      FinetuneConfig fc;
      fc.steps = ft_steps;
      fc.lr = ft_lr;
      fc.seed = seed;
      auto history =
          finetune_tt_pair(model, aig, pack.workload, pack.sim_seed, part, pack.tt_pairs, fc);
      json extra;
      extra["model_config"] = model_config_json(mc);
      extra["seed"] = seed;
      extra["finetune_steps"] = ft_steps;
      save_checkpoint(ft_out, model.store, static_cast<AdamState<float>*>(nullptr), extra);
      if (!ft_history.empty()) {
        std::string text;
        for (size_t s = 0; s < history.size(); ++s)
          text += json{{"step", s}, {"l_gate_ttpair", history[s]}}.dump() + "\n";
        write_file_atomic(ft_history, text);
      }
      Manifest man;
      man.command = "finetune-ttpair";
      man.seed = seed;
      man.deterministic = deterministic;
      man.config = {{"steps", ft_steps}, {"pairs", ft_pairs},   {"lr", ft_lr},
                    {"hops", ft_hops},   {"delta", ft_delta},   {"max_gates", ft_max_gates},
                    {"patterns", ft_patterns}};
      man.add_input(ft_aig);
      man.add_input(ft_ckpt);
      man.outputs.push_back(ft_out);
      man.write(ft_out);
      std::cout << "finetune-ttpair: " << history.size() << " steps, loss "
                << (history.empty() ? 0.0 : history.front()) << " -> "
                << (history.empty() ? 0.0 : history.back()) << "\n";
      return 0;
    }

    if (sp->parsed()) {
      Aig aig = parse_aiger(read_file(sp_aig));
      const std::string ckpt_bytes = read_file(sp_ckpt);
      auto ck = load_checkpoint<float>(sp_ckpt);
      ModelConfig mc = config_from_checkpoint(ck.manifest);
      auto model = init_model<float>(mc, seed);
      restore_params<float>(ck, model.store, nullptr);
      Workload wl = random_workload(aig, seed);
      AreaPartition part = partition_areas(aig, sp_hops, sp_delta, sp_max_gates);
      validate_partition(aig, part);
      auto window = window_shift_encode(model, aig, wl, mix_seed(seed, 0x504f), part);
      Rng rng(mix_seed(seed, 0xCA9D));
      std::vector<std::pair<int, int>> candidates;
      std::set<std::pair<int, int>> seen;
      int attempts = 0;
      while (static_cast<int>(candidates.size()) < sp_candidates &&
             attempts < sp_candidates * 64) {
        ++attempts;
        int i = rng.index(aig.n()), j = rng.index(aig.n());
        if (i == j) continue;
        const std::pair<int, int> key{std::min(i, j), std::max(i, j)};
        if (!seen.insert(key).second) continue;
        candidates.push_back(key);
      }
      auto pairs = correlated_pairs(model, window.hf, aig.n(), sp_theta, candidates, !sp_below);
      write_file_atomic(sp_out, format_pair_export(pairs, sp_theta, seed, hash_hex(ckpt_bytes)));
      Manifest man;
      man.command = "sat-pairs";
      man.seed = seed;
      man.deterministic = deterministic;
      man.config = {{"theta", sp_theta},
                    {"candidates", sp_candidates},
                    {"below", sp_below},
                    {"hops", sp_hops},
                    {"delta", sp_delta}};
      man.add_input(sp_aig);
      man.add_input(sp_ckpt);
      man.outputs.push_back(sp_out);
      man.write(sp_out);
      std::cout << "sat-pairs: " << pairs.size() << " of " << candidates.size()
                << " candidates crossed theta=" << sp_theta << "\n";
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "error (parse): " << e.what() << "\n";
    return 1;
  } catch (const SchemaError& e) {
    std::cerr << "error (schema): " << e.what() << "\n";
    return 1;
  } catch (const CapacityError& e) {
    std::cerr << "error (capacity): " << e.what() << "\n";
    return 1;
  } catch (const TrainError& e) {
    std::cerr << "error (train): " << e.what() << "\n";
    return 1;
  } catch (const ArgumentError& e) {
    std::cerr << "error (argument): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
