#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "genie/checkpoint.hpp"
#include "genie/dataset.hpp"
#include "genie/gradcheck.hpp"
#include "genie/model.hpp"
#include "genie/path_export.hpp"
#include "genie/run_config.hpp"
#include "genie/tape.hpp"
#include "genie/train.hpp"

namespace {

using namespace genie;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
};

RunConfig resolve_config(const CommonArgs& args, bool config_required) {
  RunConfig rc;
  if (!args.config.empty()) rc = load_run_config(args.config);
  else if (config_required) throw std::invalid_argument("--config is required");
  for (const auto& s : args.sets) apply_override(rc, s);
  if (args.seed) rc.model.seed = *args.seed;
  return rc;
}

// The dataset manifest is authoritative for the task; an explicit config
// task must agree.
void adopt_task(RunConfig& rc, const Dataset& data) {
  if (rc.task_explicit && rc.model.task != data.task)
    throw std::invalid_argument("config task '" + task_name(rc.model.task) +
                                "' differs from dataset task '" + task_name(data.task) + "'");
  rc.model.task = data.task;
}

void print_metrics(const std::string& split, const Metrics& m) {
  std::cout << split << " loss " << m.loss << "\n"
            << split << " accuracy " << m.accuracy << "\n"
            << split << " micro_f1 " << m.micro_f1 << "\n"
            << split << " macro_f1 " << m.macro_f1 << "\n";
}

int cmd_train(const CommonArgs& args) {
  RunConfig rc = resolve_config(args, /*config_required=*/true);
  if (rc.dataset.empty()) throw std::invalid_argument("config needs a 'dataset' manifest path");
  Dataset data = load_dataset(rc.dataset);
  adopt_task(rc, data);

  Model model(rc.model, data.num_features, data.num_classes);
  auto graphs = prepare_blocks(model, data);
  TrainResult tr = train(model, data, graphs);

  std::filesystem::create_directories(rc.out_dir);
  write_metric_history((std::filesystem::path(rc.out_dir) / "metrics.tsv").string(), tr.history);
  save_checkpoint((std::filesystem::path(rc.out_dir) / "checkpoint.gnpk").string(), model.state());
  {
    std::ofstream snap(std::filesystem::path(rc.out_dir) / "config.json", std::ios::trunc);
    snap << run_config_json(rc);
  }

  std::cout << "epochs_run " << tr.epochs_run << "\n";
  std::cout << "best_epoch " << tr.best_epoch << "\n";
  for (Split split : {Split::kTrain, Split::kVal, Split::kTest}) {
    Metrics m = evaluate(model, data, graphs, split);
    if (m.count > 0) print_metrics(split_name(split), m);
  }
  std::cout << "wrote " << rc.out_dir << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint, const std::string& dataset_flag,
             const std::string& split_str) {
  RunConfig rc = resolve_config(args, /*config_required=*/true);
  if (!dataset_flag.empty()) rc.dataset = dataset_flag;
  if (rc.dataset.empty()) throw std::invalid_argument("no dataset given (config key or --dataset)");

  Split split;
  if (split_str == "train") split = Split::kTrain;
  else if (split_str == "val") split = Split::kVal;
  else if (split_str == "test") split = Split::kTest;
  else throw std::invalid_argument("--split must be train, val, or test");

  Dataset data = load_dataset(rc.dataset);
  adopt_task(rc, data);
  Model model(rc.model, data.num_features, data.num_classes);
  model.load_state(load_checkpoint(checkpoint));

  Metrics m = evaluate(model, data, split);
  if (m.count == 0) throw std::invalid_argument("split '" + split_str + "' has no nodes in this dataset");
  print_metrics(split_str, m);
  return 0;
}

// Small fixed instance the gradient check runs on: 6 nodes, deterministic
// features, every node labeled and masked.
struct CheckInstance {
  Graph graph;
  Tensor x;
  Labels labels;
  std::vector<std::uint8_t> mask;
};

CheckInstance build_check_instance(const ModelConfig& cfg, int in_features, int num_classes) {
  CheckInstance inst;
  const std::vector<std::pair<int, int>> edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {1, 4}, {0, 2}};
  inst.graph = build_graph(edges, 6, /*undirected=*/true);
  inst.x = Tensor(6, in_features);
  std::mt19937_64 rng(cfg.seed + 1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : inst.x.data) v = u(rng);
  inst.labels.task = cfg.task;
  inst.labels.num_classes = num_classes;
  inst.labels.class_index.assign(6, 0);
  inst.labels.bits = Tensor::zeros(6, num_classes);
  inst.labels.labeled.assign(6, 1);
  for (int i = 0; i < 6; ++i) {
    inst.labels.class_index[i] = i % num_classes;
    inst.labels.bits.at(i, i % num_classes) = 1.0;
    if (num_classes > 1) inst.labels.bits.at(i, (i + 2) % num_classes) = 1.0;
  }
  inst.mask.assign(6, 1);
  return inst;
}

int cmd_gradcheck(const CommonArgs& args, double eps, bool corrupt) {
  RunConfig rc = resolve_config(args, /*config_required=*/false);
  // Finite differences over every parameter entry get slow fast; cap the
  // instance at check-friendly sizes.
  rc.model.depth = std::min(rc.model.depth, 3);
  rc.model.hidden = std::min(rc.model.hidden, 4);

  const int in_features = 3;
  const int num_classes = 2;
  Model model(rc.model, in_features, num_classes);
  CheckInstance inst = build_check_instance(rc.model, in_features, num_classes);
  PreparedGraph pg = model.prepare(inst.graph);

  auto refs = model.params();
  std::vector<NamedParam> named;
  for (const auto& r : refs) named.push_back({r.name, r.tensor});

  LossAndGradFn f = [&](std::vector<Tensor>* grads_out) {
    Tape tape;
    std::vector<Tensor> bound;
    Tensor logits = model.forward(tape, pg, inst.x, &bound);
    std::vector<Tensor> l2_terms;
    for (std::size_t i = 0; i < refs.size(); ++i)
      if (refs[i].weight_matrix) l2_terms.push_back(bound[i]);
    Tensor loss = masked_loss(tape, logits, inst.labels, inst.mask, rc.model.l2_penalty, l2_terms);
    const double value = loss.at(0, 0);
    if (grads_out) {
      tape.backward(loss);
      grads_out->clear();
      for (const auto& b : bound) grads_out->push_back(tape.grad(b));
      if (corrupt) (*grads_out)[0].data[0] += 0.01;
    }
    return value;
  };

  GradCheckResult res = grad_check(f, named, eps);
  const double threshold = 1e-4;
  std::cout << "variant " << variant_name(rc.model.variant) << " depth " << rc.model.depth
            << " hidden " << rc.model.hidden << "\n";
  std::cout << "max_rel_error " << res.max_rel_error << "\n";
  std::cout << "worst_param " << (res.worst_param.empty() ? "-" : res.worst_param) << " index "
            << res.worst_index << " analytic " << res.worst_analytic << " numeric "
            << res.worst_numeric << "\n";
  if (res.max_rel_error > threshold) {
    std::cout << "gradcheck FAIL (threshold " << threshold << ")\n";
    return 1;
  }
  std::cout << "gradcheck OK (threshold " << threshold << ")\n";
  return 0;
}

int cmd_synth(const SynthSpec& spec, const std::string& out_dir) {
  Dataset data = gen_planted_path(spec);
  write_dataset(out_dir, data);
  long train_nodes = 0, test_nodes = 0;
  for (const auto& block : data.blocks)
    for (std::size_t i = 0; i < block.masks.train.size(); ++i) {
      train_nodes += block.masks.train[i];
      test_nodes += block.masks.test[i];
    }
  std::cout << "blocks " << data.blocks.size() << "\n";
  std::cout << "train_targets " << train_nodes << "\n";
  std::cout << "test_targets " << test_nodes << "\n";
  std::cout << "wrote " << out_dir << "\n";
  return 0;
}

int cmd_paths(const CommonArgs& args, const std::string& checkpoint, const std::string& dataset_flag,
              int block_index, int target, int hops, int layer, const std::string& out_path) {
  RunConfig rc = resolve_config(args, /*config_required=*/true);
  if (!dataset_flag.empty()) rc.dataset = dataset_flag;
  if (rc.dataset.empty()) throw std::invalid_argument("no dataset given (config key or --dataset)");

  Dataset data = load_dataset(rc.dataset);
  adopt_task(rc, data);
  Model model(rc.model, data.num_features, data.num_classes);
  model.load_state(load_checkpoint(checkpoint));

  if (block_index < 0 || block_index >= static_cast<int>(data.blocks.size()))
    throw std::invalid_argument("--block out of range, dataset has " +
                                std::to_string(data.blocks.size()) + " blocks");
  const GraphBlock& block = data.blocks[block_index];
  PreparedGraph pg = model.prepare(block.graph);

  if (hops < 0) hops = rc.model.depth;
  std::vector<double> weights = attention_of_layer(model, pg, block.features, layer);
  Subgraph sub = receptive_subgraph(pg.looped, target, hops);
  std::string dot = receptive_dot(pg.looped, sub, weights, target);

  if (out_path.empty() || out_path == "-") {
    std::cout << dot;
  } else {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw std::invalid_argument("cannot open " + out_path + " for writing");
    out << dot;
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph learner with attention-gated neighborhood aggregation"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, check_args, paths_args;
  std::string eval_checkpoint, eval_dataset, eval_split = "test";
  double check_eps = 1e-6;
  bool check_corrupt = false;
  SynthSpec synth_spec;
  std::string synth_out;
  std::string paths_checkpoint, paths_dataset, paths_out;
  int paths_block = 0, paths_target = 0, paths_hops = -1, paths_layer = 0;

  auto add_common = [](CLI::App* cmd, CommonArgs& args, bool config_required) {
    auto* opt = cmd->add_option("--config", args.config, "JSON run config");
    if (config_required) opt->required();
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--set", args.sets, "override a config key, e.g. --set lr=0.01")
        ->take_all();
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train a model and write metrics + checkpoint");
  add_common(train_cmd, train_args, true);

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  add_common(eval_cmd, eval_args, true);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "parameter file")->required();
  eval_cmd->add_option("--dataset", eval_dataset, "dataset manifest (overrides config)");
  eval_cmd->add_option("--split", eval_split, "train | val | test (default test)");

  CLI::App* check_cmd =
      app.add_subcommand("gradcheck", "finite-difference gradient check on a small instance");
  add_common(check_cmd, check_args, false);
  check_cmd->add_option("--eps", check_eps, "finite-difference step (default 1e-6)");
  check_cmd->add_flag("--corrupt", check_corrupt)->group("");  // negative-control hook

  CLI::App* synth_cmd = app.add_subcommand("synth", "generate the planted-path benchmark");
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--num-graphs", synth_spec.num_graphs, "graphs across both splits");
  synth_cmd->add_option("--nodes", synth_spec.nodes_per_graph, "nodes per graph");
  synth_cmd->add_option("--hops", synth_spec.signal_hops, "distance of the planted signal");
  synth_cmd->add_option("--hub-degree", synth_spec.hub_degree, "minimum noise satellites on the hub");
  synth_cmd->add_option("--noise-std", synth_spec.noise_std, "feature noise level");
  synth_cmd->add_option("--seed", synth_spec.seed, "generator seed");

  CLI::App* paths_cmd = app.add_subcommand("paths", "export a target's receptive paths as DOT");
  add_common(paths_cmd, paths_args, true);
  paths_cmd->add_option("--checkpoint", paths_checkpoint, "parameter file")->required();
  paths_cmd->add_option("--dataset", paths_dataset, "dataset manifest (overrides config)");
  paths_cmd->add_option("--block", paths_block, "dataset block (default 0)");
  paths_cmd->add_option("--target", paths_target, "node whose paths to export")->required();
  paths_cmd->add_option("--hops", paths_hops, "neighborhood radius (default: model depth)");
  paths_cmd->add_option("--layer", paths_layer, "attention layer to read (default 0)");
  paths_cmd->add_option("--out", paths_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_args, eval_checkpoint, eval_dataset, eval_split);
    if (check_cmd->parsed()) return cmd_gradcheck(check_args, check_eps, check_corrupt);
    if (synth_cmd->parsed()) return cmd_synth(synth_spec, synth_out);
    if (paths_cmd->parsed())
      return cmd_paths(paths_args, paths_checkpoint, paths_dataset, paths_block, paths_target,
                       paths_hops, paths_layer, paths_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
