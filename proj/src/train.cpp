#include "genie/train.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>
#include <string_view>

#include "genie/optim.hpp"
#include "genie/tape.hpp"

namespace genie {

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  throw std::logic_error("unknown split");
}

std::span<const std::uint8_t> mask_of(const GraphBlock& block, Split s) {
  switch (s) {
    case Split::kTrain: return block.masks.train;
    case Split::kVal: return block.masks.val;
    case Split::kTest: return block.masks.test;
  }
  throw std::logic_error("unknown split");
}

namespace {

long masked_count(std::span<const std::uint8_t> mask) {
  long n = 0;
  for (auto m : mask) n += m ? 1 : 0;
  return n;
}

void check_compatible(const Model& model, const Dataset& data) {
  if (model.config().task != data.task)
    throw std::invalid_argument("train: model task differs from dataset task");
  if (model.num_classes() != data.num_classes)
    throw std::invalid_argument("train: model classes differ from dataset classes");
  if (model.in_features() != data.num_features)
    throw std::invalid_argument("train: model input width differs from dataset features");
  if (data.blocks.empty()) throw std::invalid_argument("train: dataset has no blocks");
}

}  // namespace

std::vector<PreparedGraph> prepare_blocks(const Model& model, const Dataset& data) {
  std::vector<PreparedGraph> graphs;
  graphs.reserve(data.blocks.size());
  for (const auto& block : data.blocks) graphs.push_back(model.prepare(block.graph));
  return graphs;
}

Metrics evaluate(const Model& model, const Dataset& data, std::span<const PreparedGraph> graphs,
                 Split split) {
  check_compatible(model, data);
  if (graphs.size() != data.blocks.size())
    throw std::invalid_argument("evaluate: prepared graph count differs from block count");
  MetricAccumulator acc(data.num_classes);
  for (std::size_t b = 0; b < data.blocks.size(); ++b) {
    const GraphBlock& block = data.blocks[b];
    auto mask = mask_of(block, split);
    if (masked_count(mask) == 0) continue;
    Tape tape;
    Tensor logits = model.forward(tape, graphs[b], block.features);
    Tensor loss = masked_loss(tape, logits, block.labels, mask, 0.0, {});
    acc.add(logits, block.labels, mask, loss.at(0, 0));
  }
  return acc.finalize();
}

Metrics evaluate(const Model& model, const Dataset& data, Split split) {
  return evaluate(model, data, prepare_blocks(model, data), split);
}

TrainResult train(Model& model, const Dataset& data, std::span<const PreparedGraph> graphs) {
  check_compatible(model, data);
  if (graphs.size() != data.blocks.size())
    throw std::invalid_argument("train: prepared graph count differs from block count");

  std::vector<long> train_counts;
  long total_train = 0;
  long total_val = 0;
  for (const auto& block : data.blocks) {
    train_counts.push_back(masked_count(mask_of(block, Split::kTrain)));
    total_train += train_counts.back();
    total_val += masked_count(mask_of(block, Split::kVal));
  }
  if (total_train == 0) throw std::invalid_argument("train: no nodes carry the train mask");

  const ModelConfig& cfg = model.config();
  auto refs = model.params();
  Adam adam(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});

  const bool has_val = total_val > 0;
  const std::string stop_metric = cfg.task == Task::kMultiClass ? "accuracy" : "micro_f1";

  TrainResult result;
  double best_val = 0.0;
  std::vector<std::pair<std::string, Tensor>> best_state;

  auto record = [&](int epoch, Split split, const Metrics& m) {
    result.history.push_back({epoch, split, "loss", m.loss});
    result.history.push_back({epoch, split, "accuracy", m.accuracy});
    result.history.push_back({epoch, split, "micro_f1", m.micro_f1});
    result.history.push_back({epoch, split, "macro_f1", m.macro_f1});
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    try {
      // Gradients pooled across blocks: each block contributes its mean
      // loss weighted by its share of training nodes, so the update equals
      // single-block training on the disjoint union.
      std::vector<Tensor> acc;
      for (const auto& r : refs) acc.emplace_back(r.tensor->rows, r.tensor->cols);
      for (std::size_t b = 0; b < data.blocks.size(); ++b) {
        if (train_counts[b] == 0) continue;
        const GraphBlock& block = data.blocks[b];
        Tape tape;
        std::vector<Tensor> bound;
        Tensor logits = model.forward(tape, graphs[b], block.features, &bound);
        Tensor loss = masked_loss(tape, logits, block.labels, mask_of(block, Split::kTrain), 0.0, {});
        tape.backward(loss);
        const double w = static_cast<double>(train_counts[b]) / total_train;
        for (std::size_t i = 0; i < refs.size(); ++i) {
          const Tensor& g = tape.grad(bound[i]);
          for (std::size_t j = 0; j < g.data.size(); ++j) acc[i].data[j] += w * g.data[j];
        }
      }
      if (cfg.l2_penalty > 0.0) {
        for (std::size_t i = 0; i < refs.size(); ++i) {
          if (!refs[i].weight_matrix) continue;
          const Tensor& p = *refs[i].tensor;
          for (std::size_t j = 0; j < p.data.size(); ++j)
            acc[i].data[j] += 2.0 * cfg.l2_penalty * p.data[j];
        }
      }
      adam.step(refs, acc);

      record(epoch, Split::kTrain, evaluate(model, data, graphs, Split::kTrain));
      if (has_val) {
        Metrics vm = evaluate(model, data, graphs, Split::kVal);
        record(epoch, Split::kVal, vm);
        const double score = cfg.task == Task::kMultiClass ? vm.accuracy : vm.micro_f1;
        if (result.best_epoch == 0 || score > best_val) {
          best_val = score;
          result.best_epoch = epoch;
          best_state = model.state();
        } else if (epoch - result.best_epoch >= cfg.patience) {
          result.epochs_run = epoch;
          result.stopped_early = true;
          break;
        }
      } else {
        result.best_epoch = epoch;
      }
      result.epochs_run = epoch;
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
  }

  if (has_val && !best_state.empty()) model.load_state(best_state);
  return result;
}

TrainResult train(Model& model, const Dataset& data) {
  return train(model, data, prepare_blocks(model, data));
}

void write_metric_history(const std::string& path, std::span<const MetricRecord> history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot open " + path + " for writing");
  char buf[32];
  for (const auto& r : history) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), r.value);
    if (ec != std::errc()) throw std::runtime_error("number formatting failed");
    out << r.epoch << '\t' << split_name(r.split) << '\t' << r.metric << '\t'
        << std::string_view(buf, p - buf) << '\n';
  }
}

}  // namespace genie
