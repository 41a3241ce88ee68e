#pragma once

#include <span>
#include <string>
#include <vector>

#include "genie/dataset.hpp"
#include "genie/metrics.hpp"
#include "genie/model.hpp"

namespace genie {

enum class Split { kTrain, kVal, kTest };

std::string split_name(Split s);
std::span<const std::uint8_t> mask_of(const GraphBlock& block, Split s);

struct MetricRecord {
  int epoch = 0;
  Split split = Split::kTrain;
  std::string metric;
  double value = 0.0;
};

struct TrainResult {
  std::vector<MetricRecord> history;
  int best_epoch = 0;  // epoch whose parameters the model carries at return
  int epochs_run = 0;
  bool stopped_early = false;
};

/// Self-loops + normalization for every block, in block order.
std::vector<PreparedGraph> prepare_blocks(const Model& model, const Dataset& data);

/// Pooled metrics of one split across all blocks. count == 0 when the split
/// is empty.
Metrics evaluate(const Model& model, const Dataset& data, std::span<const PreparedGraph> graphs,
                 Split split);
Metrics evaluate(const Model& model, const Dataset& data, Split split);

/// Full-batch training: per epoch one Adam update from the gradients pooled
/// over all blocks (each block's mean loss weighted by its share of training
/// nodes, plus the l2 term once), then train/val metrics of the updated
/// parameters are recorded. Early stopping watches the validation metric
/// (accuracy for multi-class, micro-F1 for multi-label) with the config's
/// patience and restores the best epoch's parameters; without validation
/// nodes the final epoch stands. Numeric failure aborts with the epoch in
/// the error.
TrainResult train(Model& model, const Dataset& data, std::span<const PreparedGraph> graphs);
TrainResult train(Model& model, const Dataset& data);

/// Line records "epoch<TAB>split<TAB>metric<TAB>value".
void write_metric_history(const std::string& path, std::span<const MetricRecord> history);

}  // namespace genie
