#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "genie/dataset.hpp"
#include "genie/tensor.hpp"

namespace genie {

struct Metrics {
  double loss = 0.0;
  double accuracy = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  long count = 0;  // evaluated nodes
};

/// Confusion counts pooled across graph blocks before ratios are taken, so
/// every node of a split weighs the same regardless of block sizes.
///
/// Predictions: multi-class takes the argmax (ties resolve to the lowest
/// class index); multi-label thresholds each sigmoid at 0.5, i.e. logit
/// >= 0. Accuracy is the exact-match rate; per-class F1 with an empty
/// denominator counts as 0.
class MetricAccumulator {
 public:
  explicit MetricAccumulator(int num_classes);

  /// Folds in masked rows of one block. mean_loss is the block's mean data
  /// loss over the same mask (weighted by row count on finalize).
  void add(const Tensor& logits, const Labels& labels, std::span<const std::uint8_t> mask,
           double mean_loss);

  Metrics finalize() const;

 private:
  int num_classes_;
  std::vector<long> tp_, fp_, fn_;
  long correct_ = 0;
  long rows_ = 0;
  double loss_sum_ = 0.0;
};

}  // namespace genie
