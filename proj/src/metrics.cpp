#include "genie/metrics.hpp"

#include <stdexcept>

namespace genie {

MetricAccumulator::MetricAccumulator(int num_classes)
    : num_classes_(num_classes),
      tp_(num_classes, 0),
      fp_(num_classes, 0),
      fn_(num_classes, 0) {
  if (num_classes < 1) throw std::invalid_argument("metrics: num_classes must be >= 1");
}

void MetricAccumulator::add(const Tensor& logits, const Labels& labels,
                            std::span<const std::uint8_t> mask, double mean_loss) {
  if (logits.cols != num_classes_) throw std::invalid_argument("metrics: logit width differs from num_classes");
  if (static_cast<int>(mask.size()) != logits.rows)
    throw std::invalid_argument("metrics: mask length differs from logit rows");

  long block_rows = 0;
  for (int i = 0; i < logits.rows; ++i) {
    if (!mask[i]) continue;
    ++block_rows;
    if (labels.task == Task::kMultiClass) {
      int pred = 0;
      for (int c = 1; c < num_classes_; ++c)
        if (logits.at(i, c) > logits.at(i, pred)) pred = c;
      const int truth = labels.class_index[i];
      if (truth < 0 || truth >= num_classes_)
        throw std::invalid_argument("metrics: masked node " + std::to_string(i) + " has no valid label");
      if (pred == truth) {
        ++correct_;
        ++tp_[truth];
      } else {
        ++fp_[pred];
        ++fn_[truth];
      }
    } else {
      bool all_match = true;
      for (int c = 0; c < num_classes_; ++c) {
        const bool pred = logits.at(i, c) >= 0.0;  // sigmoid >= 0.5
        const bool truth = labels.bits.at(i, c) != 0.0;
        if (pred && truth) ++tp_[c];
        else if (pred && !truth) ++fp_[c];
        else if (!pred && truth) ++fn_[c];
        if (pred != truth) all_match = false;
      }
      if (all_match) ++correct_;
    }
  }
  rows_ += block_rows;
  loss_sum_ += mean_loss * block_rows;
}

Metrics MetricAccumulator::finalize() const {
  Metrics m;
  m.count = rows_;
  if (rows_ == 0) return m;
  m.loss = loss_sum_ / rows_;
  m.accuracy = static_cast<double>(correct_) / rows_;

  long tp_total = 0, fp_total = 0, fn_total = 0;
  double macro_sum = 0.0;
  for (int c = 0; c < num_classes_; ++c) {
    tp_total += tp_[c];
    fp_total += fp_[c];
    fn_total += fn_[c];
    const long denom = 2 * tp_[c] + fp_[c] + fn_[c];
    macro_sum += denom > 0 ? 2.0 * tp_[c] / denom : 0.0;
  }
  const long micro_denom = 2 * tp_total + fp_total + fn_total;
  m.micro_f1 = micro_denom > 0 ? 2.0 * tp_total / micro_denom : 0.0;
  m.macro_f1 = macro_sum / num_classes_;
  return m;
}

}  // namespace genie
