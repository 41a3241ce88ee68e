#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "genie/graph.hpp"
#include "genie/model.hpp"
#include "genie/tensor.hpp"

namespace genie {

/// Importance bands for visualizing learned edge weights:
///   weight < 0.1        -> kLow   (green)
///   0.1 <= weight < 0.2 -> kMid   (blue)
///   weight >= 0.2       -> kHigh  (red)
enum class ImportanceLevel { kLow, kMid, kHigh };

ImportanceLevel classify_importance(double weight);
const char* importance_color(ImportanceLevel level);

/// Attention weights of one layer over every edge of the prepared (self-
/// looped) graph, in edge-id order. Only attention variants support this;
/// convolution variants throw std::invalid_argument.
std::vector<double> attention_of_layer(const Model& model, const PreparedGraph& pg, const Tensor& x,
                                       int layer);

/// Nodes within `hops` steps of target walking against the aggregation
/// direction, plus every edge whose information still reaches the target
/// within the remaining hops. Node and edge ids ascend.
struct Subgraph {
  std::vector<int> nodes;
  std::vector<std::int64_t> edges;
};

Subgraph receptive_subgraph(const Graph& g, int target, int hops);

/// Deterministic DOT rendering of a receptive subgraph: the target node is
/// filled black, every edge points along the aggregation direction and is
/// colored by its importance band with pen width 1 + 9 * weight.
/// edge_weight holds one weight per edge id of g.
std::string receptive_dot(const Graph& g, const Subgraph& sub, std::span<const double> edge_weight,
                          int target);

}  // namespace genie
