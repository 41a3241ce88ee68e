#include "genie/path_export.hpp"

#include <charconv>
#include <queue>
#include <stdexcept>

#include "genie/tape.hpp"

namespace genie {

ImportanceLevel classify_importance(double weight) {
  if (weight < 0.1) return ImportanceLevel::kLow;
  if (weight < 0.2) return ImportanceLevel::kMid;
  return ImportanceLevel::kHigh;
}

const char* importance_color(ImportanceLevel level) {
  switch (level) {
    case ImportanceLevel::kLow: return "green";
    case ImportanceLevel::kMid: return "blue";
    case ImportanceLevel::kHigh: return "red";
  }
  throw std::logic_error("unknown importance level");
}

std::vector<double> attention_of_layer(const Model& model, const PreparedGraph& pg, const Tensor& x,
                                       int layer) {
  const Variant v = model.config().variant;
  if (v == Variant::kGcn || v == Variant::kGcnMean)
    throw std::invalid_argument("attention_of_layer: variant '" + variant_name(v) +
                                "' has no attention weights");
  if (layer < 0 || layer >= model.config().depth)
    throw std::invalid_argument("attention_of_layer: layer " + std::to_string(layer) +
                                " out of range [0, " + std::to_string(model.config().depth) + ")");
  Tape tape;
  ForwardTrace trace;
  model.forward(tape, pg, x, nullptr, &trace);
  const Tensor& alpha = trace.attention.at(static_cast<std::size_t>(layer));
  return alpha.data;
}

Subgraph receptive_subgraph(const Graph& g, int target, int hops) {
  if (target < 0 || target >= g.num_nodes)
    throw std::invalid_argument("receptive_subgraph: target " + std::to_string(target) +
                                " out of range [0, " + std::to_string(g.num_nodes) + ")");
  if (hops < 0) throw std::invalid_argument("receptive_subgraph: hops must be >= 0");

  // Breadth-first distances to the target, walking in-edges (the direction
  // information flows from).
  std::vector<int> dist(g.num_nodes, -1);
  dist[target] = 0;
  std::queue<int> frontier;
  frontier.push(target);
  while (!frontier.empty()) {
    const int cur = frontier.front();
    frontier.pop();
    if (dist[cur] >= hops) continue;
    for (int src : g.in_neighbors(cur)) {
      if (dist[src] != -1) continue;
      dist[src] = dist[cur] + 1;
      frontier.push(src);
    }
  }

  Subgraph sub;
  for (int i = 0; i < g.num_nodes; ++i)
    if (dist[i] != -1 && dist[i] <= hops) sub.nodes.push_back(i);
  // An edge into a node at distance d still influences the target when
  // d + 1 <= hops.
  for (std::int64_t e = 0; e < g.num_edges(); ++e) {
    const int dst = g.edge_dst[static_cast<std::size_t>(e)];
    if (dist[dst] != -1 && dist[dst] + 1 <= hops) sub.edges.push_back(e);
  }
  return sub;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, p);
}

}  // namespace

std::string receptive_dot(const Graph& g, const Subgraph& sub, std::span<const double> edge_weight,
                          int target) {
  if (static_cast<std::int64_t>(edge_weight.size()) != g.num_edges())
    throw std::invalid_argument("receptive_dot: need one weight per graph edge");

  std::string out;
  out += "digraph receptive_paths {\n";
  out += "  rankdir=LR;\n";
  out += "  node [shape=circle, fontsize=10];\n";
  for (int node : sub.nodes) {
    out += "  \"" + std::to_string(node) + "\"";
    if (node == target) out += " [style=filled, fillcolor=black, fontcolor=white]";
    out += ";\n";
  }
  for (std::int64_t e : sub.edges) {
    const int src = g.edge_src[static_cast<std::size_t>(e)];
    const int dst = g.edge_dst[static_cast<std::size_t>(e)];
    const double w = edge_weight[static_cast<std::size_t>(e)];
    out += "  \"" + std::to_string(src) + "\" -> \"" + std::to_string(dst) + "\" [color=" +
           importance_color(classify_importance(w)) + ", penwidth=" + fmt(1.0 + 9.0 * w) + "];\n";
  }
  out += "}\n";
  return out;
}

}  // namespace genie
