#include "genie/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace genie {

std::span<const int> Graph::in_neighbors(int i) const {
  if (i < 0 || i >= num_nodes)
    throw std::invalid_argument("in_neighbors: node id " + std::to_string(i) + " out of range [0, " +
                                std::to_string(num_nodes) + ")");
  const auto begin = row_offsets[i];
  const auto end = row_offsets[i + 1];
  return {edge_src.data() + begin, static_cast<std::size_t>(end - begin)};
}

std::int64_t Graph::first_in_edge(int i) const {
  if (i < 0 || i >= num_nodes) throw std::invalid_argument("first_in_edge: node id out of range");
  return row_offsets[i];
}

std::int64_t Graph::in_degree(int i) const {
  if (i < 0 || i >= num_nodes) throw std::invalid_argument("in_degree: node id out of range");
  return row_offsets[i + 1] - row_offsets[i];
}

namespace {

Graph from_sorted_pairs(std::vector<std::pair<int, int>> dst_src, int num_nodes, bool self_loops) {
  // dst_src holds (dst, src); sorting it gives the canonical (dst, src) order.
  std::sort(dst_src.begin(), dst_src.end());
  for (std::size_t e = 1; e < dst_src.size(); ++e) {
    if (dst_src[e] == dst_src[e - 1])
      throw std::invalid_argument("duplicate edge (" + std::to_string(dst_src[e].second) + ", " +
                                  std::to_string(dst_src[e].first) + ")");
  }

  Graph g;
  g.num_nodes = num_nodes;
  g.has_self_loops = self_loops;
  g.edge_src.reserve(dst_src.size());
  g.edge_dst.reserve(dst_src.size());
  for (const auto& [dst, src] : dst_src) {
    g.edge_dst.push_back(dst);
    g.edge_src.push_back(src);
  }
  g.row_offsets.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
  for (int dst : g.edge_dst) g.row_offsets[dst + 1]++;
  for (int i = 0; i < num_nodes; ++i) g.row_offsets[i + 1] += g.row_offsets[i];
  return g;
}

}  // namespace

Graph build_graph(std::span<const std::pair<int, int>> edges, int num_nodes, bool undirected) {
  if (num_nodes < 0) throw std::invalid_argument("build_graph: negative node count");

  std::vector<std::pair<int, int>> dst_src;
  dst_src.reserve(edges.size() * (undirected ? 2 : 1));
  for (const auto& [src, dst] : edges) {
    if (src < 0 || src >= num_nodes || dst < 0 || dst >= num_nodes)
      throw std::invalid_argument("build_graph: edge (" + std::to_string(src) + ", " + std::to_string(dst) +
                                  ") out of range [0, " + std::to_string(num_nodes) + ")");
    dst_src.emplace_back(dst, src);
    if (undirected && src != dst) dst_src.emplace_back(src, dst);
  }
  return from_sorted_pairs(std::move(dst_src), num_nodes, /*self_loops=*/false);
}

Graph add_self_loops(const Graph& g) {
  if (g.has_self_loops) throw std::invalid_argument("add_self_loops: graph already has self-loops");
  std::vector<std::pair<int, int>> dst_src;
  dst_src.reserve(g.edge_src.size() + static_cast<std::size_t>(g.num_nodes));
  for (std::int64_t e = 0; e < g.num_edges(); ++e) {
    if (g.edge_src[e] == g.edge_dst[e])
      throw std::invalid_argument("add_self_loops: graph already contains self edge at node " +
                                  std::to_string(g.edge_src[e]));
    dst_src.emplace_back(g.edge_dst[e], g.edge_src[e]);
  }
  for (int i = 0; i < g.num_nodes; ++i) dst_src.emplace_back(i, i);
  return from_sorted_pairs(std::move(dst_src), g.num_nodes, /*self_loops=*/true);
}

namespace {

NormalizedAdjacency normalize(const Graph& g, bool symmetric, const char* name) {
  if (!g.has_self_loops)
    throw std::invalid_argument(std::string(name) + ": graph must have self-loops (zero-degree nodes otherwise)");
  std::vector<double> degree(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i) degree[i] = static_cast<double>(g.in_degree(i));

  NormalizedAdjacency adj;
  adj.graph = g;
  adj.edge_weight.resize(g.edge_src.size());
  for (std::int64_t e = 0; e < g.num_edges(); ++e) {
    const int dst = g.edge_dst[e];
    const int src = g.edge_src[e];
    adj.edge_weight[e] = symmetric ? 1.0 / std::sqrt(degree[dst] * degree[src]) : 1.0 / degree[dst];
  }
  return adj;
}

}  // namespace

NormalizedAdjacency sym_norm_adjacency(const Graph& g) { return normalize(g, true, "sym_norm_adjacency"); }

NormalizedAdjacency row_norm_adjacency(const Graph& g) { return normalize(g, false, "row_norm_adjacency"); }

}  // namespace genie
