#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace genie {

/// Immutable sparse graph in destination-sorted CSR form.
///
/// Edges are stored as flat (src, dst) arrays sorted by (dst, src), so the
/// in-edges of node i occupy the contiguous range
/// [row_offsets[i], row_offsets[i+1]). The flat arrays double as the
/// gather indices used by the edge-level attention kernels, which keeps
/// every attention pass at O(|E|) storage.
struct Graph {
  int num_nodes = 0;
  std::vector<int> edge_src;
  std::vector<int> edge_dst;
  std::vector<std::int64_t> row_offsets;  // size num_nodes + 1
  bool has_self_loops = false;

  std::int64_t num_edges() const { return static_cast<std::int64_t>(edge_src.size()); }

  /// Sources of the in-edges of node i, ascending. Edge ids for the slice
  /// are first_in_edge(i), first_in_edge(i)+1, ...
  std::span<const int> in_neighbors(int i) const;
  std::int64_t first_in_edge(int i) const;
  std::int64_t in_degree(int i) const;
};

/// Graph sparsity pattern plus one weight per edge.
struct NormalizedAdjacency {
  Graph graph;
  std::vector<double> edge_weight;
};

/// Builds a destination-sorted graph from an edge list. With undirected=true
/// each input edge is stored in both orientations (mirror closure).
/// Throws std::invalid_argument on out-of-range ids or duplicate directed
/// edges (after mirroring).
Graph build_graph(std::span<const std::pair<int, int>> edges, int num_nodes, bool undirected);

/// Returns a copy of g with exactly one (i,i) edge added per node.
/// Rejects graphs that already contain any self edge.
Graph add_self_loops(const Graph& g);

/// Symmetric normalization: weight(i,j) = 1/sqrt(deg(i) * deg(j)) over the
/// self-looped pattern. Requires g.has_self_loops.
NormalizedAdjacency sym_norm_adjacency(const Graph& g);

/// Row normalization: weight(i,j) = 1/deg(i), so each in-row sums to 1.
/// Requires g.has_self_loops.
NormalizedAdjacency row_norm_adjacency(const Graph& g);

}  // namespace genie
