#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "genie/graph.hpp"
#include "genie/tensor.hpp"

namespace genie {

enum class Task { kMultiClass, kMultiLabel };

Task parse_task(const std::string& s);       // "multi-class" | "multi-label"
std::string task_name(Task t);

/// Per-node supervision. Multi-class nodes carry a class index (-1 when
/// unlabeled); multi-label nodes carry a 0/1 row in `bits`.
struct Labels {
  Task task = Task::kMultiClass;
  int num_classes = 0;
  std::vector<int> class_index;       // size N, -1 = unlabeled
  Tensor bits;                        // N x C, rows of unlabeled nodes all zero
  std::vector<std::uint8_t> labeled;  // size N
};

struct SplitMasks {
  std::vector<std::uint8_t> train;
  std::vector<std::uint8_t> val;
  std::vector<std::uint8_t> test;
};

/// One graph with its features, labels, and split masks. A transductive
/// dataset is a single block with mixed masks; an inductive dataset keeps
/// disjoint graphs in separate blocks so evaluation never touches training
/// structure.
struct GraphBlock {
  Graph graph;  // raw, without self-loops
  Tensor features;
  Labels labels;
  SplitMasks masks;
};

struct Dataset {
  Task task = Task::kMultiClass;
  int num_classes = 0;
  int num_features = 0;
  std::vector<GraphBlock> blocks;
};

// --- text formats -----------------------------------------------------------
// edges:    "src<TAB>dst" per line, '#' starts a comment line
// features: header "N P", then N lines of P space-separated decimals
// labels:   "node<TAB>class" (multi-class) or "node<TAB>0,1,0,..." (multi-label)
// splits:   "node<TAB>{train|val|test}", unlisted nodes are unlabeled
// All loaders reject malformed input with the offending line number.

std::vector<std::pair<int, int>> load_edge_list(const std::string& path);
void write_edge_list(const std::string& path, std::span<const std::pair<int, int>> edges);

Tensor load_features(const std::string& path);
void write_features(const std::string& path, const Tensor& x);

Labels load_labels(const std::string& path, Task task, int num_classes, int num_nodes);
void write_labels(const std::string& path, const Labels& labels);

SplitMasks load_splits(const std::string& path, int num_nodes);
void write_splits(const std::string& path, const SplitMasks& masks);

/// Loads a dataset manifest (JSON): task, num_classes, and one or more
/// blocks of {edges, features, labels, splits} file paths, resolved
/// relative to the manifest location.
Dataset load_dataset(const std::string& manifest_path);

/// Writes every block's four text files plus dataset.json into dir.
void write_dataset(const std::string& dir, const Dataset& data);

// --- planted-path benchmark --------------------------------------------------

/// Generator knobs for the planted-receptive-path task: the label of each
/// graph's target node is the sign of one feature planted exactly
/// signal_hops away along a chain, while a hub adjacent to the chain feeds
/// in noise neighbors.
struct SynthSpec {
  int num_graphs = 300;
  int nodes_per_graph = 15;
  int signal_hops = 3;
  int hub_degree = 8;  // minimum number of noise satellites on the hub
  double noise_std = 0.1;
  std::uint64_t seed = 7;
};

/// Node roles inside every generated graph (topology is shared; only
/// features differ between graphs).
struct PlantedLayout {
  int target = 0;
  int signal = 0;          // chain node signal_hops away from target
  int hub = 0;             // attached to chain node 1
  int first_satellite = 0;
  int num_satellites = 0;
  int nodes_per_graph = 0;
};

PlantedLayout planted_layout(const SynthSpec& spec);

inline constexpr int kPlantedFeatureDim = 4;
inline constexpr int kPlantedSignalChannel = 0;
inline constexpr double kPlantedSignalMagnitude = 3.0;

/// Builds the benchmark: the first 2/3 of the graphs form one training
/// block, the rest one test block (each block is the disjoint union of its
/// graphs). Labels alternate sign within each split, so splits are
/// balanced. Deterministic given spec.seed.
Dataset gen_planted_path(const SynthSpec& spec);

}  // namespace genie
