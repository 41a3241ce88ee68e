#include "genie/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "json.hpp"

namespace genie {
namespace {

using nlohmann::json;

[[noreturn]] void fail_at(const std::string& path, int line, const std::string& what) {
  throw std::invalid_argument(path + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot open " + path + " for writing");
  return out;
}

bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r") == std::string::npos;
}

// Strict base-10 integer; [begin,end) must be exactly one number.
long parse_int(const char* begin, const char* end, const std::string& path, int line) {
  long v = 0;
  auto [p, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || p != end)
    fail_at(path, line, "expected integer, got '" + std::string(begin, end) + "'");
  return v;
}

double parse_double(const char* begin, const char* end, const std::string& path, int line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || p != end)
    fail_at(path, line, "expected number, got '" + std::string(begin, end) + "'");
  return v;
}

// Shortest representation that parses back to the same double.
std::string fmt_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, p);
}

int node_in_range(long v, int num_nodes, const std::string& path, int line) {
  if (v < 0 || v >= num_nodes)
    fail_at(path, line, "node id " + std::to_string(v) + " out of range [0, " +
                            std::to_string(num_nodes) + ")");
  return static_cast<int>(v);
}

}  // namespace

std::vector<std::pair<int, int>> load_edge_list(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::pair<int, int>> edges;
  std::string s;
  int line = 0;
  while (std::getline(in, s)) {
    ++line;
    if (!s.empty() && s.back() == '\r') s.pop_back();
    if (blank(s) || s[0] == '#') continue;
    auto tab = s.find('\t');
    if (tab == std::string::npos) fail_at(path, line, "expected 'src<TAB>dst'");
    long src = parse_int(s.data(), s.data() + tab, path, line);
    long dst = parse_int(s.data() + tab + 1, s.data() + s.size(), path, line);
    if (src < 0 || dst < 0) fail_at(path, line, "negative node id");
    edges.emplace_back(static_cast<int>(src), static_cast<int>(dst));
  }
  return edges;
}

void write_edge_list(const std::string& path, std::span<const std::pair<int, int>> edges) {
  auto out = open_out(path);
  for (const auto& [src, dst] : edges) out << src << '\t' << dst << '\n';
}

Tensor load_features(const std::string& path) {
  auto in = open_in(path);
  std::string s;
  int line = 0;
  if (!std::getline(in, s)) fail_at(path, 1, "missing 'N P' header");
  ++line;
  if (!s.empty() && s.back() == '\r') s.pop_back();
  std::istringstream header(s);
  long n = -1, p = -1;
  std::string extra;
  if (!(header >> n >> p) || (header >> extra) || n < 0 || p < 0)
    fail_at(path, 1, "header must be 'N P'");
  Tensor x(static_cast<int>(n), static_cast<int>(p));
  for (long r = 0; r < n; ++r) {
    if (!std::getline(in, s)) fail_at(path, line + 1, "expected " + std::to_string(n) + " feature rows");
    ++line;
    if (!s.empty() && s.back() == '\r') s.pop_back();
    const char* cur = s.data();
    const char* end = s.data() + s.size();
    for (long c = 0; c < p; ++c) {
      while (cur != end && *cur == ' ') ++cur;
      const char* tok = cur;
      while (cur != end && *cur != ' ') ++cur;
      if (tok == cur) fail_at(path, line, "expected " + std::to_string(p) + " values");
      x.at(static_cast<int>(r), static_cast<int>(c)) = parse_double(tok, cur, path, line);
    }
    while (cur != end && *cur == ' ') ++cur;
    if (cur != end) fail_at(path, line, "trailing content after " + std::to_string(p) + " values");
  }
  while (std::getline(in, s)) {
    ++line;
    if (!blank(s)) fail_at(path, line, "trailing content after feature rows");
  }
  return x;
}

void write_features(const std::string& path, const Tensor& x) {
  auto out = open_out(path);
  out << x.rows << ' ' << x.cols << '\n';
  for (int r = 0; r < x.rows; ++r) {
    for (int c = 0; c < x.cols; ++c) {
      if (c > 0) out << ' ';
      out << fmt_double(x.at(r, c));
    }
    out << '\n';
  }
}

Labels load_labels(const std::string& path, Task task, int num_classes, int num_nodes) {
  if (num_classes <= 0) throw std::invalid_argument("num_classes must be positive");
  Labels labels;
  labels.task = task;
  labels.num_classes = num_classes;
  labels.class_index.assign(num_nodes, -1);
  labels.bits = Tensor::zeros(num_nodes, num_classes);
  labels.labeled.assign(num_nodes, 0);

  auto in = open_in(path);
  std::string s;
  int line = 0;
  while (std::getline(in, s)) {
    ++line;
    if (!s.empty() && s.back() == '\r') s.pop_back();
    if (blank(s) || s[0] == '#') continue;
    auto tab = s.find('\t');
    if (tab == std::string::npos) fail_at(path, line, "expected 'node<TAB>label'");
    int node = node_in_range(parse_int(s.data(), s.data() + tab, path, line), num_nodes, path, line);
    if (labels.labeled[node]) fail_at(path, line, "duplicate label for node " + std::to_string(node));
    labels.labeled[node] = 1;
    const char* cur = s.data() + tab + 1;
    const char* end = s.data() + s.size();
    if (task == Task::kMultiClass) {
      long cls = parse_int(cur, end, path, line);
      if (cls < 0 || cls >= num_classes)
        fail_at(path, line, "class " + std::to_string(cls) + " out of range [0, " +
                                std::to_string(num_classes) + ")");
      labels.class_index[node] = static_cast<int>(cls);
      labels.bits.at(node, static_cast<int>(cls)) = 1.0;
    } else {
      int c = 0;
      while (cur != end) {
        if (c >= num_classes) fail_at(path, line, "expected " + std::to_string(num_classes) + " bits");
        if (*cur != '0' && *cur != '1') fail_at(path, line, "label bits must be 0 or 1");
        labels.bits.at(node, c) = (*cur == '1') ? 1.0 : 0.0;
        ++cur;
        ++c;
        if (c < num_classes) {
          if (cur == end || *cur != ',') fail_at(path, line, "expected " + std::to_string(num_classes) + " comma-separated bits");
          ++cur;
        }
      }
      if (c != num_classes) fail_at(path, line, "expected " + std::to_string(num_classes) + " bits");
    }
  }
  return labels;
}

void write_labels(const std::string& path, const Labels& labels) {
  auto out = open_out(path);
  int n = static_cast<int>(labels.labeled.size());
  for (int node = 0; node < n; ++node) {
    if (!labels.labeled[node]) continue;
    out << node << '\t';
    if (labels.task == Task::kMultiClass) {
      out << labels.class_index[node];
    } else {
      for (int c = 0; c < labels.num_classes; ++c) {
        if (c > 0) out << ',';
        out << (labels.bits.at(node, c) != 0.0 ? '1' : '0');
      }
    }
    out << '\n';
  }
}

SplitMasks load_splits(const std::string& path, int num_nodes) {
  SplitMasks masks;
  masks.train.assign(num_nodes, 0);
  masks.val.assign(num_nodes, 0);
  masks.test.assign(num_nodes, 0);
  std::vector<std::uint8_t> seen(num_nodes, 0);

  auto in = open_in(path);
  std::string s;
  int line = 0;
  while (std::getline(in, s)) {
    ++line;
    if (!s.empty() && s.back() == '\r') s.pop_back();
    if (blank(s) || s[0] == '#') continue;
    auto tab = s.find('\t');
    if (tab == std::string::npos) fail_at(path, line, "expected 'node<TAB>split'");
    int node = node_in_range(parse_int(s.data(), s.data() + tab, path, line), num_nodes, path, line);
    if (seen[node]) fail_at(path, line, "node " + std::to_string(node) + " assigned to two splits");
    seen[node] = 1;
    std::string split = s.substr(tab + 1);
    if (split == "train") masks.train[node] = 1;
    else if (split == "val") masks.val[node] = 1;
    else if (split == "test") masks.test[node] = 1;
    else fail_at(path, line, "split must be train, val, or test, got '" + split + "'");
  }
  return masks;
}

void write_splits(const std::string& path, const SplitMasks& masks) {
  auto out = open_out(path);
  int n = static_cast<int>(masks.train.size());
  for (int node = 0; node < n; ++node) {
    if (masks.train[node]) out << node << "\ttrain\n";
    else if (masks.val[node]) out << node << "\tval\n";
    else if (masks.test[node]) out << node << "\ttest\n";
  }
}

Task parse_task(const std::string& s) {
  if (s == "multi-class") return Task::kMultiClass;
  if (s == "multi-label") return Task::kMultiLabel;
  throw std::invalid_argument("task must be 'multi-class' or 'multi-label', got '" + s + "'");
}

std::string task_name(Task t) { return t == Task::kMultiClass ? "multi-class" : "multi-label"; }

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find_if(known.begin(), known.end(),
                     [&](const char* k) { return key == k; }) == known.end())
      throw std::invalid_argument("unknown key '" + key + "' in " + where);
  }
}

void validate_block(const GraphBlock& block, int block_index) {
  const int n = block.graph.num_nodes;
  auto ctx = [&](const std::string& what) {
    return "block " + std::to_string(block_index) + ": " + what;
  };
  if (block.features.rows != n) throw std::invalid_argument(ctx("feature rows != num nodes"));
  if (static_cast<int>(block.masks.train.size()) != n)
    throw std::invalid_argument(ctx("mask size != num nodes"));
  for (int i = 0; i < n; ++i) {
    int in_splits = block.masks.train[i] + block.masks.val[i] + block.masks.test[i];
    if (in_splits > 1) throw std::invalid_argument(ctx("node in more than one split"));
    if (in_splits == 1 && !block.labels.labeled[i])
      throw std::invalid_argument(ctx("node " + std::to_string(i) + " is in a split but unlabeled"));
  }
}

}  // namespace

Dataset load_dataset(const std::string& manifest_path) {
  auto in = open_in(manifest_path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(manifest_path + ": " + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument(manifest_path + ": manifest must be a JSON object");
  reject_unknown_keys(doc, {"task", "num_classes", "blocks"}, manifest_path);
  if (!doc.contains("task") || !doc.contains("num_classes") || !doc.contains("blocks"))
    throw std::invalid_argument(manifest_path + ": manifest needs task, num_classes, blocks");

  Dataset data;
  data.task = parse_task(doc["task"].get<std::string>());
  data.num_classes = doc["num_classes"].get<int>();
  if (data.num_classes <= 0) throw std::invalid_argument(manifest_path + ": num_classes must be positive");
  if (!doc["blocks"].is_array() || doc["blocks"].empty())
    throw std::invalid_argument(manifest_path + ": blocks must be a non-empty array");

  auto base = std::filesystem::path(manifest_path).parent_path();
  auto resolve = [&](const json& b, const char* key) {
    if (!b.contains(key)) throw std::invalid_argument(manifest_path + ": block missing '" + key + "'");
    return (base / b[key].get<std::string>()).string();
  };

  int block_index = 0;
  for (const auto& b : doc["blocks"]) {
    reject_unknown_keys(b, {"edges", "features", "labels", "splits", "undirected"},
                        manifest_path + " block " + std::to_string(block_index));
    GraphBlock block;
    block.features = load_features(resolve(b, "features"));
    const int n = block.features.rows;
    bool undirected = b.value("undirected", true);
    auto edges = load_edge_list(resolve(b, "edges"));
    block.graph = build_graph(edges, n, undirected);
    block.labels = load_labels(resolve(b, "labels"), data.task, data.num_classes, n);
    block.masks = load_splits(resolve(b, "splits"), n);
    validate_block(block, block_index);
    if (block_index == 0) data.num_features = block.features.cols;
    else if (block.features.cols != data.num_features)
      throw std::invalid_argument(manifest_path + ": blocks disagree on feature width");
    data.blocks.push_back(std::move(block));
    ++block_index;
  }
  return data;
}

void write_dataset(const std::string& dir, const Dataset& data) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::invalid_argument("cannot create directory " + dir);

  json manifest;
  manifest["task"] = task_name(data.task);
  manifest["num_classes"] = data.num_classes;
  manifest["blocks"] = json::array();
  for (std::size_t i = 0; i < data.blocks.size(); ++i) {
    const auto& block = data.blocks[i];
    std::string tag = std::to_string(i);
    std::string edges = "edges_" + tag + ".tsv";
    std::string features = "features_" + tag + ".txt";
    std::string labels = "labels_" + tag + ".tsv";
    std::string splits = "splits_" + tag + ".tsv";

    // A mirrored graph stores both (u,v) and (v,u); dump each pair once and
    // mark the block undirected so loading rebuilds the same structure.
    std::vector<std::pair<int, int>> once;
    for (std::int64_t e = 0; e < block.graph.num_edges(); ++e) {
      int src = block.graph.edge_src[static_cast<std::size_t>(e)];
      int dst = block.graph.edge_dst[static_cast<std::size_t>(e)];
      if (src <= dst) once.emplace_back(src, dst);
    }
    write_edge_list((fs::path(dir) / edges).string(), once);
    write_features((fs::path(dir) / features).string(), block.features);
    write_labels((fs::path(dir) / labels).string(), block.labels);
    write_splits((fs::path(dir) / splits).string(), block.masks);

    json b;
    b["edges"] = edges;
    b["features"] = features;
    b["labels"] = labels;
    b["splits"] = splits;
    b["undirected"] = true;
    manifest["blocks"].push_back(b);
  }
  auto out = open_out((fs::path(dir) / "dataset.json").string());
  out << manifest.dump(2) << '\n';
}

// --- planted-path benchmark --------------------------------------------------

PlantedLayout planted_layout(const SynthSpec& spec) {
  if (spec.signal_hops < 1) throw std::invalid_argument("signal_hops must be >= 1");
  if (spec.hub_degree < 0) throw std::invalid_argument("hub_degree must be >= 0");
  if (spec.noise_std < 0) throw std::invalid_argument("noise_std must be >= 0");
  if (spec.num_graphs < 2) throw std::invalid_argument("need at least 2 graphs");
  int required = spec.signal_hops + 2 + spec.hub_degree;
  if (spec.nodes_per_graph < required)
    throw std::invalid_argument("nodes_per_graph must be >= " + std::to_string(required) +
                                " for signal_hops=" + std::to_string(spec.signal_hops) +
                                ", hub_degree=" + std::to_string(spec.hub_degree));
  PlantedLayout layout;
  layout.target = 0;
  layout.signal = spec.signal_hops;
  layout.hub = spec.signal_hops + 1;
  layout.first_satellite = spec.signal_hops + 2;
  layout.num_satellites = spec.nodes_per_graph - layout.first_satellite;
  layout.nodes_per_graph = spec.nodes_per_graph;
  return layout;
}

namespace {

// Edges of one planted graph, local node ids: a chain target..signal, a hub
// hanging off chain node 1, and noise satellites around the hub.
std::vector<std::pair<int, int>> planted_edges(const PlantedLayout& layout) {
  std::vector<std::pair<int, int>> edges;
  for (int t = 0; t < layout.signal; ++t) edges.emplace_back(t, t + 1);
  edges.emplace_back(1, layout.hub);
  for (int s = 0; s < layout.num_satellites; ++s)
    edges.emplace_back(layout.hub, layout.first_satellite + s);
  return edges;
}

GraphBlock planted_block(const SynthSpec& spec, const PlantedLayout& layout, int num_graphs,
                         bool is_train, std::mt19937_64& rng) {
  const int n = num_graphs * layout.nodes_per_graph;
  GraphBlock block;
  block.features = Tensor::zeros(n, kPlantedFeatureDim);
  block.labels.task = Task::kMultiClass;
  block.labels.num_classes = 2;
  block.labels.class_index.assign(n, -1);
  block.labels.bits = Tensor::zeros(n, 2);
  block.labels.labeled.assign(n, 0);
  block.masks.train.assign(n, 0);
  block.masks.val.assign(n, 0);
  block.masks.test.assign(n, 0);

  auto local_edges = planted_edges(layout);
  std::vector<std::pair<int, int>> edges;
  edges.reserve(local_edges.size() * static_cast<std::size_t>(num_graphs));

  std::normal_distribution<double> noise(0.0, spec.noise_std > 0 ? spec.noise_std : 1.0);
  for (int g = 0; g < num_graphs; ++g) {
    const int base = g * layout.nodes_per_graph;
    for (const auto& [u, v] : local_edges) edges.emplace_back(base + u, base + v);
    if (spec.noise_std > 0) {
      for (int i = 0; i < layout.nodes_per_graph; ++i)
        for (int c = 0; c < kPlantedFeatureDim; ++c)
          block.features.at(base + i, c) = noise(rng);
    }
    // Alternating sign keeps each split exactly balanced.
    const bool positive = (g % 2 == 0);
    block.features.at(base + layout.signal, kPlantedSignalChannel) =
        positive ? kPlantedSignalMagnitude : -kPlantedSignalMagnitude;
    const int target = base + layout.target;
    block.labels.class_index[target] = positive ? 1 : 0;
    block.labels.bits.at(target, positive ? 1 : 0) = 1.0;
    block.labels.labeled[target] = 1;
    (is_train ? block.masks.train : block.masks.test)[target] = 1;
  }
  block.graph = build_graph(edges, n, /*undirected=*/true);
  return block;
}

}  // namespace

Dataset gen_planted_path(const SynthSpec& spec) {
  PlantedLayout layout = planted_layout(spec);
  int train_graphs = (2 * spec.num_graphs) / 3;
  if (train_graphs < 1) train_graphs = 1;
  int test_graphs = spec.num_graphs - train_graphs;
  if (test_graphs < 1) throw std::invalid_argument("num_graphs leaves no test graphs");

  std::mt19937_64 rng(spec.seed);
  Dataset data;
  data.task = Task::kMultiClass;
  data.num_classes = 2;
  data.num_features = kPlantedFeatureDim;
  data.blocks.push_back(planted_block(spec, layout, train_graphs, /*is_train=*/true, rng));
  data.blocks.push_back(planted_block(spec, layout, test_graphs, /*is_train=*/false, rng));
  return data;
}

}  // namespace genie
