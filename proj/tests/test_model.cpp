#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "genie/checkpoint.hpp"
#include "genie/dataset.hpp"
#include "genie/gradcheck.hpp"
#include "genie/graph.hpp"
#include "genie/model.hpp"
#include "genie/optim.hpp"
#include "genie/metrics.hpp"
#include "genie/tape.hpp"
#include "genie/train.hpp"

using genie::Dataset;
using genie::Graph;
using genie::GraphBlock;
using genie::Labels;
using genie::Model;
using genie::ModelConfig;
using genie::Tape;
using genie::Task;
using genie::Tensor;
using genie::Variant;

namespace {

using Edges = std::vector<std::pair<int, int>>;
using ParamMap = std::map<std::string, Tensor>;

Tensor random_tensor(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(rows, cols);
  for (auto& x : t.data) x = u(rng);
  return t;
}

Graph random_graph(int num_nodes, int num_pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, num_nodes - 1);
  Edges edges;
  std::vector<std::vector<bool>> seen(num_nodes, std::vector<bool>(num_nodes, false));
  while (static_cast<int>(edges.size()) < num_pairs) {
    int a = pick(rng), b = pick(rng);
    if (a == b || seen[a][b]) continue;
    seen[a][b] = seen[b][a] = true;
    edges.emplace_back(a, b);
  }
  return genie::build_graph(edges, num_nodes, true);
}

// Overwrites every parameter with fresh random values (attention vectors
// included, so attention is non-uniform in oracle comparisons).
void randomize_params(Model& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  for (auto& ref : model.params())
    for (auto& x : ref.tensor->data) x = u(rng);
}

ParamMap state_map(const Model& model) {
  ParamMap out;
  for (const auto& [name, value] : model.state()) out.emplace(name, value);
  return out;
}

std::string layer_key(int t, const char* leaf) {
  return "layer" + std::to_string(t) + "." + std::string(leaf);
}

// ---- plain-double reference math (no tape) ----------------------------------

Tensor dmm(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows, b.cols);
  for (int r = 0; r < a.rows; ++r)
    for (int k = 0; k < a.cols; ++k) {
      const double av = a.at(r, k);
      for (int c = 0; c < b.cols; ++c) out.at(r, c) += av * b.at(k, c);
    }
  return out;
}

Tensor dmap(Tensor t, double (*f)(double)) {
  for (auto& x : t.data) x = f(x);
  return t;
}

double sigmoid_scalar(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Tensor dmul(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Tensor dadd(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Tensor dconcat(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows, a.cols + b.cols);
  for (int r = 0; r < a.rows; ++r) {
    for (int c = 0; c < a.cols; ++c) out.at(r, c) = a.at(r, c);
    for (int c = 0; c < b.cols; ++c) out.at(r, a.cols + c) = b.at(r, c);
  }
  return out;
}

double dense_raw_score(const Tensor& h, const Tensor& ws, const Tensor& wd, const Tensor& v, int src,
                       int dst) {
  double score = 0.0;
  for (int c = 0; c < h.cols; ++c) {
    double pre = 0.0;
    for (int m = 0; m < h.cols; ++m) pre += h.at(dst, m) * ws.at(m, c) + h.at(src, m) * wd.at(m, c);
    score += std::tanh(pre) * v.at(c, 0);
  }
  return score;
}

// One dense breadth step: softmax-weighted neighbor mix, then tanh(. W).
Tensor dense_breadth(const Graph& g, const Tensor& h, const Tensor& w, const Tensor& ws, const Tensor& wd,
                     const Tensor& v) {
  Tensor agg(h.rows, h.cols);
  for (int i = 0; i < g.num_nodes; ++i) {
    const auto lo = g.first_in_edge(i);
    const auto hi = lo + g.in_degree(i);
    double max_score = -1e300;
    for (auto e = lo; e < hi; ++e)
      max_score = std::max(max_score, dense_raw_score(h, ws, wd, v, g.edge_src[e], i));
    double denom = 0.0;
    std::vector<double> alpha(hi - lo);
    for (auto e = lo; e < hi; ++e) {
      alpha[e - lo] = std::exp(dense_raw_score(h, ws, wd, v, g.edge_src[e], i) - max_score);
      denom += alpha[e - lo];
    }
    for (auto e = lo; e < hi; ++e)
      for (int c = 0; c < h.cols; ++c) agg.at(i, c) += alpha[e - lo] / denom * h.at(g.edge_src[e], c);
  }
  return dmap(dmm(agg, w), std::tanh);
}

Tensor dense_forward_geniepath(const Graph& looped, const Tensor& x, const ParamMap& p, int depth) {
  Tensor h = dmm(x, p.at("embed.Wx"));
  Tensor c = Tensor::zeros(h.rows, h.cols);
  for (int t = 0; t < depth; ++t) {
    const Tensor h_tmp = dense_breadth(looped, h, p.at(layer_key(t, "W")), p.at(layer_key(t, "Ws")),
                                       p.at(layer_key(t, "Wd")), p.at(layer_key(t, "v")));
    const Tensor gi = dmap(dmm(h_tmp, p.at(layer_key(t, "Wi"))), sigmoid_scalar);
    const Tensor gf = dmap(dmm(h_tmp, p.at(layer_key(t, "Wf"))), sigmoid_scalar);
    const Tensor go = dmap(dmm(h_tmp, p.at(layer_key(t, "Wo"))), sigmoid_scalar);
    const Tensor cc = dmap(dmm(h_tmp, p.at(layer_key(t, "Wc"))), std::tanh);
    c = dadd(dmul(gf, c), dmul(gi, cc));
    h = dmul(go, dmap(c, std::tanh));
  }
  return dmm(h, p.at("classifier.W"));
}

Tensor dense_forward_lazy(const Graph& looped, const Tensor& x, const ParamMap& p, int depth) {
  const Tensor h0 = dmm(x, p.at("embed.Wx"));
  std::vector<Tensor> stack{h0};
  for (int t = 0; t < depth; ++t)
    stack.push_back(dense_breadth(looped, stack.back(), p.at(layer_key(t, "W")), p.at(layer_key(t, "Ws")),
                                  p.at(layer_key(t, "Wd")), p.at(layer_key(t, "v"))));
  Tensor mu = h0;
  Tensor c = Tensor::zeros(h0.rows, h0.cols);
  for (int t = 0; t < depth; ++t) {
    const Tensor z = dconcat(stack[t + 1], mu);
    const Tensor gi = dmap(dmm(z, p.at(layer_key(t, "Wi"))), sigmoid_scalar);
    const Tensor gf = dmap(dmm(z, p.at(layer_key(t, "Wf"))), sigmoid_scalar);
    const Tensor go = dmap(dmm(z, p.at(layer_key(t, "Wo"))), sigmoid_scalar);
    const Tensor cc = dmap(dmm(z, p.at(layer_key(t, "Wc"))), std::tanh);
    c = dadd(dmul(gf, c), dmul(gi, cc));
    mu = dmul(go, dmap(c, std::tanh));
  }
  return dmm(mu, p.at("classifier.W"));
}

// ---- dataset fixtures --------------------------------------------------------

// Single block of isolated nodes whose class is the sign of feature 0;
// margin 0.5 keeps the task linearly separable.
Dataset separable_dataset(int n_train, int n_val, int n_test, std::uint64_t seed) {
  const int n = n_train + n_val + n_test;
  GraphBlock block;
  block.graph = genie::build_graph(Edges{}, n, true);
  block.features = Tensor(n, 2);
  block.labels.task = Task::kMultiClass;
  block.labels.num_classes = 2;
  block.labels.class_index.assign(n, -1);
  block.labels.labeled.assign(n, 1);
  block.labels.bits = Tensor::zeros(n, 2);
  block.masks.train.assign(n, 0);
  block.masks.val.assign(n, 0);
  block.masks.test.assign(n, 0);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mag(0.5, 1.5);
  std::uniform_real_distribution<double> noise(-0.25, 0.25);
  for (int i = 0; i < n; ++i) {
    const int cls = i % 2;
    block.features.at(i, 0) = (cls == 1 ? 1.0 : -1.0) * mag(rng);
    block.features.at(i, 1) = noise(rng);
    block.labels.class_index[i] = cls;
    block.labels.bits.at(i, cls) = 1.0;
    if (i < n_train) block.masks.train[i] = 1;
    else if (i < n_train + n_val) block.masks.val[i] = 1;
    else block.masks.test[i] = 1;
  }

  Dataset data;
  data.task = Task::kMultiClass;
  data.num_classes = 2;
  data.num_features = 2;
  data.blocks.push_back(std::move(block));
  return data;
}

Labels make_labels(Task task, int num_classes, const std::vector<int>& classes) {
  Labels l;
  l.task = task;
  l.num_classes = num_classes;
  l.class_index = classes;
  l.labeled.assign(classes.size(), 1);
  l.bits = Tensor::zeros(static_cast<int>(classes.size()), num_classes);
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i] >= 0) l.bits.at(static_cast<int>(i), classes[i]) = 1.0;
  return l;
}

double history_value(const genie::TrainResult& r, int epoch, genie::Split split, const std::string& metric) {
  for (const auto& rec : r.history)
    if (rec.epoch == epoch && rec.split == split && rec.metric == metric) return rec.value;
  FAIL("missing history record");
  return 0.0;
}

std::filesystem::path temp_file(const std::string& stem) {
  return std::filesystem::temp_directory_path() / (stem + "-" + std::to_string(::getpid()) + ".bin");
}

}  // namespace

TEST_CASE("name round-trips for variants, residuals, tasks") {
  for (auto v : {Variant::kGeniePath, Variant::kGeniePathLazy, Variant::kGcn, Variant::kGcnMean,
                 Variant::kBreadthOnly})
    CHECK(genie::parse_variant(genie::variant_name(v)) == v);
  for (auto r : {genie::Residual::kNone, genie::Residual::kAdd, genie::Residual::kConcat})
    CHECK(genie::parse_residual(genie::residual_name(r)) == r);
  for (auto t : {Task::kMultiClass, Task::kMultiLabel}) CHECK(genie::parse_task(genie::task_name(t)) == t);
  CHECK_THROWS_AS(genie::parse_variant("bogus"), std::invalid_argument);
  CHECK_THROWS_AS(genie::parse_residual("bogus"), std::invalid_argument);
  CHECK_THROWS_AS(genie::parse_task("bogus"), std::invalid_argument);
}

TEST_CASE("model construction validates its configuration") {
  ModelConfig cfg;
  CHECK_NOTHROW(Model(cfg, 3, 2));
  ModelConfig bad = cfg;
  bad.depth = 0;
  CHECK_THROWS_AS(Model(bad, 3, 2), std::invalid_argument);
  bad = cfg;
  bad.hidden = 0;
  CHECK_THROWS_AS(Model(bad, 3, 2), std::invalid_argument);
  bad = cfg;
  bad.lr = 0.0;
  CHECK_THROWS_AS(Model(bad, 3, 2), std::invalid_argument);
  bad = cfg;
  bad.epochs = -1;
  CHECK_THROWS_AS(Model(bad, 3, 2), std::invalid_argument);
  CHECK_THROWS_AS(Model(cfg, 0, 2), std::invalid_argument);
  CHECK_THROWS_AS(Model(cfg, 3, 0), std::invalid_argument);
}

TEST_CASE("parameter names are unique and the l2 flag marks only matrices") {
  ModelConfig cfg;
  cfg.variant = Variant::kGeniePath;
  cfg.depth = 2;
  cfg.hidden = 3;
  cfg.bias = true;
  cfg.residual = genie::Residual::kConcat;
  Model model(cfg, 4, 2);
  auto refs = model.params();
  std::map<std::string, bool> seen;
  for (const auto& r : refs) {
    CHECK_FALSE(seen.count(r.name));
    seen[r.name] = true;
  }
  std::map<std::string, bool> l2;
  for (const auto& r : refs) l2[r.name] = r.weight_matrix;
  CHECK(l2.at("embed.Wx"));
  CHECK(l2.at("classifier.W"));
  CHECK(l2.at("layer0.Wr"));
  CHECK_FALSE(l2.at("layer0.v"));
  CHECK_FALSE(l2.at("embed.b"));
  CHECK_FALSE(l2.at("layer1.bi"));
  // state() preserves params() order.
  auto st = model.state();
  REQUIRE(st.size() == refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) CHECK(st[i].first == refs[i].name);
}

TEST_CASE("all-zero parameters yield all-zero logits") {
  ModelConfig cfg;
  cfg.depth = 1;
  cfg.hidden = 3;
  Model model(cfg, 2, 3);
  for (auto& ref : model.params()) std::fill(ref.tensor->data.begin(), ref.tensor->data.end(), 0.0);
  const Graph g = random_graph(5, 6, 1);
  Tape tape;
  const Tensor logits = model.forward(tape, model.prepare(g), random_tensor(5, 2, 2));
  CHECK(logits.rows == 5);
  CHECK(logits.cols == 3);
  for (double v : logits.data) CHECK(v == 0.0);
}

TEST_CASE("full forward matches the dense oracle") {
  const int n = 8, p = 3, k = 4, t = 2, c = 3;
  const Graph raw = random_graph(n, 14, 10);
  const Tensor x = random_tensor(n, p, 11);

  for (auto variant : {Variant::kGeniePath, Variant::kGeniePathLazy}) {
    CAPTURE(genie::variant_name(variant));
    ModelConfig cfg;
    cfg.variant = variant;
    cfg.depth = t;
    cfg.hidden = k;
    Model model(cfg, p, c);
    randomize_params(model, 12);
    const ParamMap params = state_map(model);
    const genie::PreparedGraph pg = model.prepare(raw);

    Tape tape;
    const Tensor logits = model.forward(tape, pg, x);
    const Tensor expected = variant == Variant::kGeniePath
                                ? dense_forward_geniepath(pg.looped, x, params, t)
                                : dense_forward_lazy(pg.looped, x, params, t);
    CHECK(genie::max_abs_diff(logits, expected) <= 1e-9);
  }
}

TEST_CASE("every variant and residual mode produces well-formed logits") {
  const Graph raw = random_graph(6, 8, 20);
  const Tensor x = random_tensor(6, 3, 21);
  for (auto variant : {Variant::kGeniePath, Variant::kGeniePathLazy, Variant::kGcn, Variant::kGcnMean,
                       Variant::kBreadthOnly})
    for (auto residual : {genie::Residual::kNone, genie::Residual::kAdd, genie::Residual::kConcat})
      for (bool bias : {false, true}) {
        CAPTURE(genie::variant_name(variant));
        CAPTURE(genie::residual_name(residual));
        CAPTURE(bias);
        ModelConfig cfg;
        cfg.variant = variant;
        cfg.residual = residual;
        cfg.bias = bias;
        cfg.depth = 2;
        cfg.hidden = 4;
        Model model(cfg, 3, 2);
        Tape tape;
        const Tensor logits = model.forward(tape, model.prepare(raw), x);
        CHECK(logits.rows == 6);
        CHECK(logits.cols == 2);
        for (double v : logits.data) CHECK(std::isfinite(v));
      }
}

TEST_CASE("forward rejects mismatched inputs") {
  ModelConfig cfg;
  Model model(cfg, 3, 2);
  const Graph raw = random_graph(4, 4, 30);
  const genie::PreparedGraph pg = model.prepare(raw);
  Tape tape;
  CHECK_THROWS_AS(model.forward(tape, pg, random_tensor(5, 3, 31)), std::invalid_argument);  // wrong rows
  CHECK_THROWS_AS(model.forward(tape, pg, random_tensor(4, 2, 32)), std::invalid_argument);  // wrong width
  genie::PreparedGraph unlooped;
  unlooped.looped = raw;
  CHECK_THROWS_AS(model.forward(tape, unlooped, random_tensor(4, 3, 33)), std::invalid_argument);
}

TEST_CASE("prepare fills adjacency weights only for convolution variants") {
  const Graph raw = random_graph(5, 6, 35);
  ModelConfig cfg;
  cfg.variant = Variant::kGcnMean;
  Model mean_model(cfg, 2, 2);
  const genie::PreparedGraph pg = mean_model.prepare(raw);
  CHECK(pg.looped.has_self_loops);
  REQUIRE(static_cast<std::int64_t>(pg.adj.edge_weight.size()) == pg.looped.num_edges());
  for (int i = 0; i < pg.looped.num_nodes; ++i) {
    double sum = 0.0;
    for (auto e = pg.looped.first_in_edge(i); e < pg.looped.first_in_edge(i) + pg.looped.in_degree(i); ++e)
      sum += pg.adj.edge_weight[e];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  cfg.variant = Variant::kGeniePath;
  Model attn_model(cfg, 2, 2);
  CHECK(attn_model.prepare(raw).adj.edge_weight.empty());
}

TEST_CASE("masked loss: uniform value, l2 add-on, empty mask") {
  Tape tape;
  const Tensor logits = tape.leaf(Tensor::zeros(3, 4));
  const Labels labels = make_labels(Task::kMultiClass, 4, {0, 1, 2});
  const std::vector<std::uint8_t> mask = {1, 1, 1};
  const Tensor plain = genie::masked_loss(tape, logits, labels, mask, 0.0, {});
  CHECK(plain.at(0, 0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  const Tensor w1 = tape.leaf(Tensor::from({{1, 2}}));   // squares sum to 5
  const Tensor w2 = tape.leaf(Tensor::from({{3}, {1}})); // squares sum to 10
  const std::vector<Tensor> terms = {w1, w2};
  const Tensor with_l2 = genie::masked_loss(tape, logits, labels, mask, 0.01, terms);
  CHECK(with_l2.at(0, 0) - plain.at(0, 0) == doctest::Approx(0.15).epsilon(1e-12));

  CHECK_THROWS_AS(genie::masked_loss(tape, logits, labels, std::vector<std::uint8_t>{0, 0, 0}, 0.0, {}),
                  std::invalid_argument);
}

TEST_CASE("end-to-end gradients agree with finite differences") {
  const int n = 6, p = 3, k = 3, c = 2;
  const Graph raw = random_graph(n, 8, 40);
  const genie::Graph* raw_ptr = &raw;
  const Tensor x = random_tensor(n, p, 41);
  const std::vector<std::uint8_t> mask = {1, 1, 0, 1, 1, 1};

  for (auto variant : {Variant::kGeniePath, Variant::kGeniePathLazy})
    for (auto task : {Task::kMultiClass, Task::kMultiLabel}) {
      CAPTURE(genie::variant_name(variant));
      CAPTURE(genie::task_name(task));
      ModelConfig cfg;
      cfg.variant = variant;
      cfg.depth = 2;
      cfg.hidden = k;
      cfg.task = task;
      Model model(cfg, p, c);
      randomize_params(model, 42);
      const genie::PreparedGraph pg = model.prepare(*raw_ptr);
      const Labels labels = make_labels(task, c, {0, 1, 0, 1, 0, 1});

      auto refs = model.params();
      std::vector<genie::NamedParam> params;
      for (auto& r : refs) params.push_back({r.name, r.tensor});
      auto f = [&](std::vector<Tensor>* grads) {
        Tape tape;
        std::vector<Tensor> bound;
        const Tensor logits = model.forward(tape, pg, x, &bound);
        std::vector<Tensor> l2_terms;
        for (std::size_t i = 0; i < refs.size(); ++i)
          if (refs[i].weight_matrix) l2_terms.push_back(bound[i]);
        const Tensor loss = genie::masked_loss(tape, logits, labels, mask, 1e-3, l2_terms);
        if (grads) {
          tape.backward(loss);
          grads->clear();
          for (const Tensor& b : bound) grads->push_back(tape.grad(b));
        }
        return loss.at(0, 0);
      };
      const auto res = genie::grad_check(f, params, 1e-6);
      CAPTURE(res.worst_param);
      CHECK(res.max_rel_error < 1e-5);
    }
}

TEST_CASE("adam: zero gradients leave parameters untouched") {
  Tensor p = random_tensor(2, 2, 50);
  const Tensor before = p;
  std::vector<genie::ParamRef> refs = {{"p", &p, true}};
  genie::Adam adam(genie::AdamConfig{});
  for (int i = 0; i < 3; ++i) adam.step(refs, {Tensor::zeros(2, 2)});
  CHECK(genie::max_abs_diff(p, before) == 0.0);
  CHECK(adam.steps_taken() == 3);
}

TEST_CASE("adam: first step matches the bias-corrected closed form") {
  Tensor p = Tensor::from({{1.0}});
  std::vector<genie::ParamRef> refs = {{"p", &p, true}};
  genie::AdamConfig cfg;
  cfg.lr = 0.1;
  genie::Adam adam(cfg);
  adam.step(refs, {Tensor::from({{2.0}})});
  // m_hat = g, v_hat = g^2 after one step, so p -= lr * g / (|g| + eps).
  const double expected = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
  CHECK(p.at(0, 0) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("adam: three-step scalar trace matches a hand-rolled loop") {
  Tensor p = Tensor::from({{0.5}});
  std::vector<genie::ParamRef> refs = {{"p", &p, true}};
  genie::AdamConfig cfg;
  cfg.lr = 0.05;
  genie::Adam adam(cfg);

  double ref = 0.5, m = 0.0, v = 0.0;
  const double grads[3] = {1.0, -2.0, 0.5};
  for (int t = 1; t <= 3; ++t) {
    const double g = grads[t - 1];
    adam.step(refs, {Tensor::from({{g}})});
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double m_hat = m / (1.0 - std::pow(0.9, t));
    const double v_hat = v / (1.0 - std::pow(0.999, t));
    ref -= 0.05 * m_hat / (std::sqrt(v_hat) + 1e-8);
    CHECK(p.at(0, 0) == doctest::Approx(ref).epsilon(1e-15));
  }
}

TEST_CASE("adam rejects misaligned or non-finite gradients") {
  Tensor p = Tensor::from({{1.0}});
  std::vector<genie::ParamRef> refs = {{"theta", &p, true}};
  genie::Adam adam(genie::AdamConfig{});
  CHECK_THROWS_AS(adam.step(refs, {}), std::invalid_argument);
  CHECK_THROWS_AS(adam.step(refs, {Tensor::zeros(2, 1)}), std::invalid_argument);
  try {
    adam.step(refs, {Tensor::from({{std::numeric_limits<double>::quiet_NaN()}})});
    FAIL("expected a throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("theta") != std::string::npos);
  }
}

TEST_CASE("metric accumulator fixtures") {
  SUBCASE("perfect and inverted multi-class predictions") {
    const Labels labels = make_labels(Task::kMultiClass, 2, {0, 1, 0});
    const std::vector<std::uint8_t> mask = {1, 1, 1};
    genie::MetricAccumulator good(2);
    good.add(Tensor::from({{5, 0}, {0, 5}, {5, 0}}), labels, mask, 0.25);
    const genie::Metrics gm = good.finalize();
    CHECK(gm.accuracy == 1.0);
    CHECK(gm.micro_f1 == 1.0);
    CHECK(gm.macro_f1 == 1.0);
    CHECK(gm.loss == doctest::Approx(0.25));
    CHECK(gm.count == 3);

    genie::MetricAccumulator bad(2);
    bad.add(Tensor::from({{0, 5}, {5, 0}, {0, 5}}), labels, mask, 1.0);
    CHECK(bad.finalize().accuracy == 0.0);
  }

  SUBCASE("one hit one miss gives micro-F1 one half") {
    const Labels labels = make_labels(Task::kMultiClass, 2, {0, 0});
    genie::MetricAccumulator acc(2);
    acc.add(Tensor::from({{3, 0}, {0, 3}}), labels, std::vector<std::uint8_t>{1, 1}, 0.0);
    const genie::Metrics m = acc.finalize();
    CHECK(m.accuracy == 0.5);
    CHECK(m.micro_f1 == 0.5);  // tp=1, fp=1, fn=1
  }

  SUBCASE("argmax ties resolve to the lowest class") {
    const Labels zero = make_labels(Task::kMultiClass, 3, {0});
    genie::MetricAccumulator acc(3);
    acc.add(Tensor::zeros(1, 3), zero, std::vector<std::uint8_t>{1}, 0.0);
    CHECK(acc.finalize().accuracy == 1.0);  // tie -> class 0 -> correct

    const Labels two = make_labels(Task::kMultiClass, 3, {2});
    genie::MetricAccumulator acc2(3);
    acc2.add(Tensor::zeros(1, 3), two, std::vector<std::uint8_t>{1}, 0.0);
    CHECK(acc2.finalize().accuracy == 0.0);
  }

  SUBCASE("multi-label thresholds the logit at zero and scores exact match") {
    Labels labels;
    labels.task = Task::kMultiLabel;
    labels.num_classes = 2;
    labels.class_index = {-1, -1};
    labels.labeled = {1, 1};
    labels.bits = Tensor::from({{1, 1}, {0, 0}});
    genie::MetricAccumulator acc(2);
    // Row 0 predicts (1, 0): tp + fn. Row 1 predicts (1, 0): fp.
    acc.add(Tensor::from({{0.2, -0.2}, {0.2, -0.2}}), labels, std::vector<std::uint8_t>{1, 1}, 0.0);
    const genie::Metrics m = acc.finalize();
    CHECK(m.accuracy == 0.0);       // neither row matches exactly
    CHECK(m.micro_f1 == 0.5);       // tp=1, fp=1, fn=1
    CHECK(m.macro_f1 == doctest::Approx(0.5 * (2.0 / 3.0)));  // class0 f1=2/3, class1 f1=0
    // Boundary: logit exactly 0 counts as positive.
    genie::MetricAccumulator edge(2);
    Labels ones;
    ones.task = Task::kMultiLabel;
    ones.num_classes = 2;
    ones.class_index = {-1};
    ones.labeled = {1};
    ones.bits = Tensor::from({{1, 1}});
    edge.add(Tensor::zeros(1, 2), ones, std::vector<std::uint8_t>{1}, 0.0);
    CHECK(edge.finalize().accuracy == 1.0);
  }

  SUBCASE("pooling across blocks weighs every node equally") {
    const Labels a = make_labels(Task::kMultiClass, 2, {0});
    const Labels b = make_labels(Task::kMultiClass, 2, {1, 1, 1});
    genie::MetricAccumulator acc(2);
    acc.add(Tensor::from({{5, 0}}), a, std::vector<std::uint8_t>{1}, 2.0);
    acc.add(Tensor::from({{5, 0}, {0, 5}, {0, 5}}), b, std::vector<std::uint8_t>{1, 1, 1}, 1.0);
    const genie::Metrics m = acc.finalize();
    CHECK(m.count == 4);
    CHECK(m.accuracy == doctest::Approx(0.75));
    CHECK(m.loss == doctest::Approx((2.0 * 1 + 1.0 * 3) / 4.0));
  }

  SUBCASE("no rows means zeroed metrics") {
    genie::MetricAccumulator acc(2);
    const genie::Metrics m = acc.finalize();
    CHECK(m.count == 0);
    CHECK(m.accuracy == 0.0);
    CHECK(m.loss == 0.0);
  }
}

TEST_CASE("training learns a separable task and logs a falling loss") {
  Dataset data = separable_dataset(24, 0, 8, 60);
  ModelConfig cfg;
  cfg.variant = Variant::kGeniePath;
  cfg.depth = 1;
  cfg.hidden = 4;
  cfg.lr = 0.05;
  cfg.epochs = 200;
  cfg.seed = 3;
  Model model(cfg, 2, 2);
  const genie::TrainResult result = genie::train(model, data);
  CHECK(result.epochs_run == 200);
  CHECK_FALSE(result.stopped_early);

  const genie::Metrics train_m = genie::evaluate(model, data, genie::Split::kTrain);
  CHECK(train_m.accuracy >= 0.99);
  const genie::Metrics test_m = genie::evaluate(model, data, genie::Split::kTest);
  CHECK(test_m.accuracy >= 0.99);

  CHECK(history_value(result, 10, genie::Split::kTrain, "loss") <
        history_value(result, 1, genie::Split::kTrain, "loss"));
}

TEST_CASE("zero-epoch training returns untouched parameters and no history") {
  Dataset data = separable_dataset(10, 0, 0, 61);
  ModelConfig cfg;
  cfg.epochs = 0;
  cfg.depth = 1;
  cfg.hidden = 3;
  Model model(cfg, 2, 2);
  const auto before = model.state();
  const genie::TrainResult result = genie::train(model, data);
  CHECK(result.epochs_run == 0);
  CHECK(result.history.empty());
  const auto after = model.state();
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].second.data == after[i].second.data);
}

TEST_CASE("training is deterministic in the seed") {
  auto run = [](std::uint64_t seed) {
    Dataset data = separable_dataset(16, 0, 4, 62);
    ModelConfig cfg;
    cfg.depth = 1;
    cfg.hidden = 3;
    cfg.lr = 0.05;
    cfg.epochs = 20;
    cfg.seed = seed;
    Model model(cfg, 2, 2);
    const genie::TrainResult r = genie::train(model, data);
    std::vector<double> history;
    for (const auto& rec : r.history) history.push_back(rec.value);
    std::vector<double> flat;
    for (const auto& [name, t] : model.state()) flat.insert(flat.end(), t.data.begin(), t.data.end());
    return std::make_pair(history, flat);
  };
  const auto a = run(7);
  const auto b = run(7);
  CHECK(a.first == b.first);    // bit-identical metric history
  CHECK(a.second == b.second);  // bit-identical parameters
  const auto c = run(8);
  CHECK(a.second != c.second);
}

TEST_CASE("duplicating a block leaves the training trajectory unchanged") {
  // Pooled gradients weight each block by its train-node share, so two
  // copies of one block must train exactly like the single block.
  Dataset one = separable_dataset(12, 0, 4, 63);
  Dataset two = one;
  two.blocks.push_back(one.blocks[0]);
  auto run = [](Dataset& data) {
    ModelConfig cfg;
    cfg.depth = 1;
    cfg.hidden = 3;
    cfg.lr = 0.05;
    cfg.epochs = 15;
    Model model(cfg, 2, 2);
    const genie::TrainResult r = genie::train(model, data);
    std::vector<double> flat;
    for (const auto& [name, t] : model.state()) flat.insert(flat.end(), t.data.begin(), t.data.end());
    return std::make_pair(r.history, flat);
  };
  const auto a = run(one);
  const auto b = run(two);
  CHECK(a.second == b.second);
  REQUIRE(a.first.size() == b.first.size());
  for (std::size_t i = 0; i < a.first.size(); ++i) CHECK(a.first[i].value == b.first[i].value);
}

TEST_CASE("early stopping restores the best validation epoch") {
  Dataset data = separable_dataset(16, 8, 8, 64);
  ModelConfig cfg;
  cfg.depth = 1;
  cfg.hidden = 4;
  cfg.lr = 0.05;
  cfg.epochs = 400;
  cfg.patience = 8;
  Model model(cfg, 2, 2);
  const genie::TrainResult result = genie::train(model, data);

  CHECK(result.stopped_early);
  CHECK(result.epochs_run < 400);
  CHECK(result.epochs_run == result.best_epoch + cfg.patience);

  // The restored parameters reproduce the recorded best-epoch validation
  // metrics bit-for-bit.
  const genie::Metrics val = genie::evaluate(model, data, genie::Split::kVal);
  CHECK(val.accuracy == history_value(result, result.best_epoch, genie::Split::kVal, "accuracy"));
  CHECK(val.loss == history_value(result, result.best_epoch, genie::Split::kVal, "loss"));
  double best_seen = 0.0;
  for (const auto& rec : result.history)
    if (rec.split == genie::Split::kVal && rec.metric == "accuracy") best_seen = std::max(best_seen, rec.value);
  CHECK(val.accuracy == best_seen);
}

TEST_CASE("training without val keeps the final epoch") {
  Dataset data = separable_dataset(12, 0, 4, 65);
  ModelConfig cfg;
  cfg.depth = 1;
  cfg.hidden = 3;
  cfg.epochs = 30;
  cfg.patience = 2;  // irrelevant without validation nodes
  Model model(cfg, 2, 2);
  const genie::TrainResult r = genie::train(model, data);
  CHECK(r.epochs_run == 30);
  CHECK(r.best_epoch == 30);
  CHECK_FALSE(r.stopped_early);
  // History carries train records only.
  for (const auto& rec : r.history) CHECK(rec.split == genie::Split::kTrain);
}

TEST_CASE("numeric failure reports the epoch") {
  Dataset data = separable_dataset(8, 0, 0, 66);
  // Feature 0 of node 0 at 4.0 times an embedding weight of 1e308
  // overflows the very first matmul.
  data.blocks[0].features.at(0, 0) = 4.0;
  ModelConfig cfg;
  cfg.depth = 1;
  cfg.hidden = 2;
  cfg.epochs = 5;
  Model model(cfg, 2, 2);
  auto state = model.state();
  for (auto& [name, t] : state)
    if (name == "embed.Wx") std::fill(t.data.begin(), t.data.end(), 1e308);
  model.load_state(state);
  try {
    genie::train(model, data);
    FAIL("expected a throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("diverged at epoch 1") != std::string::npos);
  }
}

TEST_CASE("train and evaluate reject incompatible datasets") {
  Dataset data = separable_dataset(8, 0, 0, 67);
  ModelConfig cfg;
  cfg.depth = 1;
  cfg.hidden = 2;
  SUBCASE("wrong class count") {
    Model model(cfg, 2, 3);
    CHECK_THROWS_AS(genie::train(model, data), std::invalid_argument);
  }
  SUBCASE("wrong feature width") {
    Model model(cfg, 5, 2);
    CHECK_THROWS_AS(genie::evaluate(model, data, genie::Split::kTrain), std::invalid_argument);
  }
  SUBCASE("wrong task") {
    cfg.task = Task::kMultiLabel;
    Model model(cfg, 2, 2);
    CHECK_THROWS_AS(genie::train(model, data), std::invalid_argument);
  }
  SUBCASE("no train nodes") {
    Model model(cfg, 2, 2);
    for (auto& m : data.blocks[0].masks.train) m = 0;
    CHECK_THROWS_AS(genie::train(model, data), std::invalid_argument);
  }
  SUBCASE("empty split evaluates to zero count") {
    Model model(cfg, 2, 2);
    CHECK(genie::evaluate(model, data, genie::Split::kVal).count == 0);
  }
}

TEST_CASE("metric history file uses tab-separated records") {
  const std::vector<genie::MetricRecord> history = {
      {1, genie::Split::kTrain, "loss", 0.5},
      {1, genie::Split::kVal, "accuracy", 1.0},
  };
  const auto path = temp_file("genie-history");
  genie::write_metric_history(path.string(), history);
  std::ifstream in(path);
  std::string line1, line2;
  std::getline(in, line1);
  std::getline(in, line2);
  CHECK(line1 == "1\ttrain\tloss\t0.5");
  CHECK(line2 == "1\tval\taccuracy\t1");
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint round-trip is bit exact") {
  ModelConfig cfg;
  cfg.variant = Variant::kGeniePathLazy;
  cfg.depth = 2;
  cfg.hidden = 3;
  cfg.bias = true;
  Model model(cfg, 4, 2);
  randomize_params(model, 70);
  const auto state = model.state();
  const auto path = temp_file("genie-ckpt");
  genie::save_checkpoint(path.string(), state);
  const auto loaded = genie::load_checkpoint(path.string());
  REQUIRE(loaded.size() == state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    CHECK(loaded[i].first == state[i].first);
    CHECK(loaded[i].second.rows == state[i].second.rows);
    CHECK(loaded[i].second.cols == state[i].second.cols);
    CHECK(loaded[i].second.data == state[i].second.data);
  }
  // A fresh model accepts the loaded state and reproduces identical logits.
  Model twin(cfg, 4, 2);
  twin.load_state(loaded);
  const Graph raw = random_graph(5, 6, 71);
  const Tensor x = random_tensor(5, 4, 72);
  Tape t1, t2;
  const Tensor a = model.forward(t1, model.prepare(raw), x);
  const Tensor b = twin.forward(t2, twin.prepare(raw), x);
  CHECK(a.data == b.data);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects damaged files") {
  const auto path = temp_file("genie-ckpt-bad");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE" << std::string(16, '\0');
  }
  CHECK_THROWS_AS(genie::load_checkpoint(path.string()), std::invalid_argument);

  ModelConfig cfg;
  cfg.depth = 1;
  cfg.hidden = 2;
  Model model(cfg, 2, 2);
  genie::save_checkpoint(path.string(), model.state());
  const auto full_size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full_size - 7);
  CHECK_THROWS_AS(genie::load_checkpoint(path.string()), std::invalid_argument);
  CHECK_THROWS_AS(genie::load_checkpoint((path.string() + ".missing")), std::invalid_argument);
  std::filesystem::remove(path);
}

TEST_CASE("load_state validates names, shapes, and completeness") {
  ModelConfig cfg;
  cfg.depth = 1;
  cfg.hidden = 2;
  Model model(cfg, 2, 2);
  auto good = model.state();

  auto unknown = good;
  unknown[0].first = "bogus";
  CHECK_THROWS_AS(model.load_state(unknown), std::invalid_argument);

  auto dup = good;
  dup.push_back(good[0]);
  CHECK_THROWS_AS(model.load_state(dup), std::invalid_argument);

  auto wrong_shape = good;
  wrong_shape[0].second = Tensor::zeros(1, 1);
  CHECK_THROWS_AS(model.load_state(wrong_shape), std::invalid_argument);

  auto incomplete = good;
  incomplete.pop_back();
  CHECK_THROWS_AS(model.load_state(incomplete), std::invalid_argument);

  CHECK_NOTHROW(model.load_state(good));
}
