#include <doctest.h>

#include "plaque/eval.hpp"
#include "plaque/gbt.hpp"
#include "plaque/seed.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <memory>
#include <numeric>

using namespace plaque;
using namespace plaque::gbt;

namespace {

struct Data {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

Data make_data(Rng& rng, int n, int f, bool discrete = false) {
  Data d{Eigen::MatrixXd(n, f), std::vector<int>(n)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < f; ++j)
      d.x(i, j) = discrete ? static_cast<double>(uniform_index(rng, 4)) : uniform01(rng);
    d.y[i] = uniform01(rng) < 0.5 ? 0 : 1;
  }
  d.y[0] = 0;
  d.y[1] = 1;
  return d;
}

// Exhaustive oracle: every (feature, midpoint) split, gain recomputed from
// scratch over the node's rows; ties keep the first (lowest feature, then
// lowest threshold) candidate.
struct OracleNode {
  bool leaf = true;
  int feature = -1;
  double threshold = 0;
  double weight = 0;
  std::unique_ptr<OracleNode> left, right;
};

std::unique_ptr<OracleNode> oracle(const Eigen::MatrixXd& x, const std::vector<double>& g,
                                   const std::vector<double>& h, const std::vector<int>& rows,
                                   int depth, const BoostConfig& cfg) {
  auto node = std::make_unique<OracleNode>();
  double G = 0, H = 0;
  for (int r : rows) {
    G += g[r];
    H += h[r];
  }
  node->weight = -G / (H + cfg.lambda) * cfg.eta;
  if (depth >= cfg.max_depth) return node;
  double best = 0;
  for (int f = 0; f < x.cols(); ++f) {
    std::vector<double> vals;
    for (int r : rows) vals.push_back(x(r, f));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
      const double thr = 0.5 * (vals[k] + vals[k + 1]);
      double gl = 0, hl = 0, gr = 0, hr = 0;
      for (int r : rows) {
        if (x(r, f) < thr) {
          gl += g[r];
          hl += h[r];
        } else {
          gr += g[r];
          hr += h[r];
        }
      }
      if (hl < cfg.min_child_hessian || hr < cfg.min_child_hessian) continue;
      const double gain = 0.5 * (gl * gl / (hl + cfg.lambda) + gr * gr / (hr + cfg.lambda) -
                                 (gl + gr) * (gl + gr) / (hl + hr + cfg.lambda)) -
                          cfg.gamma;
      if (gain > best + 1e-12 * std::max(1.0, std::abs(best))) {
        best = gain;
        node->leaf = false;
        node->feature = f;
        node->threshold = thr;
      }
    }
  }
  if (node->leaf) return node;
  std::vector<int> l, r;
  for (int row : rows) (x(row, node->feature) < node->threshold ? l : r).push_back(row);
  node->left = oracle(x, g, h, l, depth + 1, cfg);
  node->right = oracle(x, g, h, r, depth + 1, cfg);
  return node;
}

void compare(const Tree& t, int id, const OracleNode& o) {
  const TreeNode& n = t.nodes[id];
  REQUIRE(n.is_leaf() == o.leaf);
  if (o.leaf) {
    CHECK(n.weight == doctest::Approx(o.weight).epsilon(1e-12));
    return;
  }
  CHECK(n.feature == o.feature);
  CHECK(n.threshold == o.threshold);
  compare(t, n.left, *o.left);
  compare(t, n.right, *o.right);
}

}  // namespace

TEST_CASE("split gain hand values") {
  CHECK(split_gain(2, 2, -2, 2, 1, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(split_gain(0, 3, 0, 5, 1, 0.7) == doctest::Approx(-0.7));
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const double g = 4 * uniform01(rng) - 2, h = 3 * uniform01(rng), lambda = 2 * uniform01(rng);
    const double gain = split_gain(g, h, g, h, lambda, 0);
    const double identity = 0.5 * (2 * g * g / (h + lambda) - 4 * g * g / (2 * h + lambda));
    CHECK(gain == doctest::Approx(identity).epsilon(1e-12));
    // Without regularization a split never loses structure score.
    const double g2 = 4 * uniform01(rng) - 2, h2 = 0.1 + 3 * uniform01(rng);
    CHECK(split_gain(g, h + 0.1, g2, h2, 0, 0) >= -1e-12);
  }
  CHECK(split_gain(1.5, 2, 1.5, 2, 0, 0) == doctest::Approx(0.0));
}

TEST_CASE("separable 1D data reaches training AUC 1") {
  Eigen::MatrixXd x(20, 1);
  std::vector<int> y(20);
  for (int i = 0; i < 20; ++i) {
    x(i, 0) = i < 10 ? -1.0 - i : 1.0 + i;
    y[i] = i < 10 ? 0 : 1;
  }
  BoostConfig cfg;
  cfg.rounds = 10;
  cfg.max_depth = 1;
  cfg.feature_subsample = 1.0;
  const auto model = train(x, y, cfg);
  CHECK(roc_auc(predict_proba(model, x), y) == 1.0);
}

TEST_CASE("constant features give the prior log-odds") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(12, 3, 2.5);
  std::vector<int> y{1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0};
  BoostConfig cfg;
  cfg.rounds = 5;
  const auto model = train(x, y, cfg);
  for (const auto& t : model.trees) CHECK(t.nodes.size() == 1);
  const double prior = 3.0 / 12.0;
  for (double p : predict_proba(model, x)) CHECK(p == doctest::Approx(prior).epsilon(1e-12));
}

TEST_CASE("training log-loss never increases across rounds") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const Data d = make_data(rng, 30 + static_cast<int>(uniform_index(rng, 30)), 4);
    BoostConfig cfg;
    cfg.rounds = 25;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const auto model = train(d.x, d.y, cfg);
    TreeEnsemble partial = model;
    double prev = std::numeric_limits<double>::infinity();
    for (int r = 0; r <= cfg.rounds; ++r) {
      partial.trees.assign(model.trees.begin(), model.trees.begin() + r);
      const double loss = log_loss(predict_proba(partial, d.x), d.y);
      CHECK(loss <= prev + 1e-12);
      prev = loss;
    }
  }
}

TEST_CASE("greedy trees equal exhaustive split enumeration on tiny data") {
  Rng rng(9);
  for (int trial = 0; trial < 400; ++trial) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 7));
    const Data d = make_data(rng, n, 2, trial % 2 == 0);
    BoostConfig cfg;
    cfg.max_depth = 1 + static_cast<int>(uniform_index(rng, 2));
    cfg.min_child_hessian = 0.0;
    cfg.lambda = uniform01(rng);
    cfg.eta = 0.3;
    std::vector<double> g(n), h(n);
    for (int i = 0; i < n; ++i) {
      const double p = 0.2 + 0.6 * uniform01(rng);
      g[i] = p - d.y[i];
      h[i] = p * (1 - p);
    }
    const std::vector<int> feats{0, 1};
    const Tree t = grow_tree(d.x, g, h, cfg, feats);
    std::vector<int> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    compare(t, 0, *oracle(d.x, g, h, rows, 0, cfg));
  }
}

TEST_CASE("scaling a feature column leaves structure and predictions unchanged") {
  Rng rng(4);
  const Data d = make_data(rng, 50, 3);
  BoostConfig cfg;
  cfg.rounds = 20;
  cfg.feature_subsample = 1.0;
  const auto a = train(d.x, d.y, cfg);
  Eigen::MatrixXd scaled = d.x;
  scaled.col(1) *= 37.5;
  const auto b = train(scaled, d.y, cfg);
  REQUIRE(a.trees.size() == b.trees.size());
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
    for (std::size_t n = 0; n < a.trees[t].nodes.size(); ++n)
      CHECK(a.trees[t].nodes[n].feature == b.trees[t].nodes[n].feature);
    for (int i = 0; i < d.x.rows(); ++i) {
      std::vector<double> ra(d.x.row(i).begin(), d.x.row(i).end());
      std::vector<double> rb(scaled.row(i).begin(), scaled.row(i).end());
      CHECK(a.trees[t].leaf_index(ra) == b.trees[t].leaf_index(rb));
    }
  }
  const auto pa = predict_proba(a, d.x), pb = predict_proba(b, scaled);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-12));
}

TEST_CASE("training is deterministic given data, config and seed") {
  Rng rng(12);
  const Data d = make_data(rng, 60, 10);
  BoostConfig cfg;
  cfg.rounds = 15;
  cfg.seed = 99;
  const auto a = train(d.x, d.y, cfg), b = train(d.x, d.y, cfg);
  CHECK(predict_proba(a, d.x) == predict_proba(b, d.x));
}

TEST_CASE("prediction routing and errors") {
  TreeEnsemble m;
  m.n_features = 2;
  m.base_score = 0.3;
  const std::vector<double> row{1.0, 2.0};
  CHECK(predict_proba_row(m, row) == doctest::Approx(1 / (1 + std::exp(-0.3))));

  Tree t;
  t.nodes = {TreeNode{1, 5.0, true, 1, 2, 0.0}, TreeNode{-1, 0, true, -1, -1, -0.4},
             TreeNode{-1, 0, true, -1, -1, 0.9}};
  m.trees.push_back(t);
  CHECK(predict_proba_row(m, row) == doctest::Approx(1 / (1 + std::exp(-(0.3 - 0.4)))));
  const std::vector<double> missing{1.0, std::nan("")};
  CHECK(predict_proba_row(m, missing) == doctest::Approx(1 / (1 + std::exp(-(0.3 - 0.4)))));
  CHECK_THROWS(predict_proba_row(m, std::vector<double>{1.0}));

  Eigen::MatrixXd batch(3, 2);
  batch << 1, 2, 1, 7, 0, 5;
  const auto p = predict_proba(m, batch);
  for (int i = 0; i < 3; ++i) {
    std::vector<double> r{batch(i, 0), batch(i, 1)};
    CHECK(p[i] == predict_proba_row(m, r));
  }
}

TEST_CASE("training rejects single-class labels") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 2);
  CHECK_THROWS(train(x, std::vector<int>{1, 1, 1, 1, 1}, BoostConfig{}));
  CHECK_THROWS(train(x, std::vector<int>{0, 1}, BoostConfig{}));
}

TEST_CASE("model serialization round-trips exactly") {
  Rng rng(2);
  const Data d = make_data(rng, 40, 5);
  BoostConfig cfg;
  cfg.rounds = 8;
  const auto m = train(d.x, d.y, cfg);
  const auto path = std::filesystem::temp_directory_path() / "plaque_gbt_model.json";
  save_model(path, m);
  const auto r = load_model(path);
  CHECK(predict_proba(r, d.x) == predict_proba(m, d.x));
  CHECK(r.config.rounds == 8);
  std::filesystem::remove(path);
}
