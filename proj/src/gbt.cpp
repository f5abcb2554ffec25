#include "plaque/gbt.hpp"

#include "plaque/seed.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace plaque::gbt {

void BoostConfig::validate() const {
  if (rounds < 0) throw std::invalid_argument("rounds must be >= 0");
  if (max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
  if (!(eta > 0 && eta <= 1)) throw std::invalid_argument("eta must be in (0, 1]");
  if (!(lambda >= 0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(gamma >= 0)) throw std::invalid_argument("gamma must be >= 0");
  if (!(min_child_hessian >= 0)) throw std::invalid_argument("min_child_hessian must be >= 0");
  if (!(feature_subsample > 0 && feature_subsample <= 1))
    throw std::invalid_argument("feature_subsample must be in (0, 1]");
}

int Tree::leaf_index(std::span<const double> row) const {
  int n = 0;
  while (!nodes[n].is_leaf()) {
    const TreeNode& node = nodes[n];
    const double x = row[node.feature];
    const bool left = std::isnan(x) ? node.default_left : x < node.threshold;
    n = left ? node.left : node.right;
  }
  return n;
}

double Tree::predict(std::span<const double> row) const { return nodes[leaf_index(row)].weight; }

double TreeEnsemble::margin(std::span<const double> row) const {
  double m = base_score;
  for (const Tree& t : trees) m += t.predict(row);
  return m;
}

double split_gain(double g_left, double h_left, double g_right, double h_right,
                  double lambda, double gamma) {
  const double g = g_left + g_right;
  const double h = h_left + h_right;
  return 0.5 * (g_left * g_left / (h_left + lambda) + g_right * g_right / (h_right + lambda) -
                g * g / (h + lambda)) -
         gamma;
}

namespace {

constexpr double kTieTolerance = 1e-12;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct Builder {
  const Eigen::MatrixXd& x;
  std::span<const double> grad;
  std::span<const double> hess;
  const BoostConfig& cfg;
  std::span<const int> features;
  // Per feature, all rows sorted by value (stable on row index).
  std::vector<std::vector<int>> sorted;
  Tree tree;

  Builder(const Eigen::MatrixXd& x_, std::span<const double> g, std::span<const double> h,
          const BoostConfig& c, std::span<const int> f)
      : x(x_), grad(g), hess(h), cfg(c), features(f) {
    sorted.resize(x.cols());
    for (int feat : features) {
      auto& order = sorted[feat];
      order.resize(x.rows());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return x(a, feat) < x(b, feat); });
    }
  }

  double leaf_weight(double g, double h) const { return -g / (h + cfg.lambda) * cfg.eta; }

  int grow(const std::vector<char>& member, int depth) {
    double g_total = 0, h_total = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (member[i]) {
        g_total += grad[i];
        h_total += hess[i];
      }
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});
    tree.nodes[id].weight = leaf_weight(g_total, h_total);
    if (depth >= cfg.max_depth) return id;

    int best_feature = -1;
    double best_threshold = 0, best_gain = 0;
    for (int feat : features) {
      double gl = 0, hl = 0;
      int prev = -1;
      for (int row : sorted[feat]) {
        if (!member[row]) continue;
        if (prev >= 0 && x(row, feat) > x(prev, feat)) {
          const double gr = g_total - gl, hr = h_total - hl;
          if (hl >= cfg.min_child_hessian && hr >= cfg.min_child_hessian) {
            const double gain = split_gain(gl, hl, gr, hr, cfg.lambda, cfg.gamma);
            // Gains equal up to round-off count as ties; the first candidate wins.
            if (gain > best_gain + kTieTolerance * std::max(1.0, std::abs(best_gain))) {
              best_gain = gain;
              best_feature = feat;
              best_threshold = 0.5 * (x(prev, feat) + x(row, feat));
            }
          }
        }
        gl += grad[row];
        hl += hess[row];
        prev = row;
      }
    }
    if (best_feature < 0) return id;

    std::vector<char> left(member.size(), 0), right(member.size(), 0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (!member[i]) continue;
      (x(i, best_feature) < best_threshold ? left : right)[i] = 1;
    }
    tree.nodes[id].feature = best_feature;
    tree.nodes[id].threshold = best_threshold;
    tree.nodes[id].default_left = true;
    tree.nodes[id].weight = 0.0;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }
};

}  // namespace

Tree grow_tree(const Eigen::MatrixXd& features, std::span<const double> grad,
               std::span<const double> hess, const BoostConfig& cfg,
               std::span<const int> allowed_features) {
  Builder b(features, grad, hess, cfg, allowed_features);
  std::vector<char> all(features.rows(), 1);
  b.grow(all, 0);
  return std::move(b.tree);
}

TreeEnsemble train(const Eigen::MatrixXd& features, std::span<const int> labels,
                   const BoostConfig& cfg) {
  cfg.validate();
  const auto n = features.rows();
  if (static_cast<std::size_t>(n) != labels.size())
    throw std::invalid_argument("feature rows and labels differ");
  if (n < 2) throw std::invalid_argument("boosting needs at least 2 samples");
  if (!features.allFinite()) throw std::invalid_argument("training features must be finite");
  const auto n_pos = std::count(labels.begin(), labels.end(), 1);
  if (n_pos == 0 || n_pos == n) throw std::invalid_argument("boosting needs both classes");

  TreeEnsemble model;
  model.config = cfg;
  model.n_features = static_cast<int>(features.cols());
  const double prior = static_cast<double>(n_pos) / static_cast<double>(n);
  model.base_score = std::log(prior / (1 - prior));

  const int n_feat = static_cast<int>(features.cols());
  const int n_keep =
      std::max(1, static_cast<int>(std::ceil(cfg.feature_subsample * n_feat - 1e-12)));

  std::vector<double> margin(n, model.base_score), grad(n), hess(n);
  for (int round = 0; round < cfg.rounds; ++round) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = p - labels[i];
      hess[i] = p * (1 - p);
    }
    std::vector<int> feats(n_feat);
    std::iota(feats.begin(), feats.end(), 0);
    if (n_keep < n_feat) {
      Rng rng = make_rng(cfg.seed, "gbt-colsample", static_cast<std::uint64_t>(round));
      for (int i = n_feat; i > 1; --i)
        std::swap(feats[i - 1], feats[uniform_index(rng, static_cast<std::size_t>(i))]);
      feats.resize(n_keep);
      std::sort(feats.begin(), feats.end());
    }
    Tree tree = grow_tree(features, grad, hess, cfg, feats);
    for (Eigen::Index i = 0; i < n; ++i) {
      std::vector<double> row(features.row(i).begin(), features.row(i).end());
      margin[i] += tree.predict(row);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

double predict_proba_row(const TreeEnsemble& model, std::span<const double> row) {
  if (static_cast<int>(row.size()) != model.n_features)
    throw std::invalid_argument("feature count does not match model");
  return sigmoid(model.margin(row));
}

std::vector<double> predict_proba(const TreeEnsemble& model, const Eigen::MatrixXd& features) {
  if (features.cols() != model.n_features)
    throw std::invalid_argument("feature count does not match model");
  std::vector<double> out(features.rows());
  std::vector<double> row(features.cols());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) row[j] = features(i, j);
    out[i] = sigmoid(model.margin(row));
  }
  return out;
}

double log_loss(std::span<const double> probs, std::span<const int> labels) {
  double s = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], 1e-15, 1 - 1e-15);
    s -= labels[i] ? std::log(p) : std::log(1 - p);
  }
  return s / static_cast<double>(probs.size());
}

void save_model(const std::filesystem::path& path, const TreeEnsemble& model) {
  nlohmann::json j;
  j["format"] = "plaque-gbt/1";
  const auto& c = model.config;
  j["config"] = {{"rounds", c.rounds},
                 {"max_depth", c.max_depth},
                 {"eta", c.eta},
                 {"lambda", c.lambda},
                 {"gamma", c.gamma},
                 {"min_child_hessian", c.min_child_hessian},
                 {"feature_subsample", c.feature_subsample},
                 {"seed", c.seed}};
  j["n_features"] = model.n_features;
  j["base_score"] = model.base_score;
  auto& trees = j["trees"] = nlohmann::json::array();
  for (const Tree& t : model.trees) {
    auto nodes = nlohmann::json::array();
    for (const TreeNode& n : t.nodes)
      nodes.push_back({n.feature, n.threshold, n.default_left, n.left, n.right, n.weight});
    trees.push_back(std::move(nodes));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump() << '\n';
}

TreeEnsemble load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const auto j = nlohmann::json::parse(in);
  if (j.at("format") != "plaque-gbt/1") throw std::runtime_error("unsupported model format");
  TreeEnsemble m;
  const auto& c = j.at("config");
  m.config.rounds = c.at("rounds");
  m.config.max_depth = c.at("max_depth");
  m.config.eta = c.at("eta");
  m.config.lambda = c.at("lambda");
  m.config.gamma = c.at("gamma");
  m.config.min_child_hessian = c.at("min_child_hessian");
  m.config.feature_subsample = c.at("feature_subsample");
  m.config.seed = c.at("seed");
  m.n_features = j.at("n_features");
  m.base_score = j.at("base_score");
  for (const auto& jt : j.at("trees")) {
    Tree t;
    for (const auto& jn : jt) {
      TreeNode n;
      n.feature = jn.at(0);
      n.threshold = jn.at(1);
      n.default_left = jn.at(2);
      n.left = jn.at(3);
      n.right = jn.at(4);
      n.weight = jn.at(5);
      t.nodes.push_back(n);
    }
    m.trees.push_back(std::move(t));
  }
  return m;
}

}  // namespace plaque::gbt
