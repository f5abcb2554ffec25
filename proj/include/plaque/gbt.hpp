#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace plaque::gbt {

struct BoostConfig {
  int rounds = 200;
  int max_depth = 3;
  double eta = 0.1;
  double lambda = 1.0;
  double gamma = 0.0;
  double min_child_hessian = 1.0;
  double feature_subsample = 0.8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  bool default_left = true;
  int left = -1;
  int right = -1;
  double weight = 0.0;

  bool is_leaf() const { return feature < 0; }
};

// Nodes stored in creation order; node 0 is the root. Rows with
// x < threshold go left; NaN follows default_left.
struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> row) const;
  int leaf_index(std::span<const double> row) const;
};

struct TreeEnsemble {
  double base_score = 0.0;  // log-odds
  int n_features = 0;
  BoostConfig config;
  std::vector<Tree> trees;

  double margin(std::span<const double> row) const;
};

// Structure-score gain of splitting a node into (L, R).
double split_gain(double g_left, double h_left, double g_right, double h_right,
                  double lambda, double gamma);

// Rows are samples.
TreeEnsemble train(const Eigen::MatrixXd& features, std::span<const int> labels,
                   const BoostConfig& cfg);

std::vector<double> predict_proba(const TreeEnsemble& model, const Eigen::MatrixXd& features);
double predict_proba_row(const TreeEnsemble& model, std::span<const double> row);

double log_loss(std::span<const double> probs, std::span<const int> labels);

// One exact-greedy tree on fixed first/second-order statistics, restricted to
// `allowed_features` (ascending). Exposed for oracle tests.
Tree grow_tree(const Eigen::MatrixXd& features, std::span<const double> grad,
               std::span<const double> hess, const BoostConfig& cfg,
               std::span<const int> allowed_features);

void save_model(const std::filesystem::path& path, const TreeEnsemble& model);
TreeEnsemble load_model(const std::filesystem::path& path);

}  // namespace plaque::gbt
