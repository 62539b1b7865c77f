#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace diabrisk {

// One node of a binary decision tree. Rows with x[feature] <= threshold go
// left. Leaves have left == right == -1 and carry `value` (a class-1
// probability for CART trees, a log-odds increment for boosted trees).
// `cover` is the training weight that reached the node.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  double cover = 0.0;

  bool is_leaf() const { return left < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int leaf_index(std::span<const double> x) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return i;
  }
  double predict(std::span<const double> x) const { return nodes[static_cast<std::size_t>(leaf_index(x))].value; }

  std::size_t leaf_count() const;
  int depth() const;
  /// Cover-weighted mean leaf value (the tree's expectation over training data).
  double expected_value() const;
  /// Throws ValidationError on bad child indices, missing children, cycles or
  /// cover(parent) != cover(left) + cover(right) (relative tolerance 1e-9).
  void validate(std::size_t n_features) const;

  friend bool operator==(const Tree&, const Tree&) = default;
};

enum class GrowthPolicy { leaf_wise, depth_wise };

std::string to_string(GrowthPolicy g);
GrowthPolicy growth_policy_from_string(const std::string& s);

/// Additive boosted ensemble: margin(x) = base_score + sum_t tree_t(x).
struct TreeEnsemble {
  double base_score = 0.0;
  std::vector<Tree> trees;
  std::vector<std::string> feature_names;
  double learning_rate = 0.1;
  int num_leaves = 31;
  int n_trees = 0;
  GrowthPolicy growth = GrowthPolicy::leaf_wise;

  double margin(std::span<const double> x) const {
    double m = base_score;
    for (const auto& t : trees) m += t.predict(x);
    return m;
  }
  double probability(std::span<const double> x) const;
  std::size_t feature_count() const { return feature_names.size(); }

  friend bool operator==(const TreeEnsemble&, const TreeEnsemble&) = default;
};

double sigmoid(double margin);

}  // namespace diabrisk
