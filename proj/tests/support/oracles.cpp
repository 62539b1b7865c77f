#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace diabrisk::testing {

namespace {

double expect_node(const Tree& tree, int id, std::span<const double> x, std::uint64_t mask) {
  const auto& n = tree.nodes[static_cast<std::size_t>(id)];
  if (n.is_leaf()) return n.value;
  if (mask >> n.feature & 1U) return expect_node(tree, x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right, x, mask);
  const auto& l = tree.nodes[static_cast<std::size_t>(n.left)];
  const auto& r = tree.nodes[static_cast<std::size_t>(n.right)];
  return (l.cover * expect_node(tree, n.left, x, mask) + r.cover * expect_node(tree, n.right, x, mask)) / n.cover;
}

void grow(Rng& rng, Tree& t, int id, int depth, int max_depth, std::size_t p) {
  const double cover = t.nodes[static_cast<std::size_t>(id)].cover;
  if (depth >= max_depth || cover < 2 || uniform01(rng) < 0.2) {
    t.nodes[static_cast<std::size_t>(id)].value = standard_normal(rng);
    return;
  }
  const double left_cover = 1 + static_cast<double>(uniform_index(rng, static_cast<std::size_t>(cover) - 1));
  TreeNode left, right;
  left.cover = left_cover;
  right.cover = cover - left_cover;
  const int li = static_cast<int>(t.nodes.size());
  t.nodes.push_back(left);
  t.nodes.push_back(right);
  auto& n = t.nodes[static_cast<std::size_t>(id)];
  n.feature = static_cast<int>(uniform_index(rng, p));
  n.threshold = std::round(standard_normal(rng) * 4) / 4;
  n.left = li;
  n.right = li + 1;
  grow(rng, t, li, depth + 1, max_depth, p);
  grow(rng, t, li + 1, depth + 1, max_depth, p);
}

}  // namespace

double cover_expectation(const Tree& tree, std::span<const double> x, std::uint64_t mask) {
  return expect_node(tree, 0, x, mask);
}

std::vector<double> exhaustive_shapley(const TreeEnsemble& ensemble, std::span<const double> x) {
  const std::size_t p = x.size();
  const std::uint64_t full = std::uint64_t{1} << p;
  std::vector<double> v(full);
  for (std::uint64_t s = 0; s < full; ++s) {
    double total = ensemble.base_score;
    for (const auto& t : ensemble.trees) total += cover_expectation(t, x, s);
    v[s] = total;
  }
  std::vector<double> fact(p + 1, 1.0);
  for (std::size_t i = 1; i <= p; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  std::vector<double> phi(p, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::uint64_t s = 0; s < full; ++s) {
      if (s >> i & 1U) continue;
      const auto size = static_cast<std::size_t>(__builtin_popcountll(s));
      const double w = fact[size] * fact[p - size - 1] / fact[p];
      phi[i] += w * (v[s | (std::uint64_t{1} << i)] - v[s]);
    }
  return phi;
}

TreeEnsemble random_ensemble(Rng& rng, std::size_t p, int max_trees, int max_depth) {
  TreeEnsemble e;
  e.base_score = standard_normal(rng);
  for (std::size_t j = 0; j < p; ++j) e.feature_names.push_back("f" + std::to_string(j));
  const int trees = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_trees)));
  for (int t = 0; t < trees; ++t) {
    Tree tree;
    TreeNode root;
    root.cover = static_cast<double>(20 + uniform_index(rng, 200));
    tree.nodes.push_back(root);
    grow(rng, tree, 0, 0, max_depth, p);
    e.trees.push_back(std::move(tree));
  }
  e.n_trees = trees;
  return e;
}

double pair_count_auc(std::span<const int> y, std::span<const double> s) {
  double num = 0;
  double pairs = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return num / pairs;
}

EncodedDataset random_dataset(Rng& rng, std::size_t n, std::size_t p, double pos_rate, bool integer_grid) {
  std::vector<FeatureSpec> specs;
  for (std::size_t j = 0; j < p; ++j)
    specs.push_back({"x" + std::to_string(j), FeatureKind::continuous, {-1e9, 1e9}, std::nullopt});
  EncodedDataset ds;
  ds.schema = FeatureSchema(specs, "y");
  ds.rows = Matrix(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j)
      ds.rows(i, j) = integer_grid ? static_cast<double>(uniform_index(rng, 4)) : standard_normal(rng);
    ds.target.push_back(uniform01(rng) < pos_rate ? 1 : 0);
  }
  return ds;
}

std::set<std::size_t> oracle_neighbors(const EncodedDataset& ds, std::size_t parent, int label, int k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t j = 0; j < ds.size(); ++j) {
    if (j == parent || ds.target[j] != label) continue;
    double d = 0;
    for (std::size_t c = 0; c < ds.feature_count(); ++c) d += std::pow(ds.rows(parent, c) - ds.rows(j, c), 2);
    all.emplace_back(d, j);
  }
  std::sort(all.begin(), all.end());
  std::set<std::size_t> out;
  for (int i = 0; i < k && i < static_cast<int>(all.size()); ++i) out.insert(all[static_cast<std::size_t>(i)].second);
  return out;
}

}  // namespace diabrisk::testing
