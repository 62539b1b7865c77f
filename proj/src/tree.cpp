#include "diabrisk/tree.hpp"

#include <algorithm>
#include <cmath>

#include "diabrisk/error.hpp"

namespace diabrisk {

double sigmoid(double margin) {
  if (margin >= 0) return 1.0 / (1.0 + std::exp(-margin));
  const double e = std::exp(margin);
  return e / (1.0 + e);
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return n.is_leaf(); }));
}

int Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.is_leaf()) continue;
    d[static_cast<std::size_t>(n.left)] = d[i] + 1;
    d[static_cast<std::size_t>(n.right)] = d[i] + 1;
    best = std::max(best, d[i] + 1);
  }
  return best;
}

double Tree::expected_value() const {
  double root = nodes.front().cover;
  if (root <= 0) return 0.0;
  double sum = 0.0;
  for (const auto& n : nodes)
    if (n.is_leaf()) sum += n.cover * n.value;
  return sum / root;
}

void Tree::validate(std::size_t n_features) const {
  if (nodes.empty()) throw ValidationError("tree has no nodes");
  std::vector<int> parents(nodes.size(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (!(n.cover >= 0) || !std::isfinite(n.cover))
      throw ValidationError("node " + std::to_string(i) + " has invalid cover");
    if (!std::isfinite(n.value)) throw ValidationError("node " + std::to_string(i) + " has non-finite value");
    if (n.left < 0 && n.right < 0) continue;
    if (n.left < 0 || n.right < 0) throw ValidationError("internal node " + std::to_string(i) + " lacks a child");
    auto l = static_cast<std::size_t>(n.left);
    auto r = static_cast<std::size_t>(n.right);
    if (l >= nodes.size() || r >= nodes.size() || l <= i || r <= i || l == r)
      throw ValidationError("node " + std::to_string(i) + " has child index out of range");
    if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= n_features)
      throw ValidationError("node " + std::to_string(i) + " splits on unknown feature " + std::to_string(n.feature));
    if (!std::isfinite(n.threshold)) throw ValidationError("node " + std::to_string(i) + " has non-finite threshold");
    ++parents[l];
    ++parents[r];
    const double sum = nodes[l].cover + nodes[r].cover;
    if (std::abs(n.cover - sum) > 1e-9 * std::max(1.0, std::abs(n.cover)))
      throw ValidationError("cover conservation violated at node " + std::to_string(i));
  }
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (parents[i] != 1) throw ValidationError("node " + std::to_string(i) + " is not reachable exactly once");
}

std::string to_string(GrowthPolicy g) { return g == GrowthPolicy::leaf_wise ? "leaf_wise" : "depth_wise"; }

GrowthPolicy growth_policy_from_string(const std::string& s) {
  if (s == "leaf_wise") return GrowthPolicy::leaf_wise;
  if (s == "depth_wise") return GrowthPolicy::depth_wise;
  throw ValidationError("unknown growth policy '" + s + "'");
}

double TreeEnsemble::probability(std::span<const double> x) const { return sigmoid(margin(x)); }

}  // namespace diabrisk
