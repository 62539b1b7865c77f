#include "diabrisk/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "diabrisk/error.hpp"

namespace diabrisk {

double ShapExplanation::residual() const {
  return base_value + std::accumulate(contributions.begin(), contributions.end(), 0.0) - output_margin;
}

// ---------------------------------------------------------------------------
// TreeSHAP
//
// Each path element tracks the fraction of "feature missing" flow (zero) and
// "feature present" flow (one, 0 or 1) through the nodes splitting on that
// feature, plus the permutation weight of subsets of each size.

namespace {

struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

using Path = std::vector<PathElement>;

void extend_path(Path& path, int depth, double zero_fraction, double one_fraction, int feature) {
  const auto d = static_cast<std::size_t>(depth);
  path[d] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  for (int i = depth - 1; i >= 0; --i) {
    const auto ui = static_cast<std::size_t>(i);
    path[ui + 1].pweight += one_fraction * path[ui].pweight * (i + 1) / static_cast<double>(depth + 1);
    path[ui].pweight = zero_fraction * path[ui].pweight * (depth - i) / static_cast<double>(depth + 1);
  }
}

void unwind_path(Path& path, int depth, int index) {
  const double one = path[static_cast<std::size_t>(index)].one_fraction;
  const double zero = path[static_cast<std::size_t>(index)].zero_fraction;
  double next_one_portion = path[static_cast<std::size_t>(depth)].pweight;
  for (int i = depth - 1; i >= 0; --i) {
    auto& el = path[static_cast<std::size_t>(i)];
    if (one != 0.0) {
      const double tmp = el.pweight;
      el.pweight = next_one_portion * (depth + 1) / ((i + 1) * one);
      next_one_portion = tmp - el.pweight * zero * (depth - i) / static_cast<double>(depth + 1);
    } else {
      el.pweight = el.pweight * (depth + 1) / (zero * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    auto& dst = path[static_cast<std::size_t>(i)];
    const auto& src = path[static_cast<std::size_t>(i + 1)];
    dst.feature = src.feature;
    dst.zero_fraction = src.zero_fraction;
    dst.one_fraction = src.one_fraction;
  }
}

double unwound_path_sum(const Path& path, int depth, int index) {
  const double one = path[static_cast<std::size_t>(index)].one_fraction;
  const double zero = path[static_cast<std::size_t>(index)].zero_fraction;
  double next_one_portion = path[static_cast<std::size_t>(depth)].pweight;
  double total = 0.0;
  for (int i = depth - 1; i >= 0; --i) {
    const auto& el = path[static_cast<std::size_t>(i)];
    if (one != 0.0) {
      const double tmp = next_one_portion * (depth + 1) / ((i + 1) * one);
      total += tmp;
      next_one_portion = el.pweight - tmp * zero * (depth - i) / static_cast<double>(depth + 1);
    } else if (zero != 0.0) {
      total += el.pweight / zero / ((depth - i) / static_cast<double>(depth + 1));
    }
  }
  return total;
}

class TreeShapRecursion {
 public:
  TreeShapRecursion(const Tree& tree, std::span<const double> x, std::span<double> phi)
      : tree_(tree), x_(x), phi_(phi) {}

  void run() {
    Path path(static_cast<std::size_t>(tree_.depth()) + 2);
    recurse(0, path, 0, 1.0, 1.0, -1);
  }

 private:
  void recurse(int node_id, Path path, int depth, double zero_fraction, double one_fraction, int feature) {
    extend_path(path, depth, zero_fraction, one_fraction, feature);
    const auto& node = tree_.nodes[static_cast<std::size_t>(node_id)];
    if (node.is_leaf()) {
      for (int i = 1; i <= depth; ++i) {
        const double w = unwound_path_sum(path, depth, i);
        const auto& el = path[static_cast<std::size_t>(i)];
        phi_[static_cast<std::size_t>(el.feature)] += w * (el.one_fraction - el.zero_fraction) * node.value;
      }
      return;
    }
    const bool go_left = x_[static_cast<std::size_t>(node.feature)] <= node.threshold;
    const int hot = go_left ? node.left : node.right;
    const int cold = go_left ? node.right : node.left;
    const double cover = node.cover;
    const double hot_zero = cover > 0 ? tree_.nodes[static_cast<std::size_t>(hot)].cover / cover : 0.0;
    const double cold_zero = cover > 0 ? tree_.nodes[static_cast<std::size_t>(cold)].cover / cover : 0.0;

    double incoming_zero = 1.0, incoming_one = 1.0;
    int seen = -1;
    for (int k = 1; k <= depth; ++k)
      if (path[static_cast<std::size_t>(k)].feature == node.feature) {
        seen = k;
        break;
      }
    if (seen >= 0) {
      incoming_zero = path[static_cast<std::size_t>(seen)].zero_fraction;
      incoming_one = path[static_cast<std::size_t>(seen)].one_fraction;
      unwind_path(path, depth, seen);
      --depth;
    }
    recurse(hot, path, depth + 1, hot_zero * incoming_zero, incoming_one, node.feature);
    recurse(cold, path, depth + 1, cold_zero * incoming_zero, 0.0, node.feature);
  }

  const Tree& tree_;
  std::span<const double> x_;
  std::span<double> phi_;
};

}  // namespace

void tree_shap_accumulate(const Tree& tree, std::span<const double> x, std::span<double> phi) {
  if (tree.nodes.empty()) throw ValidationError("empty tree");
  if (!(tree.nodes.front().cover > 0)) throw ValidationError("tree lacks cover counts; TreeSHAP needs them");
  TreeShapRecursion(tree, x, phi).run();
}

ShapExplanation tree_shap(const TreeEnsemble& ensemble, std::span<const double> x) {
  if (x.size() != ensemble.feature_count())
    throw ValidationError("expected " + std::to_string(ensemble.feature_count()) + " features, got " +
                          std::to_string(x.size()));
  ShapExplanation e;
  e.contributions.assign(x.size(), 0.0);
  e.feature_values.assign(x.begin(), x.end());
  e.feature_names = ensemble.feature_names;
  e.base_value = ensemble.base_score;
  for (const auto& t : ensemble.trees) {
    tree_shap_accumulate(t, x, e.contributions);
    e.base_value += t.expected_value();
  }
  e.output_margin = ensemble.margin(x);
  return e;
}

// ---------------------------------------------------------------------------
// Brute force

std::vector<double> brute_shapley(const CoalitionGame& game, std::size_t p, std::size_t max_features) {
  if (p > max_features || p > 30)
    throw ValidationError("brute-force Shapley limited to " + std::to_string(max_features) + " features, got " +
                          std::to_string(p));
  const std::uint64_t n_masks = std::uint64_t{1} << p;
  std::vector<double> value(n_masks);
  for (std::uint64_t m = 0; m < n_masks; ++m) value[m] = game(m);

  // weight[s] = s! (p - s - 1)! / p!
  std::vector<double> weight(p);
  for (std::size_t s = 0; s < p; ++s)
    weight[s] = std::exp(std::lgamma(static_cast<double>(s) + 1) + std::lgamma(static_cast<double>(p - s)) -
                         std::lgamma(static_cast<double>(p) + 1));

  std::vector<double> phi(p, 0.0);
  for (std::uint64_t m = 0; m < n_masks; ++m) {
    const auto size = static_cast<std::size_t>(__builtin_popcountll(m));
    for (std::size_t j = 0; j < p; ++j) {
      const std::uint64_t bit = std::uint64_t{1} << j;
      if (m & bit) continue;
      phi[j] += weight[size] * (value[m | bit] - value[m]);
    }
  }
  return phi;
}

namespace {

double conditional_expectation(const Tree& tree, int node_id, std::span<const double> x, std::uint64_t mask) {
  const auto& node = tree.nodes[static_cast<std::size_t>(node_id)];
  if (node.is_leaf()) return node.value;
  if (mask & (std::uint64_t{1} << node.feature))
    return conditional_expectation(tree, x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                                     : node.right,
                                   x, mask);
  const auto& l = tree.nodes[static_cast<std::size_t>(node.left)];
  const auto& r = tree.nodes[static_cast<std::size_t>(node.right)];
  return (l.cover * conditional_expectation(tree, node.left, x, mask) +
          r.cover * conditional_expectation(tree, node.right, x, mask)) /
         node.cover;
}

}  // namespace

CoalitionGame tree_conditional_game(const TreeEnsemble& ensemble, std::span<const double> x) {
  std::vector<double> xs(x.begin(), x.end());
  return [&ensemble, xs](std::uint64_t mask) {
    double v = ensemble.base_score;
    for (const auto& t : ensemble.trees) v += conditional_expectation(t, 0, xs, mask);
    return v;
  };
}

CoalitionGame background_game(std::function<double(std::span<const double>)> model, std::span<const double> x,
                              const Matrix& background) {
  if (background.empty()) throw ValidationError("background dataset is empty");
  if (background.cols() != x.size()) throw ValidationError("background width does not match instance");
  std::vector<double> xs(x.begin(), x.end());
  return [model = std::move(model), xs, &background](std::uint64_t mask) {
    std::vector<double> z(xs.size());
    double sum = 0.0;
    for (std::size_t r = 0; r < background.rows(); ++r) {
      const auto b = background.row(r);
      for (std::size_t j = 0; j < xs.size(); ++j) z[j] = (mask & (std::uint64_t{1} << j)) ? xs[j] : b[j];
      sum += model(z);
    }
    return sum / static_cast<double>(background.rows());
  };
}

std::vector<double> brute_shapley(std::function<double(std::span<const double>)> model, std::span<const double> x,
                                  const Matrix& background, std::size_t max_features) {
  if (x.size() > max_features)
    throw ValidationError("brute-force Shapley limited to " + std::to_string(max_features) + " features");
  return brute_shapley(background_game(std::move(model), x, background), x.size(), max_features);
}

// ---------------------------------------------------------------------------

ShapSummary shap_summary(const TreeEnsemble& ensemble, const Matrix& sample) {
  if (sample.empty()) throw ValidationError("SHAP summary needs a non-empty sample");
  const std::size_t p = ensemble.feature_count();
  ShapSummary s;
  s.feature_names = ensemble.feature_names;
  s.mean_abs.assign(p, 0.0);
  s.points.resize(p);
  for (std::size_t r = 0; r < sample.rows(); ++r) {
    auto e = tree_shap(ensemble, sample.row(r));
    s.max_abs_residual = std::max(s.max_abs_residual, std::abs(e.residual()));
    for (std::size_t j = 0; j < p; ++j) {
      s.mean_abs[j] += std::abs(e.contributions[j]);
      s.points[j].emplace_back(e.feature_values[j], e.contributions[j]);
    }
  }
  for (auto& v : s.mean_abs) v /= static_cast<double>(sample.rows());
  s.ranking.resize(p);
  std::iota(s.ranking.begin(), s.ranking.end(), 0);
  std::stable_sort(s.ranking.begin(), s.ranking.end(),
                   [&](std::size_t a, std::size_t b) { return s.mean_abs[a] > s.mean_abs[b]; });
  return s;
}

Waterfall waterfall(const ShapExplanation& expl, std::size_t top_k) {
  Waterfall w;
  w.base_value = expl.base_value;
  w.output_margin = expl.output_margin;
  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < expl.contributions.size(); ++j)
    if (expl.contributions[j] != 0.0) order.push_back(j);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(expl.contributions[a]) > std::abs(expl.contributions[b]);
  });

  double cursor = expl.base_value;
  const std::size_t shown = std::min(top_k, order.size());
  double shown_sum = 0.0;
  for (std::size_t i = 0; i < shown; ++i) {
    const std::size_t j = order[i];
    WaterfallStep step;
    step.label = j < expl.feature_names.size() ? expl.feature_names[j] : "f" + std::to_string(j);
    step.feature = static_cast<int>(j);
    step.value = expl.feature_values[j];
    step.phi = expl.contributions[j];
    step.start = cursor;
    cursor += step.phi;
    step.end = cursor;
    shown_sum += step.phi;
    w.steps.push_back(step);
  }
  if (order.size() > shown) {
    WaterfallStep other;
    other.label = std::to_string(order.size() - shown) + " other features";
    other.phi = expl.output_margin - expl.base_value - shown_sum;
    other.start = cursor;
    other.end = expl.output_margin;
    w.steps.push_back(other);
  }
  if (w.steps.empty()) {
    WaterfallStep flat;
    flat.label = "no feature contributions";
    flat.start = flat.end = expl.base_value;
    w.steps.push_back(flat);
  } else {
    w.steps.back().end = expl.output_margin;
  }
  return w;
}

}  // namespace diabrisk
