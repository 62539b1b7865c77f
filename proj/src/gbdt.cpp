// Second-order gradient boosting for the logistic loss with histogram split
// search. Leaf-wise growth expands the leaf with the largest gain until
// num_leaves is reached; depth-wise growth expands whole levels.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "binning.hpp"
#include "diabrisk/error.hpp"
#include "diabrisk/models.hpp"

namespace diabrisk {

namespace {

struct HistBin {
  double g = 0.0;
  double h = 0.0;
  double n = 0.0;
};

struct SplitCandidate {
  int feature = -1;
  std::size_t bin = 0;
  double gain = 0.0;
};

struct Leaf {
  int node = 0;
  int depth = 0;
  std::vector<std::uint32_t> rows;
  std::vector<HistBin> hist;
  double g = 0.0, h = 0.0;
  SplitCandidate best;
};

class TreeGrower {
 public:
  TreeGrower(const detail::BinnedMatrix& binned, const GbdtParams& params)
      : binned_(binned), params_(params) {
    offsets_.resize(binned_.cols + 1, 0);
    for (std::size_t f = 0; f < binned_.cols; ++f) offsets_[f + 1] = offsets_[f] + binned_.bin_count(f);
  }

  // Grows one tree; row_value[i] receives the leaf value training row i lands in.
  Tree grow(std::span<const double> grad, std::span<const double> hess, std::vector<double>& row_value,
            std::vector<double>* gains) {
    grad_ = grad;
    hess_ = hess;
    Tree tree;
    tree.nodes.emplace_back();
    tree.nodes[0].cover = static_cast<double>(binned_.rows);

    std::vector<Leaf> leaves(1);
    Leaf& root = leaves[0];
    root.rows.resize(binned_.rows);
    for (std::size_t i = 0; i < binned_.rows; ++i) root.rows[i] = static_cast<std::uint32_t>(i);
    build_hist(root);
    finish_leaf(root);

    const int depth_cap = params_.growth == GrowthPolicy::depth_wise
                              ? (params_.max_depth > 0 ? params_.max_depth : 6)
                              : params_.max_depth;

    auto splittable = [&](const Leaf& l) {
      return l.best.feature >= 0 && (depth_cap < 0 || l.depth < depth_cap);
    };

    if (params_.growth == GrowthPolicy::leaf_wise) {
      while (static_cast<int>(leaves.size()) < params_.num_leaves) {
        std::size_t pick = leaves.size();
        for (std::size_t i = 0; i < leaves.size(); ++i) {
          if (!splittable(leaves[i])) continue;
          if (pick == leaves.size() || leaves[i].best.gain > leaves[pick].best.gain) pick = i;
        }
        if (pick == leaves.size()) break;
        split(tree, leaves, pick, gains);
      }
    } else {
      for (int d = 0; depth_cap < 0 || d < depth_cap; ++d) {
        bool any = false;
        const std::size_t count = leaves.size();
        for (std::size_t i = 0; i < count; ++i) {
          if (leaves[i].depth != d || !splittable(leaves[i])) continue;
          split(tree, leaves, i, gains);
          any = true;
        }
        if (!any) break;
      }
    }

    for (auto& leaf : leaves) {
      auto& node = tree.nodes[static_cast<std::size_t>(leaf.node)];
      node.value = -params_.learning_rate * leaf.g / (leaf.h + params_.lambda);
      for (auto r : leaf.rows) row_value[r] = node.value;
    }
    return tree;
  }

 private:
  void build_hist(Leaf& leaf) const {
    leaf.hist.assign(offsets_.back(), HistBin{});
    const std::size_t p = binned_.cols;
    for (auto r : leaf.rows) {
      const double g = grad_[r], h = hess_[r];
      const std::uint16_t* b = &binned_.bins[static_cast<std::size_t>(r) * p];
      for (std::size_t f = 0; f < p; ++f) {
        auto& cell = leaf.hist[offsets_[f] + b[f]];
        cell.g += g;
        cell.h += h;
        cell.n += 1.0;
      }
    }
  }

  void finish_leaf(Leaf& leaf) const {
    leaf.g = 0.0;
    leaf.h = 0.0;
    for (auto r : leaf.rows) {
      leaf.g += grad_[r];
      leaf.h += hess_[r];
    }
    leaf.best = best_split(leaf);
  }

  SplitCandidate best_split(const Leaf& leaf) const {
    SplitCandidate best;
    const double n = static_cast<double>(leaf.rows.size());
    const double min_child = static_cast<double>(params_.min_child_samples);
    if (n < 2.0 * std::max(1.0, min_child)) return best;
    const double lambda = params_.lambda;
    const double parent_score = leaf.g * leaf.g / (leaf.h + lambda);
    for (std::size_t f = 0; f < binned_.cols; ++f) {
      const std::size_t nb = binned_.bin_count(f);
      double gl = 0.0, hl = 0.0, nl = 0.0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        const auto& cell = leaf.hist[offsets_[f] + b];
        if (cell.n == 0.0) continue;
        gl += cell.g;
        hl += cell.h;
        nl += cell.n;
        const double nr = n - nl;
        if (nr < min_child || nr <= 0.0) break;
        if (nl < min_child) continue;
        const double gr = leaf.g - gl, hr = leaf.h - hl;
        const double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_score);
        if (gain > best.gain) best = {static_cast<int>(f), b, gain};
      }
    }
    return best;
  }

  void split(Tree& tree, std::vector<Leaf>& leaves, std::size_t idx, std::vector<double>* gains) {
    Leaf parent = std::move(leaves[idx]);
    const auto f = static_cast<std::size_t>(parent.best.feature);
    const std::size_t p = binned_.cols;

    Leaf left, right;
    left.depth = right.depth = parent.depth + 1;
    left.rows.reserve(parent.rows.size());
    right.rows.reserve(parent.rows.size());
    for (auto r : parent.rows)
      (binned_.bins[static_cast<std::size_t>(r) * p + f] <= parent.best.bin ? left : right).rows.push_back(r);

    Leaf& small = left.rows.size() <= right.rows.size() ? left : right;
    Leaf& large = &small == &left ? right : left;
    build_hist(small);
    large.hist = std::move(parent.hist);
    for (std::size_t i = 0; i < large.hist.size(); ++i) {
      large.hist[i].g -= small.hist[i].g;
      large.hist[i].h -= small.hist[i].h;
      large.hist[i].n -= small.hist[i].n;
    }
    finish_leaf(left);
    finish_leaf(right);

    left.node = static_cast<int>(tree.nodes.size());
    right.node = left.node + 1;
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    tree.nodes[static_cast<std::size_t>(left.node)].cover = static_cast<double>(left.rows.size());
    tree.nodes[static_cast<std::size_t>(right.node)].cover = static_cast<double>(right.rows.size());
    auto& node = tree.nodes[static_cast<std::size_t>(parent.node)];
    node.feature = parent.best.feature;
    node.threshold = binned_.upper[f][parent.best.bin];
    node.left = left.node;
    node.right = right.node;
    node.value = 0.0;
    if (gains) gains->push_back(parent.best.gain);

    leaves[idx] = std::move(left);
    leaves.push_back(std::move(right));
  }

  const detail::BinnedMatrix& binned_;
  const GbdtParams& params_;
  std::vector<std::size_t> offsets_;
  std::span<const double> grad_, hess_;
};

double mean_log_loss(std::span<const double> margin, std::span<const int> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < margin.size(); ++i) {
    const double m = margin[i];
    // log(1 + e^m) - y m, evaluated stably
    const double softplus = m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
    s += softplus - y[i] * m;
  }
  return s / static_cast<double>(margin.size());
}

}  // namespace

TreeEnsemble fit_gbdt(const EncodedDataset& train, const GbdtParams& params, GbdtTrace* trace) {
  if (train.size() == 0) throw ValidationError("training data is empty");
  const std::size_t positives = train.count_label(1);
  if (positives == 0 || positives == train.size())
    throw ValidationError("gradient boosting requires both classes in the training data");
  if (params.growth == GrowthPolicy::leaf_wise && params.num_leaves < 2)
    throw ValidationError("num_leaves must be >= 2");
  if (params.n_trees < 0) throw ValidationError("n_trees must be >= 0");
  if (!(params.learning_rate > 0)) throw ValidationError("learning_rate must be > 0");
  if (!(params.lambda >= 0)) throw ValidationError("lambda must be >= 0");

  const std::size_t n = train.size();
  auto binned = detail::bin_features(train.rows, params.max_bins);

  TreeEnsemble ens;
  const double prior = static_cast<double>(positives) / static_cast<double>(n);
  ens.base_score = std::log(prior / (1.0 - prior));
  ens.feature_names = train.schema.names();
  ens.learning_rate = params.learning_rate;
  ens.num_leaves = params.num_leaves;
  ens.n_trees = params.n_trees;
  ens.growth = params.growth;

  std::vector<double> margin(n, ens.base_score), grad(n), hess(n), row_value(n);
  if (trace) {
    trace->train_loss.clear();
    trace->split_gains.clear();
    trace->train_loss.push_back(mean_log_loss(margin, train.target));
  }
  TreeGrower grower(binned, params);
  for (int t = 0; t < params.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = p - train.target[i];
      hess[i] = p * (1.0 - p);
    }
    ens.trees.push_back(grower.grow(grad, hess, row_value, trace ? &trace->split_gains : nullptr));
    for (std::size_t i = 0; i < n; ++i) margin[i] += row_value[i];
    if (trace) trace->train_loss.push_back(mean_log_loss(margin, train.target));
  }
  return ens;
}

Classifier fit_gbdt_classifier(const EncodedDataset& train, const GbdtParams& params) {
  GbdtModel m{params, fit_gbdt(train, params)};
  auto names = m.ensemble.feature_names;
  return Classifier(std::move(m), std::move(names));
}

}  // namespace diabrisk
