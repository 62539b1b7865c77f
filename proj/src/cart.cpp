// CART classification trees (Gini) and bagged random forests.

#include <algorithm>
#include <cmath>

#include "binning.hpp"
#include "diabrisk/error.hpp"
#include "diabrisk/models.hpp"
#include "diabrisk/rng.hpp"

namespace diabrisk {

namespace {

double gini(double pos, double n) {
  if (n <= 0) return 0.0;
  const double p = pos / n;
  return 2.0 * p * (1.0 - p);
}

class CartBuilder {
 public:
  CartBuilder(const detail::BinnedMatrix& binned, std::span<const int> y, int max_depth, int min_samples_leaf,
              int mtry, Rng* rng)
      : binned_(binned), y_(y), max_depth_(max_depth), min_leaf_(std::max(1, min_samples_leaf)),
        mtry_(mtry), rng_(rng) {
    std::size_t max_bins = 0;
    for (const auto& u : binned_.upper) max_bins = std::max(max_bins, u.size());
    count_.resize(max_bins);
    pos_.resize(max_bins);
    features_.resize(binned_.cols);
  }

  Tree build(std::vector<std::size_t> rows) {
    Tree tree;
    tree.nodes.reserve(64);
    grow(tree, rows, 0, rows.size(), 0);
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    std::size_t bin = 0;
    double decrease = -1.0;
  };

  int grow(Tree& tree, std::vector<std::size_t>& rows, std::size_t begin, std::size_t end, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const double n = static_cast<double>(end - begin);
    double pos = 0.0;
    for (std::size_t i = begin; i < end; ++i) pos += y_[rows[i]];
    tree.nodes.back().cover = n;

    Split best;
    const bool can_split = (max_depth_ < 0 || depth < max_depth_) && pos > 0 && pos < n &&
                           end - begin >= 2 * static_cast<std::size_t>(min_leaf_);
    if (can_split) best = find_split(rows, begin, end, pos);
    if (best.feature < 0) {
      tree.nodes[static_cast<std::size_t>(id)].value = pos / n;
      return id;
    }

    const auto f = static_cast<std::size_t>(best.feature);
    auto mid = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                              rows.begin() + static_cast<std::ptrdiff_t>(end),
                              [&](std::size_t r) { return binned_.at(r, f) <= best.bin; });
    const auto split_at = static_cast<std::size_t>(mid - rows.begin());
    const int left = grow(tree, rows, begin, split_at, depth + 1);
    const int right = grow(tree, rows, split_at, end, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = binned_.upper[f][best.bin];
    node.left = left;
    node.right = right;
    node.value = 0.0;
    return id;
  }

  Split find_split(const std::vector<std::size_t>& rows, std::size_t begin, std::size_t end, double pos) {
    const std::size_t p = binned_.cols;
    std::size_t n_candidates = p;
    for (std::size_t f = 0; f < p; ++f) features_[f] = f;
    if (mtry_ > 0 && static_cast<std::size_t>(mtry_) < p) {
      n_candidates = static_cast<std::size_t>(mtry_);
      for (std::size_t i = 0; i < n_candidates; ++i) std::swap(features_[i], features_[i + uniform_index(*rng_, p - i)]);
      std::sort(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(n_candidates));
    }

    const double n = static_cast<double>(end - begin);
    const double parent = gini(pos, n);
    const double min_leaf = static_cast<double>(min_leaf_);
    Split best;
    for (std::size_t c = 0; c < n_candidates; ++c) {
      const std::size_t f = features_[c];
      const std::size_t nb = binned_.bin_count(f);
      std::fill(count_.begin(), count_.begin() + static_cast<std::ptrdiff_t>(nb), 0.0);
      std::fill(pos_.begin(), pos_.begin() + static_cast<std::ptrdiff_t>(nb), 0.0);
      for (std::size_t i = begin; i < end; ++i) {
        const auto b = binned_.at(rows[i], f);
        count_[b] += 1.0;
        pos_[b] += y_[rows[i]];
      }
      double nl = 0.0, pl = 0.0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        if (count_[b] == 0.0) continue;
        nl += count_[b];
        pl += pos_[b];
        const double nr = n - nl;
        if (nr < min_leaf) break;
        if (nl < min_leaf) continue;
        const double decrease = parent - (nl / n) * gini(pl, nl) - (nr / n) * gini(pos - pl, nr);
        if (decrease > best.decrease + 1e-15) best = {static_cast<int>(f), b, decrease};
      }
    }
    return best;
  }

  const detail::BinnedMatrix& binned_;
  std::span<const int> y_;
  int max_depth_;
  int min_leaf_;
  int mtry_;
  Rng* rng_;
  std::vector<double> count_, pos_;
  std::vector<std::size_t> features_;
};

void require_rows(const EncodedDataset& train) {
  if (train.size() == 0) throw ValidationError("training data is empty");
}

}  // namespace

Classifier fit_tree(const EncodedDataset& train, const TreeParams& params) {
  require_rows(train);
  auto binned = detail::bin_features(train.rows, params.max_bins);
  CartBuilder builder(binned, train.target, params.max_depth, params.min_samples_leaf, 0, nullptr);
  std::vector<std::size_t> rows(train.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  TreeModel m{params, builder.build(std::move(rows))};
  return Classifier(std::move(m), train.schema.names());
}

Classifier fit_forest(const EncodedDataset& train, const ForestParams& params) {
  require_rows(train);
  if (params.n_trees < 1) throw ValidationError("forest requires n_trees >= 1");
  const std::size_t p = train.feature_count();
  if (params.seed >= (std::uint64_t{1} << 53)) throw ValidationError("forest seed must be below 2^53");
  int mtry = params.mtry > 0 ? params.mtry : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));
  mtry = std::min<int>(mtry, static_cast<int>(p));
  auto binned = detail::bin_features(train.rows, params.max_bins);

  ForestModel model;
  model.params = params;
  model.params.mtry = mtry;
  const std::size_t n = train.size();
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      for (auto& r : rows) r = uniform_index(rng, n);
    } else {
      for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    }
    CartBuilder builder(binned, train.target, params.max_depth, params.min_samples_leaf, mtry, &rng);
    model.trees.push_back(builder.build(std::move(rows)));
  }
  return Classifier(std::move(model), train.schema.names());
}

double ForestModel::probability(std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(x);
  return sum / static_cast<double>(trees.size());
}

}  // namespace diabrisk
