#include "diabrisk/lime.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "diabrisk/error.hpp"
#include "diabrisk/rng.hpp"

namespace diabrisk {

namespace {

std::string fmt_bound(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt_level(double v) {
  char buf[64];
  if (v == std::floor(v) && std::abs(v) < 1e15)
    std::snprintf(buf, sizeof buf, "%.0f", v);
  else
    std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Linear-interpolated quantile of sorted data (numpy's default).
double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

Discretizer::Discretizer(std::vector<FeatureBins> features) : features_(std::move(features)) {
  for (const auto& f : features_) {
    for (std::size_t i = 1; i < f.boundaries.size(); ++i)
      if (!(f.boundaries[i - 1] < f.boundaries[i]))
        throw ValidationError("discretizer boundaries for '" + f.name + "' are not strictly increasing");
    const std::size_t bins = f.categorical ? f.levels.size() : f.boundaries.size() + 1;
    if (bins == 0 || f.representatives.size() != bins)
      throw ValidationError("discretizer for '" + f.name + "' has inconsistent bins");
  }
}

std::size_t Discretizer::bin_of(std::size_t f, double v) const {
  const auto& fb = features_[f];
  if (!fb.categorical)
    return static_cast<std::size_t>(std::lower_bound(fb.boundaries.begin(), fb.boundaries.end(), v) -
                                    fb.boundaries.begin());
  std::size_t best = 0;
  for (std::size_t i = 1; i < fb.levels.size(); ++i)
    if (std::abs(fb.levels[i] - v) < std::abs(fb.levels[best] - v)) best = i;
  return best;
}

std::string Discretizer::condition(std::size_t f, std::size_t bin) const {
  const auto& fb = features_[f];
  if (fb.categorical) return fb.name + " = " + fmt_level(fb.levels[bin]);
  const auto& b = fb.boundaries;
  if (b.empty()) return fb.name + " = " + fmt_level(fb.representatives[0]);
  if (bin == 0) return fb.name + " <= " + fmt_bound(b.front());
  if (bin == b.size()) return fb.name + " > " + fmt_bound(b.back());
  return fmt_bound(b[bin - 1]) + " < " + fb.name + " <= " + fmt_bound(b[bin]);
}

Discretizer fit_discretizer(const EncodedDataset& train) {
  if (train.size() == 0) throw ValidationError("cannot fit a discretizer on an empty dataset");
  std::vector<Discretizer::FeatureBins> out;
  for (std::size_t f = 0; f < train.feature_count(); ++f) {
    const auto& spec = train.schema[f];
    auto values = train.rows.column(f);
    std::sort(values.begin(), values.end());
    std::vector<double> levels = values;
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

    Discretizer::FeatureBins fb;
    fb.name = spec.name;
    const bool continuous = spec.kind == FeatureKind::continuous || spec.kind == FeatureKind::count ||
                            (spec.kind == FeatureKind::ordinal && levels.size() > kMaxCategoricalLevels);
    if (!continuous) {
      fb.categorical = true;
      fb.levels = levels;
      fb.representatives = levels;
    } else {
      // A cut at the maximum would leave the bin above it empty; skewed
      // columns instead cut just below their most common top value.
      const double below_max = levels.size() >= 2 ? levels[levels.size() - 2] : values.back();
      for (double q : {0.25, 0.5, 0.75}) {
        double cut = quantile_sorted(values, q);
        if (cut >= values.back()) cut = below_max;
        if (cut < values.back() && (fb.boundaries.empty() || cut > fb.boundaries.back())) fb.boundaries.push_back(cut);
      }
      std::vector<double> edges;
      edges.push_back(values.front());
      edges.insert(edges.end(), fb.boundaries.begin(), fb.boundaries.end());
      edges.push_back(values.back());
      for (std::size_t i = 0; i + 1 < edges.size(); ++i) fb.representatives.push_back(0.5 * (edges[i] + edges[i + 1]));
    }
    out.push_back(std::move(fb));
  }
  return Discretizer(std::move(out));
}

double lime_detail::kernel_weight(std::size_t mismatches, double kernel_width) {
  const double d2 = static_cast<double>(mismatches);
  return std::exp(-d2 / (kernel_width * kernel_width));
}

LimeExplanation lime_explain(const ProbabilityFn& model, std::span<const double> x, const Discretizer& disc,
                             const LimeConfig& cfg, std::uint64_t seed) {
  const std::size_t p = disc.feature_count();
  if (x.size() != p) throw ValidationError("instance width does not match the discretizer");
  if (cfg.n_samples < 100) throw ValidationError("LIME needs at least 100 samples");
  if (cfg.top_k < 1) throw ValidationError("LIME top_k must be >= 1");
  const double width = cfg.kernel_width > 0 ? cfg.kernel_width : 0.75 * std::sqrt(static_cast<double>(p));

  std::vector<std::size_t> home(p);
  for (std::size_t j = 0; j < p; ++j) home[j] = disc.bin_of(j, x[j]);

  const auto n = static_cast<Eigen::Index>(cfg.n_samples);
  const auto pp = static_cast<Eigen::Index>(p);
  Eigen::MatrixXd z(n, pp);
  Eigen::VectorXd y(n), w(n);
  Rng rng(seed);
  std::vector<double> values(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t mismatches = 0;
    if (i == 0) {
      values.assign(x.begin(), x.end());
      z.row(0).setOnes();
    } else {
      for (std::size_t j = 0; j < p; ++j) {
        const std::size_t b = uniform_index(rng, disc.bin_count(j));
        values[j] = disc.features()[j].representatives[b];
        const bool same = b == home[j];
        z(i, static_cast<Eigen::Index>(j)) = same ? 1.0 : 0.0;
        mismatches += !same;
      }
    }
    y[i] = model(values);
    w[i] = lime_detail::kernel_weight(mismatches, width);
  }

  // Weighted ridge with an unpenalized intercept: centre on weighted means.
  const double wsum = w.sum();
  const Eigen::RowVectorXd zbar = (w.transpose() * z) / wsum;
  const double ybar = w.dot(y) / wsum;
  const Eigen::MatrixXd zc = z.rowwise() - zbar;
  const Eigen::VectorXd yc = y.array() - ybar;
  Eigen::MatrixXd a = zc.transpose() * w.asDiagonal() * zc;
  a.diagonal().array() += cfg.ridge_lambda;
  const Eigen::VectorXd rhs = zc.transpose() * (w.asDiagonal() * yc);
  const Eigen::VectorXd beta = a.ldlt().solve(rhs);
  if (!beta.allFinite()) throw NumericError("LIME ridge system is singular");

  LimeExplanation e;
  e.seed = seed;
  e.predicted_probability = y[0];
  e.intercept = ybar - zbar.dot(beta);
  e.all_weights.assign(beta.data(), beta.data() + p);

  const Eigen::VectorXd fitted = (zc * beta).array() + ybar;
  const double ss_res = (w.array() * (y - fitted).array().square()).sum();
  const double ss_tot = (w.array() * yc.array().square()).sum();
  e.local_fit_quality = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a_, std::size_t b_) { return std::abs(beta[static_cast<Eigen::Index>(a_)]) >
                                                                std::abs(beta[static_cast<Eigen::Index>(b_)]); });
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), p);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = order[i];
    e.items.push_back({j, disc.condition(j, home[j]), beta[static_cast<Eigen::Index>(j)]});
  }
  e.low_confidence = std::all_of(e.all_weights.begin(), e.all_weights.end(),
                                 [](double v) { return std::abs(v) < 1e-6; });
  return e;
}

}  // namespace diabrisk
