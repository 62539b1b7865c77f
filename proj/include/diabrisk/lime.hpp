#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "diabrisk/dataset.hpp"

namespace diabrisk {

/// Maps each feature to interpretable bins: quartile intervals for continuous
/// features, one bin per observed level for categorical ones.
class Discretizer {
 public:
  struct FeatureBins {
    std::string name;
    bool categorical = false;
    std::vector<double> boundaries;       // continuous: strictly increasing cut points
    std::vector<double> levels;           // categorical: sorted observed values
    std::vector<double> representatives;  // one value per bin, used for perturbation
    friend bool operator==(const FeatureBins&, const FeatureBins&) = default;
  };

  Discretizer() = default;
  explicit Discretizer(std::vector<FeatureBins> features);

  std::size_t feature_count() const { return features_.size(); }
  const std::vector<FeatureBins>& features() const { return features_; }
  std::size_t bin_count(std::size_t f) const { return features_[f].representatives.size(); }
  /// Continuous: number of boundaries strictly below v. Categorical: the level
  /// equal to v, else the nearest level (lower on ties).
  std::size_t bin_of(std::size_t f, double v) const;
  /// Human-readable condition, e.g. "BMI > 32.00", "GenHlth = 5".
  std::string condition(std::size_t f, std::size_t bin) const;

  friend bool operator==(const Discretizer&, const Discretizer&) = default;

 private:
  std::vector<FeatureBins> features_;
};

/// Ordinal features with at most this many levels are treated as categorical.
inline constexpr std::size_t kMaxCategoricalLevels = 13;

Discretizer fit_discretizer(const EncodedDataset& train);

struct LimeConfig {
  int n_samples = 5000;
  double kernel_width = 0.0;  // 0 selects 0.75 * sqrt(p)
  double ridge_lambda = 1.0;
  int top_k = 10;
};

struct LimeItem {
  std::size_t feature = 0;
  std::string condition;
  double weight = 0.0;
};

struct LimeExplanation {
  double predicted_probability = 0.0;
  double intercept = 0.0;
  std::vector<LimeItem> items;       // descending |weight|, at most top_k
  std::vector<double> all_weights;   // per feature, schema order
  double local_fit_quality = 0.0;    // weighted R^2 of the surrogate
  std::uint64_t seed = 0;
  bool low_confidence = false;       // every |weight| < 1e-6
};

using ProbabilityFn = std::function<double(std::span<const double>)>;

LimeExplanation lime_explain(const ProbabilityFn& model, std::span<const double> x, const Discretizer& disc,
                             const LimeConfig& cfg, std::uint64_t seed);

namespace lime_detail {
/// Kernel weight of a perturbation differing from x in `mismatches` bins.
double kernel_weight(std::size_t mismatches, double kernel_width);
}  // namespace lime_detail

}  // namespace diabrisk
