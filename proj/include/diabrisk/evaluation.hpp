#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "diabrisk/dataset.hpp"
#include "diabrisk/models.hpp"
#include "diabrisk/sampling.hpp"

namespace diabrisk {

// ---------------------------------------------------------------------------
// Metrics

struct MetricSet {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double roc_auc = 0.0;
  // Set when the evaluation data has no positives (recall is NaN) or no
  // negatives (roc_auc is NaN).
  bool recall_undefined = false;
  bool auc_undefined = false;
};

/// Rank-statistic AUC with midranks for ties. NaN when a class is absent.
double roc_auc(std::span<const int> y_true, std::span<const double> scores);

/// Confusion metrics at `threshold` (positive when score >= threshold).
/// Precision is 0 when nothing is predicted positive.
MetricSet compute_metrics(std::span<const int> y_true, std::span<const double> scores, double threshold = 0.5);

/// Element-wise mean of fold metrics.
MetricSet mean_metrics(std::span<const MetricSet> folds);

// ---------------------------------------------------------------------------
// Splits

using Folds = std::vector<std::vector<std::size_t>>;

/// k disjoint folds covering every index; per-fold class counts are within 1
/// of exact proportionality. Each fold's indices are sorted.
Folds stratified_kfold(std::span<const int> target, int k, std::uint64_t seed);

struct HoldoutSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified train/test split; each class contributes round(n_c * test_fraction)
/// rows to the test side.
HoldoutSplit stratified_holdout(std::span<const int> target, double test_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Cross-validation and grid search

struct ModelConfig {
  std::string name;  // display name, e.g. "Logistic Regression"
  ModelFamily family = ModelFamily::logistic;
  ParamMap params;
};

struct CvResult {
  std::string model_name;
  ModelConfig config;
  SamplingStrategy strategy;
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<double> recall;
  std::vector<MetricSet> folds;

  MetricSet mean() const { return mean_metrics(folds); }
  double mean_recall() const;
  double mean_f1() const;
};

/// Stratified k-fold CV. Resampling is applied to each training partition
/// only; held-out folds are never resampled.
CvResult cross_validate(const ModelConfig& config, const EncodedDataset& data, const SamplingStrategy& strategy,
                        int k, std::uint64_t seed, double threshold = 0.5);

/// Fit on `train` (after resampling) and score the untouched `test` set.
MetricSet evaluate_holdout(const ModelConfig& config, const EncodedDataset& train, const EncodedDataset& test,
                           const SamplingStrategy& strategy, std::uint64_t seed, double threshold = 0.5);

/// Ordered parameter lattice: every combination of the listed values. The
/// last-listed parameter varies fastest.
using ParamGrid = std::vector<std::pair<std::string, std::vector<double>>>;

std::vector<ParamMap> expand_grid(const ParamGrid& grid, const ParamMap& base = {});

struct GridPoint {
  ParamMap params;
  std::optional<CvResult> result;
  std::string error;  // non-empty when training failed at this point
};

struct GridSearchResult {
  ParamMap best_params;
  CvResult best;
  std::vector<GridPoint> points;
};

/// Exhaustive recall-first search: argmax mean recall, ties broken by mean
/// F1, then lattice order. Points whose training throws are recorded and
/// skipped; if every point fails a ValidationError is thrown.
GridSearchResult grid_search(const ModelConfig& base, const ParamGrid& grid, const EncodedDataset& data,
                             const SamplingStrategy& strategy, int cv_k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Statistical comparison

struct AnovaResult {
  double f_stat = 0.0;
  double p_value = 1.0;
  int df_between = 0;
  int df_within = 0;
  double ss_between = 0.0;
  double ss_within = 0.0;
  bool degenerate = false;  // zero within-group variance with differing means
};

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups);

struct TukeyRow {
  std::string group1;
  std::string group2;
  double meandiff = 0.0;  // mean(group2) - mean(group1)
  double p_adj = 1.0;
  double lower = 0.0;
  double upper = 0.0;
  bool reject = false;
};

using NamedGroups = std::vector<std::pair<std::string, std::vector<double>>>;

/// Tukey HSD (Tukey-Kramer when group sizes differ); rows ordered lexicographically
/// by group name.
std::vector<TukeyRow> tukey_hsd(const NamedGroups& groups, double alpha = 0.05);

struct ReportRow {
  std::string model;
  MetricSet metrics;
};

struct EvaluationReport {
  std::string strategy;
  std::vector<ReportRow> rows;  // descending F1
  std::optional<AnovaResult> anova;
  std::vector<TukeyRow> tukey;
  double alpha = 0.05;
};

/// Builds the comparison table; ANOVA and Tukey are attached when there are
/// at least two models. All results must share fold count, seed and strategy.
EvaluationReport comparison_report(const std::vector<CvResult>& results, double alpha = 0.05);

/// Display names used in tables.
std::string default_model_name(ModelFamily family, const ParamMap& params);

}  // namespace diabrisk
