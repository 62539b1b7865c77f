#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "diabrisk/dataset.hpp"
#include "diabrisk/tree.hpp"

namespace diabrisk {

enum class ModelFamily { logistic, tree, forest, gbdt, knn };

std::string to_string(ModelFamily f);
ModelFamily model_family_from_string(const std::string& s);

/// Family-specific hyperparameters by name; every value is numeric
/// (booleans as 0/1, growth policy as depthwise=0/1).
using ParamMap = std::map<std::string, double>;

// ---------------------------------------------------------------------------
// Hyperparameters. Defaults are the conventional library defaults.

struct LogisticParams {
  double l2 = 1e-4;  // penalty on 0.5*||w||^2 added to the mean log-loss
  int max_iters = 100;
  double tol = 1e-8;  // gradient-norm stopping criterion
  friend bool operator==(const LogisticParams&, const LogisticParams&) = default;
};

struct TreeParams {
  int max_depth = 10;
  int min_samples_leaf = 1;
  int max_bins = 255;
  friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

struct ForestParams {
  int n_trees = 100;
  int max_depth = 12;
  int min_samples_leaf = 1;
  int mtry = 0;  // 0 selects ceil(sqrt(p))
  bool bootstrap = true;
  std::uint64_t seed = 0;  // below 2^53 so it survives a ParamMap
  int max_bins = 255;
  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

struct GbdtParams {
  int n_trees = 200;
  double learning_rate = 0.1;
  int num_leaves = 31;
  int max_depth = -1;  // -1: unlimited for leaf-wise, 6 for depth-wise
  int min_child_samples = 20;
  double lambda = 1.0;
  int max_bins = 255;
  GrowthPolicy growth = GrowthPolicy::leaf_wise;
  friend bool operator==(const GbdtParams&, const GbdtParams&) = default;
};

struct KnnParams {
  int k = 5;
  bool standardize = true;
  friend bool operator==(const KnnParams&, const KnnParams&) = default;
};

LogisticParams logistic_params(const ParamMap& m);
TreeParams tree_params(const ParamMap& m);
ForestParams forest_params(const ParamMap& m);
GbdtParams gbdt_params(const ParamMap& m);
KnnParams knn_params(const ParamMap& m);

ParamMap to_param_map(const LogisticParams& p);
ParamMap to_param_map(const TreeParams& p);
ParamMap to_param_map(const ForestParams& p);
ParamMap to_param_map(const GbdtParams& p);
ParamMap to_param_map(const KnnParams& p);

// ---------------------------------------------------------------------------
// Fitted models

/// Per-feature centering/scaling; zero-variance features map to 0.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // 0 marks a constant feature

  static Standardizer fit(const Matrix& x);
  void apply(std::span<const double> x, std::span<double> out) const;
  Matrix apply(const Matrix& x) const;
  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

struct LogisticModel {
  LogisticParams params;
  Standardizer standardizer;
  std::vector<double> weights;  // on standardized features
  double intercept = 0.0;
  int iterations = 0;
  double final_gradient_norm = 0.0;

  double margin(std::span<const double> x) const;
  friend bool operator==(const LogisticModel&, const LogisticModel&) = default;
};

struct TreeModel {
  TreeParams params;
  Tree tree;
  friend bool operator==(const TreeModel&, const TreeModel&) = default;
};

struct ForestModel {
  ForestParams params;
  std::vector<Tree> trees;
  double probability(std::span<const double> x) const;
  friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

struct GbdtModel {
  GbdtParams params;
  TreeEnsemble ensemble;
  friend bool operator==(const GbdtModel&, const GbdtModel&) = default;
};

struct KnnModel {
  KnnParams params;
  Standardizer standardizer;  // empty when standardize == false
  Matrix train;               // standardized training rows
  std::vector<int> labels;

  double probability(std::span<const double> x) const;
  friend bool operator==(const KnnModel&, const KnnModel&) = default;
};

/// Uniform prediction contract over every model family.
class Classifier {
 public:
  using State = std::variant<LogisticModel, TreeModel, ForestModel, GbdtModel, KnnModel>;

  Classifier() = default;
  Classifier(State state, std::vector<std::string> feature_names)
      : state_(std::move(state)), feature_names_(std::move(feature_names)) {}

  ModelFamily family() const;
  const State& state() const { return state_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  std::size_t feature_count() const { return feature_names_.size(); }
  ParamMap params() const;

  bool has_margin() const;
  double predict_proba(std::span<const double> x) const;
  /// Log-odds; defined for logistic and gbdt, throws ValidationError otherwise.
  double predict_margin(std::span<const double> x) const;
  std::vector<double> predict_proba(const Matrix& x) const;
  std::vector<double> predict_margin(const Matrix& x) const;

  /// Non-null for gbdt models.
  const TreeEnsemble* ensemble() const;

  friend bool operator==(const Classifier&, const Classifier&) = default;

 private:
  void check_width(std::size_t n) const;

  State state_;
  std::vector<std::string> feature_names_;
};

// ---------------------------------------------------------------------------
// Training

Classifier fit_logistic(const EncodedDataset& train, const LogisticParams& params = {});
Classifier fit_tree(const EncodedDataset& train, const TreeParams& params = {});
Classifier fit_forest(const EncodedDataset& train, const ForestParams& params = {});

struct GbdtTrace {
  std::vector<double> train_loss;  // mean log-loss after each round (index 0 = base score only)
  std::vector<double> split_gains;
};
TreeEnsemble fit_gbdt(const EncodedDataset& train, const GbdtParams& params = {}, GbdtTrace* trace = nullptr);
Classifier fit_gbdt_classifier(const EncodedDataset& train, const GbdtParams& params = {});

Classifier fit_knn(const EncodedDataset& train, const KnnParams& params = {});

/// Dispatch on family with a ParamMap. `seed` fills in the forest seed when
/// the map does not carry one.
Classifier fit_model(ModelFamily family, const ParamMap& params, const EncodedDataset& train,
                     std::uint64_t seed = 0);

namespace logistic_detail {
/// Mean log-loss + 0.5*l2*||w||^2 on already-standardized rows. coef[0] is the
/// intercept (unpenalized), coef[1..] the weights.
double objective(std::span<const double> coef, const Matrix& xs, std::span<const int> y, double l2);
std::vector<double> gradient(std::span<const double> coef, const Matrix& xs, std::span<const int> y, double l2);
}  // namespace logistic_detail

}  // namespace diabrisk
