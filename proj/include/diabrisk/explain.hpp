#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "diabrisk/dataset.hpp"
#include "diabrisk/tree.hpp"

namespace diabrisk {

/// SHAP decomposition of one prediction in margin (log-odds) space:
/// base_value + sum(contributions) == output_margin.
struct ShapExplanation {
  double base_value = 0.0;
  std::vector<double> contributions;
  std::vector<double> feature_values;
  std::vector<std::string> feature_names;
  double output_margin = 0.0;

  double residual() const;  // base + sum(phi) - margin
};

/// Exact path-dependent TreeSHAP, summed over the ensemble's trees.
ShapExplanation tree_shap(const TreeEnsemble& ensemble, std::span<const double> x);

/// Per-tree contributions added into `phi` (length = feature count).
void tree_shap_accumulate(const Tree& tree, std::span<const double> x, std::span<double> phi);

// ---------------------------------------------------------------------------
// Brute-force Shapley values (verification oracle)

/// v(S) for a coalition given as a bit mask over features.
using CoalitionGame = std::function<double(std::uint64_t mask)>;

/// Exact Shapley values by enumerating all 2^p coalitions.
/// Throws ValidationError when p > max_features.
std::vector<double> brute_shapley(const CoalitionGame& game, std::size_t p, std::size_t max_features = 15);

/// Tree-conditional game: features outside S are integrated out by following
/// both children weighted by cover, the expectation TreeSHAP computes.
CoalitionGame tree_conditional_game(const TreeEnsemble& ensemble, std::span<const double> x);

/// Background game: v(S) = mean over background rows b of f(x_S, b_rest).
CoalitionGame background_game(std::function<double(std::span<const double>)> model, std::span<const double> x,
                              const Matrix& background);

/// Convenience for the background game.
std::vector<double> brute_shapley(std::function<double(std::span<const double>)> model, std::span<const double> x,
                                  const Matrix& background, std::size_t max_features = 15);

// ---------------------------------------------------------------------------
// Aggregates

struct ShapSummary {
  std::vector<std::string> feature_names;
  std::vector<double> mean_abs;
  std::vector<std::size_t> ranking;  // feature indices, descending mean |phi|
  // points[f] = (feature value, phi) for every explained row
  std::vector<std::vector<std::pair<double, double>>> points;
  double max_abs_residual = 0.0;
};

ShapSummary shap_summary(const TreeEnsemble& ensemble, const Matrix& sample);

struct WaterfallStep {
  std::string label;
  int feature = -1;  // -1 for the merged "other" term
  double value = 0.0;
  double phi = 0.0;
  double start = 0.0;
  double end = 0.0;
};

struct Waterfall {
  double base_value = 0.0;
  double output_margin = 0.0;
  std::vector<WaterfallStep> steps;
};

/// Features with nonzero phi sorted by |phi| (ties by index); beyond top_k
/// they merge into one "other" step. Steps chain from base_value to
/// output_margin.
Waterfall waterfall(const ShapExplanation& expl, std::size_t top_k = 10);

}  // namespace diabrisk
