#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diabrisk/dataset.hpp"
#include "diabrisk/explain.hpp"

namespace diabrisk {

struct CorrelationMatrix {
  std::vector<std::string> variables;
  std::vector<std::vector<double>> r;  // symmetric, unit diagonal
  std::vector<std::string> excluded;   // requested but zero-variance

  std::optional<std::size_t> index_of(const std::string& name) const;
  /// Throws ValidationError when either variable is absent.
  double at(const std::string& a, const std::string& b) const;
};

/// Pearson r for every pair of `vars`. Names may be feature columns or the
/// dataset's target. Zero-variance variables are listed in `excluded` and
/// dropped from the matrix.
CorrelationMatrix pearson_matrix(const EncodedDataset& ds, const std::vector<std::string>& vars);

/// The four comorbidity indicators, in reporting order.
const std::vector<std::string>& comorbidity_variables();

/// Target-vs-comorbidity correlations reported for the 2015 BRFSS cohort,
/// for use when no training data is at hand.
CorrelationMatrix reference_comorbidity_correlations();

enum class AlertSeverity { info, elevated, high };
std::string to_string(AlertSeverity s);

struct ComorbidityAlert {
  std::string condition;  // feature name, e.g. "HighBP"
  std::string label;      // display name
  double correlation_with_diabetes = 0.0;
  AlertSeverity severity = AlertSeverity::info;
  std::string message;
};

/// Rules: condition present and predicted positive -> high; present and
/// predicted negative -> elevated; predicted positive with no condition
/// present -> info for each condition with r >= 0.20. Sorted by severity,
/// then correlation, both descending.
std::vector<ComorbidityAlert> comorbidity_alerts(const FeatureSchema& schema, std::span<const double> inputs,
                                                 bool predicted_positive, const CorrelationMatrix& corr);

struct RankedContribution {
  std::string feature;
  double phi = 0.0;
};

/// Contributions ordered by |phi| descending (ties by schema order), first k.
std::vector<RankedContribution> top_contributions(const ShapExplanation& e, std::size_t k = 10);

struct Recommendation {
  std::string trigger_feature;  // empty for the maintenance fallback
  std::string trigger_condition;
  std::string message;
  int priority = 0;  // lower is more urgent
};

/// Scans the rule table; a rule fires when its trigger holds and its feature
/// is in `shap_top` with a positive contribution. Falls back to a single
/// maintenance message when nothing fires.
std::vector<Recommendation> recommendations(const FeatureSchema& schema, std::span<const double> inputs,
                                            const std::vector<RankedContribution>& shap_top);

}  // namespace diabrisk
