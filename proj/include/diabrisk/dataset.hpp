#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diabrisk/matrix.hpp"

namespace diabrisk {

enum class FeatureKind { binary, ordinal, count, continuous };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& s);

struct ValueRange {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
  friend bool operator==(const ValueRange&, const ValueRange&) = default;
};

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  ValueRange valid_range;
  // Values outside this interval are valid but reported as extreme.
  std::optional<ValueRange> typical_range;
  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

class FeatureSchema {
 public:
  FeatureSchema() = default;
  FeatureSchema(std::vector<FeatureSpec> features, std::string target_name);

  const std::vector<FeatureSpec>& features() const { return features_; }
  const std::string& target_name() const { return target_name_; }
  std::size_t size() const { return features_.size(); }
  const FeatureSpec& operator[](std::size_t i) const { return features_[i]; }

  std::optional<std::size_t> find(const std::string& name) const;
  /// Throws ValidationError naming the missing feature.
  std::size_t index_of(const std::string& name) const;
  std::vector<std::string> names() const;

  FeatureSchema with_appended(std::span<const FeatureSpec> extra) const;
  FeatureSchema with_target(std::string target_name) const;

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;

 private:
  std::vector<FeatureSpec> features_;
  std::string target_name_;
};

namespace columns {
inline constexpr const char* kTarget3 = "Diabetes_012";
inline constexpr const char* kTargetBinary = "Diabetes_binary";
inline constexpr const char* kRiskFactorCount = "RiskFactorCount";
inline constexpr const char* kLifestyleScore = "LifestyleScore";
inline constexpr const char* kHealthcareScore = "HealthcareScore";
}  // namespace columns

/// The 21 BRFSS 2015 health-indicator predictors, in file order.
const FeatureSchema& brfss_schema();
/// brfss_schema() plus the three engineered columns, binary target.
const FeatureSchema& brfss_engineered_schema();
const std::vector<FeatureSpec>& engineered_feature_specs();

/// Schema columns as parsed from a CSV, plus the raw (unrecoded) target.
struct RawTable {
  FeatureSchema schema;
  Matrix rows;
  std::vector<double> target;
  std::string source;
  std::size_t row_count() const { return rows.rows(); }
};

struct EncodedDataset {
  FeatureSchema schema;
  Matrix rows;
  std::vector<int> target;
  std::vector<std::string> provenance;

  std::size_t size() const { return rows.rows(); }
  std::size_t feature_count() const { return rows.cols(); }
  std::size_t count_label(int label) const;
  double positive_rate() const;
  EncodedDataset subset(std::span<const std::size_t> idx) const;

  friend bool operator==(const EncodedDataset&, const EncodedDataset&) = default;
};

/// Locates every schema column and the target column (Diabetes_012 or
/// Diabetes_binary) by header name. Errors report the offending row/column.
RawTable load_csv(const std::filesystem::path& path, const FeatureSchema& schema);
RawTable parse_csv(std::string_view text, const FeatureSchema& schema, std::string source = "<memory>");

/// Drops prediabetic rows (1), maps diabetic (2) to 1. Input that is already
/// binary (target named Diabetes_binary) passes through unchanged.
EncodedDataset recode_target(const RawTable& raw);
EncodedDataset recode_target(const EncodedDataset& ds);

struct DedupResult {
  EncodedDataset dataset;
  std::size_t removed = 0;
};

/// Keeps the first occurrence of each identical (features, target) pair.
DedupResult deduplicate(const EncodedDataset& ds);

struct CellIssue {
  std::size_t row = 0;
  std::string feature;
  double value = 0.0;
  friend bool operator==(const CellIssue&, const CellIssue&) = default;
};

struct ValidationReport {
  std::vector<CellIssue> violations;  // outside valid_range
  std::vector<CellIssue> extremes;    // valid, outside typical_range; retained
  bool clean() const { return violations.empty() && extremes.empty(); }
};

/// Report-only; throws ValidationError for structurally invalid cells
/// (non-finite values, negative counts).
ValidationReport validate_ranges(const EncodedDataset& ds);

struct ScoreConfig {
  double health_days_scale = 30.0;
};

struct CompositeScores {
  double lifestyle_score = 1.0;
  double healthcare_access_score = 1.0;
  int risk_factor_count = 0;
};

/// Composite scores for one row laid out per `schema` (which must contain the
/// source columns).
CompositeScores compute_scores(const FeatureSchema& schema, std::span<const double> row,
                               const ScoreConfig& cfg = {});

/// Appends RiskFactorCount, LifestyleScore and HealthcareScore.
EncodedDataset engineer_features(const EncodedDataset& ds, const ScoreConfig& cfg = {});

/// load -> recode -> deduplicate -> validate -> engineer, with counts recorded
/// in provenance.
struct PreparedData {
  EncodedDataset dataset;
  std::size_t raw_rows = 0;
  std::size_t after_recode = 0;
  std::size_t duplicates_removed = 0;
  ValidationReport validation;
};
PreparedData prepare_dataset(const RawTable& raw, const ScoreConfig& cfg = {});

}  // namespace diabrisk
