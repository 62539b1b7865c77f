#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "diabrisk/dataset.hpp"
#include "diabrisk/evaluation.hpp"
#include "diabrisk/insights.hpp"
#include "diabrisk/lime.hpp"
#include "diabrisk/models.hpp"

namespace diabrisk {

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kDatasetFormatVersion = 1;
inline constexpr int kEvalFormatVersion = 1;

struct TrainingMetadata {
  std::string model_name;
  std::string sampling = "original";
  std::uint64_t seed = 0;
  int cv_folds = 0;
  std::vector<double> cv_recall;  // empty when training skipped CV
  std::size_t training_rows = 0;
  std::string timestamp;  // ISO-8601 UTC; empty for byte-stable artifacts
  std::string data_sha256;
};

struct ModelArtifact {
  int format_version = kModelFormatVersion;
  FeatureSchema schema;
  Classifier model;
  std::optional<Discretizer> discretizer;
  std::optional<CorrelationMatrix> correlations;
  TrainingMetadata training;
};

/// JSON document; numbers use shortest round-trip formatting so loading
/// reproduces every double bit for bit.
std::string model_to_json(const ModelArtifact& artifact);
/// Validates format, version, schema and tree structure; throws
/// ValidationError without returning a partial artifact.
ModelArtifact model_from_json(const std::string& text);

void save_model(const ModelArtifact& artifact, const std::filesystem::path& path);
ModelArtifact load_model(const std::filesystem::path& path);

/// Dataset artifact: '#' header lines carrying the format version, schema
/// and provenance, followed by a CSV body (features then target).
std::string dataset_to_text(const EncodedDataset& ds);
EncodedDataset dataset_from_text(const std::string& text);
void save_dataset(const EncodedDataset& ds, const std::filesystem::path& path);
EncodedDataset load_dataset(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { csv, text };
ReportFormat report_format_from_string(const std::string& s);

/// "Model,Accuracy,Precision,Recall,F1,ROC-AUC", 4 decimals.
std::string comparison_csv(const EvaluationReport& report);
/// "group1,group2,meandiff,p-adj,lower,upper,reject", 4 decimals.
std::string tukey_csv(const std::vector<TukeyRow>& rows);
/// Aligned tables plus the ANOVA line.
std::string report_text(const EvaluationReport& report);

/// csv writes the comparison table to `path` and, when present, the Tukey
/// table to `<stem>_tukey.csv` beside it; text writes one document.
void save_report(const EvaluationReport& report, const std::filesystem::path& path, ReportFormat format);

/// "variable,<v1>,<v2>,..." square table, 4 decimals.
std::string correlation_csv(const CorrelationMatrix& corr);

// ---------------------------------------------------------------------------
// Cross-validation results (input to `compare`)

std::string eval_results_to_json(const std::vector<CvResult>& results);
std::vector<CvResult> eval_results_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Files

/// Writes to a temporary sibling and renames over `path`. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);
std::string sha256_hex(const std::string& data);

}  // namespace diabrisk
