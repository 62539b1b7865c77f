#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diabrisk/dataset.hpp"
#include "diabrisk/explain.hpp"
#include "diabrisk/insights.hpp"
#include "diabrisk/lime.hpp"
#include "diabrisk/persistence.hpp"

namespace diabrisk {

struct ServiceConfig {
  double threshold = 0.5;
  int lime_samples = 5000;
  std::string allowed_origin = "*";
};

struct FieldError {
  std::string field;
  std::string message;
};

/// Request validation failure carrying one message per offending field.
class RequestError : public ValidationError {
 public:
  explicit RequestError(std::vector<FieldError> errors);
  const std::vector<FieldError>& errors() const { return errors_; }

 private:
  std::vector<FieldError> errors_;
};

/// Parses an assessment body: a JSON object holding exactly the 21 predictor
/// fields. Values come back in brfss_schema() order.
std::vector<double> parse_assessment_request(const std::string& body);

/// Stable 64-bit FNV-1a over the canonical form of the inputs; the LIME seed
/// for that request.
std::uint64_t request_seed(std::span<const double> inputs);

struct RiskAssessment {
  double probability = 0.0;
  int predicted_class = 0;
  double threshold = 0.5;
  CompositeScores scores;
  std::optional<ShapExplanation> shap;
  std::optional<LimeExplanation> lime;
  std::vector<Recommendation> recommendations;
  std::vector<ComorbidityAlert> comorbidity_alerts;
};

/// Prediction, explanation and insight logic over an immutable artifact.
/// Safe to share across threads.
class AssessmentEngine {
 public:
  AssessmentEngine(ModelArtifact artifact, ServiceConfig config = {});

  const ModelArtifact& artifact() const { return artifact_; }
  const ServiceConfig& config() const { return config_; }

  /// `inputs` are the 21 predictors in brfss_schema() order.
  RiskAssessment assess(std::span<const double> inputs) const;
  /// Full model-space row (engineered columns appended, artifact order).
  std::vector<double> model_row(std::span<const double> inputs) const;
  const CorrelationMatrix& correlations() const { return correlations_; }
  bool correlations_from_training() const { return artifact_.correlations.has_value(); }

 private:
  ModelArtifact artifact_;
  ServiceConfig config_;
  CorrelationMatrix correlations_;
  std::vector<std::size_t> column_map_;  // artifact column -> engineered-row column
};

std::string assessment_to_json(const RiskAssessment& a, const AssessmentEngine& engine);
std::string model_meta_json(const AssessmentEngine& engine);
std::string comorbidity_json(const AssessmentEngine& engine);
std::string shap_to_json(const ShapExplanation& e);
std::string lime_to_json(const LimeExplanation& e, const Discretizer& disc);

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// HTTP routing independent of any server library. `engine` may be null,
/// in which case model endpoints answer 503.
class ServiceRouter {
 public:
  ServiceRouter(const AssessmentEngine* engine, ServiceConfig config = {});
  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body) const;
  const ServiceConfig& config() const { return config_; }

 private:
  const AssessmentEngine* engine_;
  ServiceConfig config_;
};

/// Blocks serving `router` until SIGINT/SIGTERM, then drains in-flight
/// requests. Throws IoError when the port cannot be bound.
void run_http_server(const ServiceRouter& router, const std::string& host, int port);

}  // namespace diabrisk
