#include "diabrisk/service.hpp"

#include <atomic>
#include <csignal>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <pthread.h>
#include <set>
#include <thread>

#include "diabrisk/error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace diabrisk {

using json = nlohmann::ordered_json;

RequestError::RequestError(std::vector<FieldError> errors)
    : ValidationError(errors.empty() ? "invalid request"
                                     : "invalid field '" + errors.front().field + "': " + errors.front().message),
      errors_(std::move(errors)) {}

std::vector<double> parse_assessment_request(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error&) {
    throw RequestError(std::vector<FieldError>{{"", "request body is not valid JSON"}});
  }
  if (!doc.is_object()) throw RequestError(std::vector<FieldError>{{"", "request body must be a JSON object"}});

  const auto& schema = brfss_schema();
  std::vector<FieldError> errors;
  std::vector<double> values(schema.size(), 0.0);
  for (std::size_t f = 0; f < schema.size(); ++f) {
    const auto& spec = schema[f];
    auto it = doc.find(spec.name);
    if (it == doc.end()) {
      errors.push_back({spec.name, "is required"});
      continue;
    }
    if (!it->is_number()) {
      errors.push_back({spec.name, "must be a number"});
      continue;
    }
    const double v = it->get<double>();
    char buf[128];
    if (!std::isfinite(v) || !spec.valid_range.contains(v)) {
      std::snprintf(buf, sizeof buf, "must be between %g and %g", spec.valid_range.lo, spec.valid_range.hi);
      errors.push_back({spec.name, buf});
      continue;
    }
    if (spec.kind != FeatureKind::continuous && v != std::floor(v)) {
      errors.push_back({spec.name, "must be a whole number"});
      continue;
    }
    values[f] = v;
  }
  for (const auto& [key, _] : doc.items())
    if (!schema.find(key)) errors.push_back({key, "is not a recognised field"});
  if (!errors.empty()) throw RequestError(std::move(errors));
  return values;
}

std::uint64_t request_seed(std::span<const double> inputs) {
  const auto names = brfss_schema().names();
  std::string canonical;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, inputs[i] == 0.0 ? 0.0 : inputs[i]);
    canonical += (i < names.size() ? names[i] : std::to_string(i)) + "=" + std::string(buf, res.ptr) + ";";
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------

AssessmentEngine::AssessmentEngine(ModelArtifact artifact, ServiceConfig config)
    : artifact_(std::move(artifact)), config_(std::move(config)) {
  if (!(config_.threshold > 0.0 && config_.threshold < 1.0))
    throw ValidationError("threshold must lie strictly between 0 and 1");
  if (config_.lime_samples < 100) throw ValidationError("LIME sample count must be at least 100");
  const auto& engineered = brfss_engineered_schema();
  for (const auto& f : artifact_.schema.features()) {
    auto idx = engineered.find(f.name);
    if (!idx) throw ValidationError("model feature '" + f.name + "' cannot be derived from an assessment request");
    column_map_.push_back(*idx);
  }
  correlations_ = artifact_.correlations ? *artifact_.correlations : reference_comorbidity_correlations();
}

std::vector<double> AssessmentEngine::model_row(std::span<const double> inputs) const {
  if (inputs.size() != brfss_schema().size())
    throw ValidationError("assessment needs " + std::to_string(brfss_schema().size()) + " predictor values");
  EncodedDataset one;
  one.schema = brfss_schema().with_target(columns::kTargetBinary);
  one.rows = Matrix(0, inputs.size());
  one.rows.append_row(inputs);
  one.target = {0};
  const auto full = engineer_features(one);
  std::vector<double> row(column_map_.size());
  for (std::size_t j = 0; j < column_map_.size(); ++j) row[j] = full.rows(0, column_map_[j]);
  return row;
}

RiskAssessment AssessmentEngine::assess(std::span<const double> inputs) const {
  const auto row = model_row(inputs);
  const auto& model = artifact_.model;

  RiskAssessment a;
  a.threshold = config_.threshold;
  a.probability = model.predict_proba(row);
  a.predicted_class = a.probability >= config_.threshold ? 1 : 0;
  a.scores = compute_scores(brfss_schema(), inputs);

  if (const auto* ens = model.ensemble()) a.shap = tree_shap(*ens, row);
  if (artifact_.discretizer) {
    LimeConfig cfg;
    cfg.n_samples = config_.lime_samples;
    auto fn = [&model](std::span<const double> z) { return model.predict_proba(z); };
    a.lime = lime_explain(fn, row, *artifact_.discretizer, cfg, request_seed(inputs));
  }

  std::vector<RankedContribution> support;
  if (a.shap) {
    support = top_contributions(*a.shap, 10);
  } else if (a.lime) {
    for (const auto& item : a.lime->items)
      support.push_back({artifact_.schema[item.feature].name, item.weight});
  }
  const auto& engineered = brfss_engineered_schema();
  std::vector<double> full(engineered.size(), 0.0);
  for (std::size_t j = 0; j < column_map_.size(); ++j) full[column_map_[j]] = row[j];
  for (std::size_t j = 0; j < inputs.size(); ++j) full[j] = inputs[j];
  a.recommendations = recommendations(engineered, full, support);
  a.comorbidity_alerts = comorbidity_alerts(engineered, full, a.predicted_class == 1, correlations_);
  return a;
}

// ---------------------------------------------------------------------------

namespace {

json shap_json(const ShapExplanation& e) {
  json contributions = json::array();
  for (std::size_t j = 0; j < e.contributions.size(); ++j)
    contributions.push_back({{"feature", e.feature_names[j]}, {"value", e.feature_values[j]}, {"phi", e.contributions[j]}});
  json j;
  j["base_value"] = e.base_value;
  j["output_margin"] = e.output_margin;
  j["probability"] = sigmoid(e.output_margin);
  j["contributions"] = std::move(contributions);
  return j;
}

json lime_json(const LimeExplanation& e, const Discretizer& disc) {
  json items = json::array();
  for (const auto& it : e.items)
    items.push_back({{"feature", disc.features()[it.feature].name}, {"condition", it.condition}, {"weight", it.weight}});
  json j;
  j["predicted_probability"] = e.predicted_probability;
  j["intercept"] = e.intercept;
  j["local_fit_quality"] = e.local_fit_quality;
  j["seed"] = std::to_string(e.seed);
  j["low_confidence"] = e.low_confidence;
  j["items"] = std::move(items);
  return j;
}

json schema_fields(const FeatureSchema& s) {
  json arr = json::array();
  for (const auto& f : s.features()) {
    json jf;
    jf["name"] = f.name;
    jf["kind"] = to_string(f.kind);
    jf["valid_range"] = {f.valid_range.lo, f.valid_range.hi};
    jf["typical_range"] = f.typical_range ? json{f.typical_range->lo, f.typical_range->hi} : json(nullptr);
    arr.push_back(std::move(jf));
  }
  return arr;
}

json meta_summary(const AssessmentEngine& engine) {
  const auto& a = engine.artifact();
  json j;
  j["format_version"] = a.format_version;
  j["family"] = to_string(a.model.family());
  j["model_name"] = a.training.model_name;
  j["training_strategy"] = a.training.sampling;
  j["seed"] = std::to_string(a.training.seed);
  return j;
}

json error_body(const std::string& message, const std::vector<FieldError>& fields = {}) {
  json j;
  j["error"] = message;
  if (!fields.empty()) {
    json arr = json::array();
    for (const auto& f : fields) arr.push_back({{"field", f.field}, {"message", f.message}});
    j["fields"] = std::move(arr);
  }
  return j;
}

}  // namespace

std::string shap_to_json(const ShapExplanation& e) { return shap_json(e).dump(); }

std::string lime_to_json(const LimeExplanation& e, const Discretizer& disc) { return lime_json(e, disc).dump(); }

std::string assessment_to_json(const RiskAssessment& a, const AssessmentEngine& engine) {
  json j;
  j["probability"] = a.probability;
  j["predicted_class"] = a.predicted_class;
  j["threshold"] = a.threshold;
  j["lifestyle_score"] = a.scores.lifestyle_score;
  j["healthcare_score"] = a.scores.healthcare_access_score;
  j["risk_factor_count"] = a.scores.risk_factor_count;
  j["shap"] = a.shap ? shap_json(*a.shap) : json(nullptr);
  j["lime"] = a.lime ? lime_json(*a.lime, *engine.artifact().discretizer) : json(nullptr);
  json recs = json::array();
  for (const auto& r : a.recommendations)
    recs.push_back({{"trigger_feature", r.trigger_feature},
                    {"trigger_condition", r.trigger_condition},
                    {"message", r.message},
                    {"priority", r.priority}});
  j["recommendations"] = std::move(recs);
  json alerts = json::array();
  for (const auto& al : a.comorbidity_alerts)
    alerts.push_back({{"condition", al.condition},
                      {"label", al.label},
                      {"correlation_with_diabetes", al.correlation_with_diabetes},
                      {"severity", to_string(al.severity)},
                      {"message", al.message}});
  j["comorbidity_alerts"] = std::move(alerts);
  j["model_meta"] = meta_summary(engine);
  return j.dump();
}

std::string model_meta_json(const AssessmentEngine& engine) {
  const auto& a = engine.artifact();
  json j = meta_summary(engine);
  json params = json::object();
  for (const auto& [k, v] : a.model.params()) params[k] = v;
  j["params"] = std::move(params);
  j["threshold"] = engine.config().threshold;
  j["lime_samples"] = engine.config().lime_samples;
  j["cv_folds"] = a.training.cv_folds;
  j["cv_recall"] = a.training.cv_recall;
  j["training_rows"] = a.training.training_rows;
  j["timestamp"] = a.training.timestamp;
  j["input_features"] = schema_fields(brfss_schema());
  j["model_features"] = a.schema.names();
  j["has_shap"] = a.model.ensemble() != nullptr;
  j["has_lime"] = a.discretizer.has_value();
  return j.dump();
}

std::string comorbidity_json(const AssessmentEngine& engine) {
  const auto& c = engine.correlations();
  json r = json::array();
  for (const auto& row : c.r) {
    json jr = json::array();
    for (double v : row) jr.push_back(std::isnan(v) ? json(nullptr) : json(v));
    r.push_back(std::move(jr));
  }
  json j;
  j["source"] = engine.correlations_from_training() ? "training" : "reference";
  j["variables"] = c.variables;
  j["r"] = std::move(r);
  j["excluded"] = c.excluded;
  return j.dump();
}

// ---------------------------------------------------------------------------

ServiceRouter::ServiceRouter(const AssessmentEngine* engine, ServiceConfig config)
    : engine_(engine), config_(std::move(config)) {}

HttpResponse ServiceRouter::handle(const std::string& method, const std::string& path, const std::string& body) const {
  auto respond = [](int status, const json& j) { return HttpResponse{status, "application/json", j.dump()}; };
  static const std::set<std::string> known{"/assess", "/model/meta", "/insights/comorbidity", "/health"};
  if (!known.count(path)) return respond(404, error_body("no such endpoint: " + path));
  if (method == "OPTIONS") return HttpResponse{204, "text/plain", ""};

  const std::string expected = path == "/assess" ? "POST" : "GET";
  if (method != expected) return respond(405, error_body(path + " accepts " + expected + " only"));
  if (path == "/health") return HttpResponse{200, "text/plain", "ok"};
  if (!engine_) return respond(503, error_body("no model loaded"));

  try {
    if (path == "/model/meta") return HttpResponse{200, "application/json", model_meta_json(*engine_)};
    if (path == "/insights/comorbidity") return HttpResponse{200, "application/json", comorbidity_json(*engine_)};
    const auto inputs = parse_assessment_request(body);
    return HttpResponse{200, "application/json", assessment_to_json(engine_->assess(inputs), *engine_)};
  } catch (const RequestError& e) {
    return respond(400, error_body("invalid request", e.errors()));
  } catch (const ValidationError& e) {
    return respond(400, error_body(e.what()));
  } catch (const std::exception& e) {
    return respond(500, error_body(e.what()));
  }
}

void run_http_server(const ServiceRouter& router, const std::string& host, int port) {
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  httplib::Server server;
  const std::string origin = router.config().allowed_origin;
  auto dispatch = [&router, origin](const httplib::Request& req, httplib::Response& res) {
    const auto out = router.handle(req.method, req.path, req.body);
    res.status = out.status;
    res.set_header("Access-Control-Allow-Origin", origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    if (!out.body.empty() || out.status != 204) res.set_content(out.body, out.content_type);
  };
  const std::string any = R"(/.*)";
  server.Get(any, dispatch);
  server.Post(any, dispatch);
  server.Put(any, dispatch);
  server.Delete(any, dispatch);
  server.Options(any, dispatch);

  if (!server.bind_to_port(host, port)) {
    pthread_sigmask(SIG_UNBLOCK, &stop_signals, nullptr);
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  std::atomic<bool> done{false};
  std::thread waiter([&server, &done, stop_signals] {
    const timespec tick{0, 200'000'000};
    while (!done.load()) {
      if (sigtimedwait(&stop_signals, nullptr, &tick) > 0) {
        server.stop();
        return;
      }
    }
  });
  std::fprintf(stderr, "listening on http://%s:%d\n", host.c_str(), port);
  server.listen_after_bind();
  done.store(true);
  waiter.join();
  pthread_sigmask(SIG_UNBLOCK, &stop_signals, nullptr);
}

}  // namespace diabrisk
