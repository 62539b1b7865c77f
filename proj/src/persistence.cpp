#include "diabrisk/persistence.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unistd.h>

#include "diabrisk/error.hpp"
#include "json.hpp"

namespace diabrisk {

using json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Schema, trees, models

json range_to_json(const ValueRange& r) { return json::array({r.lo, r.hi}); }

ValueRange range_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("range must be a two-element array");
  return {j[0].get<double>(), j[1].get<double>()};
}

json schema_to_json(const FeatureSchema& s) {
  json features = json::array();
  for (const auto& f : s.features()) {
    json jf;
    jf["name"] = f.name;
    jf["kind"] = to_string(f.kind);
    jf["valid_range"] = range_to_json(f.valid_range);
    jf["typical_range"] = f.typical_range ? range_to_json(*f.typical_range) : json(nullptr);
    features.push_back(std::move(jf));
  }
  json j;
  j["target"] = s.target_name();
  j["features"] = std::move(features);
  return j;
}

FeatureSchema schema_from_json(const json& j) {
  std::vector<FeatureSpec> specs;
  for (const auto& jf : j.at("features")) {
    FeatureSpec f;
    f.name = jf.at("name").get<std::string>();
    f.kind = feature_kind_from_string(jf.at("kind").get<std::string>());
    f.valid_range = range_from_json(jf.at("valid_range"));
    if (!jf.at("typical_range").is_null()) f.typical_range = range_from_json(jf.at("typical_range"));
    specs.push_back(std::move(f));
  }
  return FeatureSchema(std::move(specs), j.at("target").get<std::string>());
}

json tree_to_json(const Tree& t) {
  json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
       value = json::array(), cover = json::array();
  for (const auto& n : t.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
    cover.push_back(n.cover);
  }
  json j;
  j["split_feature"] = std::move(feature);
  j["threshold"] = std::move(threshold);
  j["left"] = std::move(left);
  j["right"] = std::move(right);
  j["leaf_value"] = std::move(value);
  j["cover"] = std::move(cover);
  return j;
}

Tree tree_from_json(const json& j, std::size_t n_features) {
  const auto& feature = j.at("split_feature");
  const std::size_t n = feature.size();
  for (const char* key : {"threshold", "left", "right", "leaf_value", "cover"})
    if (j.at(key).size() != n) throw ValidationError(std::string("tree array '") + key + "' has the wrong length");
  if (n == 0) throw ValidationError("tree has no nodes");
  Tree t;
  t.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& node = t.nodes[i];
    node.feature = feature[i].get<int>();
    node.threshold = j["threshold"][i].get<double>();
    node.left = j["left"][i].get<int>();
    node.right = j["right"][i].get<int>();
    node.value = j["leaf_value"][i].get<double>();
    node.cover = j["cover"][i].get<double>();
  }
  t.validate(n_features);
  return t;
}

json doubles(const std::vector<double>& v) { return json(v); }

std::vector<double> doubles_from(const json& j) {
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(v.is_null() ? std::nan("") : v.get<double>());
  return out;
}

json standardizer_to_json(const Standardizer& s) {
  json j;
  j["mean"] = doubles(s.mean);
  j["scale"] = doubles(s.scale);
  return j;
}

Standardizer standardizer_from_json(const json& j, std::size_t p) {
  Standardizer s;
  s.mean = doubles_from(j.at("mean"));
  s.scale = doubles_from(j.at("scale"));
  if (s.mean.size() != p || s.scale.size() != p) throw ValidationError("standardizer width does not match schema");
  return s;
}

json params_to_json(const ParamMap& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

ParamMap params_from_json(const json& j) {
  ParamMap m;
  for (const auto& [k, v] : j.items()) m[k] = v.get<double>();
  return m;
}

json model_state_to_json(const Classifier& c) {
  json j;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LogisticModel>) {
          j["standardizer"] = standardizer_to_json(m.standardizer);
          j["weights"] = doubles(m.weights);
          j["intercept"] = m.intercept;
          j["iterations"] = m.iterations;
          j["final_gradient_norm"] = m.final_gradient_norm;
        } else if constexpr (std::is_same_v<T, TreeModel>) {
          j["tree"] = tree_to_json(m.tree);
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          json trees = json::array();
          for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
          j["trees"] = std::move(trees);
        } else if constexpr (std::is_same_v<T, GbdtModel>) {
          j["base_score"] = m.ensemble.base_score;
          j["learning_rate"] = m.ensemble.learning_rate;
          j["num_leaves"] = m.ensemble.num_leaves;
          j["n_trees"] = m.ensemble.n_trees;
          j["growth"] = to_string(m.ensemble.growth);
          json trees = json::array();
          for (const auto& t : m.ensemble.trees) trees.push_back(tree_to_json(t));
          j["trees"] = std::move(trees);
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          j["standardizer"] = m.params.standardize ? standardizer_to_json(m.standardizer) : json(nullptr);
          j["rows"] = m.train.rows();
          j["cols"] = m.train.cols();
          j["train"] = doubles(m.train.data());
          j["labels"] = m.labels;
        }
      },
      c.state());
  return j;
}

Classifier model_state_from_json(ModelFamily family, const ParamMap& params, const json& j,
                                 const std::vector<std::string>& names) {
  const std::size_t p = names.size();
  switch (family) {
    case ModelFamily::logistic: {
      LogisticModel m;
      m.params = logistic_params(params);
      m.standardizer = standardizer_from_json(j.at("standardizer"), p);
      m.weights = doubles_from(j.at("weights"));
      if (m.weights.size() != p) throw ValidationError("logistic weights do not match schema width");
      m.intercept = j.at("intercept").get<double>();
      m.iterations = j.at("iterations").get<int>();
      m.final_gradient_norm = j.at("final_gradient_norm").get<double>();
      return Classifier(std::move(m), names);
    }
    case ModelFamily::tree: {
      TreeModel m;
      m.params = tree_params(params);
      m.tree = tree_from_json(j.at("tree"), p);
      return Classifier(std::move(m), names);
    }
    case ModelFamily::forest: {
      ForestModel m;
      m.params = forest_params(params);
      for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t, p));
      if (m.trees.empty()) throw ValidationError("forest has no trees");
      return Classifier(std::move(m), names);
    }
    case ModelFamily::gbdt: {
      GbdtModel m;
      m.params = gbdt_params(params);
      m.ensemble.base_score = j.at("base_score").get<double>();
      m.ensemble.learning_rate = j.at("learning_rate").get<double>();
      m.ensemble.num_leaves = j.at("num_leaves").get<int>();
      m.ensemble.n_trees = j.at("n_trees").get<int>();
      m.ensemble.growth = growth_policy_from_string(j.at("growth").get<std::string>());
      m.ensemble.feature_names = names;
      for (const auto& t : j.at("trees")) m.ensemble.trees.push_back(tree_from_json(t, p));
      return Classifier(std::move(m), names);
    }
    case ModelFamily::knn: {
      KnnModel m;
      m.params = knn_params(params);
      if (m.params.standardize) m.standardizer = standardizer_from_json(j.at("standardizer"), p);
      const auto rows = j.at("rows").get<std::size_t>();
      const auto cols = j.at("cols").get<std::size_t>();
      if (cols != p) throw ValidationError("knn training width does not match schema");
      m.train = Matrix(rows, cols, doubles_from(j.at("train")));
      m.labels = j.at("labels").get<std::vector<int>>();
      if (m.labels.size() != rows) throw ValidationError("knn labels do not match training rows");
      if (m.params.k < 1 || static_cast<std::size_t>(m.params.k) > rows)
        throw ValidationError("knn k is out of range for the stored training rows");
      return Classifier(std::move(m), names);
    }
  }
  throw ValidationError("unknown model family");
}

json discretizer_to_json(const Discretizer& d) {
  json features = json::array();
  for (const auto& f : d.features()) {
    json jf;
    jf["name"] = f.name;
    jf["categorical"] = f.categorical;
    jf["boundaries"] = doubles(f.boundaries);
    jf["levels"] = doubles(f.levels);
    jf["representatives"] = doubles(f.representatives);
    features.push_back(std::move(jf));
  }
  return json{{"features", std::move(features)}};
}

Discretizer discretizer_from_json(const json& j) {
  std::vector<Discretizer::FeatureBins> bins;
  for (const auto& jf : j.at("features")) {
    Discretizer::FeatureBins b;
    b.name = jf.at("name").get<std::string>();
    b.categorical = jf.at("categorical").get<bool>();
    b.boundaries = doubles_from(jf.at("boundaries"));
    b.levels = doubles_from(jf.at("levels"));
    b.representatives = doubles_from(jf.at("representatives"));
    bins.push_back(std::move(b));
  }
  return Discretizer(std::move(bins));
}

json correlations_to_json(const CorrelationMatrix& c) {
  json r = json::array();
  for (const auto& row : c.r) r.push_back(doubles(row));
  json j;
  j["variables"] = c.variables;
  j["r"] = std::move(r);
  j["excluded"] = c.excluded;
  return j;
}

CorrelationMatrix correlations_from_json(const json& j) {
  CorrelationMatrix c;
  c.variables = j.at("variables").get<std::vector<std::string>>();
  for (const auto& row : j.at("r")) {
    c.r.push_back(doubles_from(row));
    if (c.r.back().size() != c.variables.size()) throw ValidationError("correlation matrix is not square");
  }
  if (c.r.size() != c.variables.size()) throw ValidationError("correlation matrix is not square");
  c.excluded = j.at("excluded").get<std::vector<std::string>>();
  return c;
}

json training_to_json(const TrainingMetadata& t) {
  json j;
  j["model_name"] = t.model_name;
  j["sampling"] = t.sampling;
  j["seed"] = t.seed;
  j["cv_folds"] = t.cv_folds;
  j["cv_recall"] = doubles(t.cv_recall);
  j["training_rows"] = t.training_rows;
  j["timestamp"] = t.timestamp;
  j["data_sha256"] = t.data_sha256;
  return j;
}

TrainingMetadata training_from_json(const json& j) {
  TrainingMetadata t;
  t.model_name = j.at("model_name").get<std::string>();
  t.sampling = j.at("sampling").get<std::string>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.cv_folds = j.at("cv_folds").get<int>();
  t.cv_recall = doubles_from(j.at("cv_recall"));
  t.training_rows = j.at("training_rows").get<std::size_t>();
  t.timestamp = j.at("timestamp").get<std::string>();
  t.data_sha256 = j.at("data_sha256").get<std::string>();
  return t;
}

json parse_document(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string(what) + " is truncated or malformed: " + e.what());
  }
}

void check_header(const json& doc, const char* format, int version) {
  if (!doc.is_object() || !doc.contains("format") || doc["format"] != format)
    throw ValidationError(std::string("not a ") + format + " document");
  const int v = doc.at("format_version").get<int>();
  if (v != version)
    throw ValidationError(std::string(format) + " format_version " + std::to_string(v) + " is not supported (expected " +
                          std::to_string(version) + ")");
}

// Rethrows library-level JSON access errors as validation errors.
template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ValidationError(std::string(what) + " is invalid: " + e.what());
  }
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fixed4(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  if (std::string(buf) == "-0.0000") return "0.0000";
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string aligned(const std::vector<std::vector<std::string>>& table) {
  std::vector<std::size_t> width;
  for (const auto& row : table) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : table) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == 0) {
        line += row[c] + std::string(width[c] - row[c].size(), ' ');
      } else {
        line += "  " + std::string(width[c] - row[c].size(), ' ') + row[c];
      }
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

std::vector<std::vector<std::string>> comparison_rows(const EvaluationReport& r) {
  std::vector<std::vector<std::string>> t{{"Model", "Accuracy", "Precision", "Recall", "F1", "ROC-AUC"}};
  for (const auto& row : r.rows) {
    const auto& m = row.metrics;
    t.push_back({row.model, fixed4(m.accuracy), fixed4(m.precision), fixed4(m.recall), fixed4(m.f1),
                 fixed4(m.roc_auc)});
  }
  return t;
}

std::vector<std::vector<std::string>> tukey_rows(const std::vector<TukeyRow>& rows) {
  std::vector<std::vector<std::string>> t{{"group1", "group2", "meandiff", "p-adj", "lower", "upper", "reject"}};
  for (const auto& r : rows)
    t.push_back({r.group1, r.group2, fixed4(r.meandiff), fixed4(r.p_adj), fixed4(r.lower), fixed4(r.upper),
                 r.reject ? "True" : "False"});
  return t;
}

std::string to_csv(const std::vector<std::vector<std::string>>& t) {
  std::string out;
  for (const auto& row : t) {
    for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + csv_field(row[c]);
    out += "\n";
  }
  return out;
}

json metrics_to_json(const MetricSet& m) {
  auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  json j;
  j["accuracy"] = num(m.accuracy);
  j["precision"] = num(m.precision);
  j["recall"] = num(m.recall);
  j["f1"] = num(m.f1);
  j["roc_auc"] = num(m.roc_auc);
  j["recall_undefined"] = m.recall_undefined;
  j["auc_undefined"] = m.auc_undefined;
  return j;
}

MetricSet metrics_from_json(const json& j) {
  auto num = [](const json& v) { return v.is_null() ? std::nan("") : v.get<double>(); };
  MetricSet m;
  m.accuracy = num(j.at("accuracy"));
  m.precision = num(j.at("precision"));
  m.recall = num(j.at("recall"));
  m.f1 = num(j.at("f1"));
  m.roc_auc = num(j.at("roc_auc"));
  m.recall_undefined = j.at("recall_undefined").get<bool>();
  m.auc_undefined = j.at("auc_undefined").get<bool>();
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string model_to_json(const ModelArtifact& a) {
  if (a.schema.size() != a.model.feature_count())
    throw ValidationError("artifact schema width does not match the model");
  json doc;
  doc["format"] = "diabrisk-model";
  doc["format_version"] = kModelFormatVersion;
  doc["family"] = to_string(a.model.family());
  doc["params"] = params_to_json(a.model.params());
  doc["schema"] = schema_to_json(a.schema);
  doc["model"] = model_state_to_json(a.model);
  doc["discretizer"] = a.discretizer ? discretizer_to_json(*a.discretizer) : json(nullptr);
  doc["correlations"] = a.correlations ? correlations_to_json(*a.correlations) : json(nullptr);
  doc["training"] = training_to_json(a.training);
  return doc.dump(1) + "\n";
}

ModelArtifact model_from_json(const std::string& text) {
  const json doc = parse_document(text, "model artifact");
  return guarded("model artifact", [&] {
    check_header(doc, "diabrisk-model", kModelFormatVersion);
    ModelArtifact a;
    a.schema = schema_from_json(doc.at("schema"));
    const auto family = model_family_from_string(doc.at("family").get<std::string>());
    const auto params = params_from_json(doc.at("params"));
    a.model = model_state_from_json(family, params, doc.at("model"), a.schema.names());
    if (!doc.at("discretizer").is_null()) {
      a.discretizer = discretizer_from_json(doc["discretizer"]);
      if (a.discretizer->feature_count() != a.schema.size())
        throw ValidationError("discretizer width does not match schema");
      for (std::size_t f = 0; f < a.schema.size(); ++f)
        if (a.discretizer->features()[f].name != a.schema[f].name)
          throw ValidationError("discretizer feature order does not match schema");
    }
    if (!doc.at("correlations").is_null()) a.correlations = correlations_from_json(doc["correlations"]);
    a.training = training_from_json(doc.at("training"));
    return a;
  });
}

void save_model(const ModelArtifact& artifact, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_json(artifact));
}

ModelArtifact load_model(const std::filesystem::path& path) { return model_from_json(read_file(path)); }

// ---------------------------------------------------------------------------

std::string dataset_to_text(const EncodedDataset& ds) {
  std::string out = "#diabrisk-dataset " + std::to_string(kDatasetFormatVersion) + "\n";
  out += "#schema " + schema_to_json(ds.schema).dump() + "\n";
  out += "#provenance " + json(ds.provenance).dump() + "\n";
  const auto names = ds.schema.names();
  for (const auto& n : names) out += n + ",";
  out += ds.schema.target_name() + "\n";
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (double v : ds.rows.row(r)) out += shortest(v) + ",";
    out += std::to_string(ds.target[r]) + "\n";
  }
  return out;
}

EncodedDataset dataset_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto header = [&](const std::string& prefix) {
    if (!std::getline(in, line) || line.rfind(prefix, 0) != 0)
      throw ValidationError("dataset artifact is missing its '" + prefix + "' header");
    return line.substr(prefix.size());
  };
  const std::string version = header("#diabrisk-dataset ");
  if (version != std::to_string(kDatasetFormatVersion))
    throw ValidationError("dataset format_version " + version + " is not supported (expected " +
                          std::to_string(kDatasetFormatVersion) + ")");
  EncodedDataset ds;
  guarded("dataset artifact", [&] {
    ds.schema = schema_from_json(parse_document(header("#schema "), "dataset schema"));
    ds.provenance = parse_document(header("#provenance "), "dataset provenance").get<std::vector<std::string>>();
    return 0;
  });
  const std::size_t p = ds.schema.size();
  if (!std::getline(in, line)) throw ValidationError("dataset artifact is missing its column header");
  std::string expected;
  for (const auto& n : ds.schema.names()) expected += n + ",";
  expected += ds.schema.target_name();
  if (line != expected) throw ValidationError("dataset column header does not match its schema");

  ds.rows = Matrix(0, p);
  std::vector<double> row(p);
  std::size_t line_no = 4;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const char* cur = line.data();
    const char* end = line.data() + line.size();
    for (std::size_t c = 0; c <= p; ++c) {
      double v = 0;
      auto res = std::from_chars(cur, end, v);
      if (res.ec != std::errc() || (c < p && (res.ptr == end || *res.ptr != ',')) || (c == p && res.ptr != end))
        throw ValidationError("dataset artifact line " + std::to_string(line_no) + " is malformed");
      if (c < p) {
        row[c] = v;
        cur = res.ptr + 1;
      } else {
        if (v != 0.0 && v != 1.0)
          throw ValidationError("dataset artifact line " + std::to_string(line_no) + " has a non-binary target");
        ds.target.push_back(static_cast<int>(v));
      }
    }
    ds.rows.append_row(row);
  }
  return ds;
}

void save_dataset(const EncodedDataset& ds, const std::filesystem::path& path) {
  write_file_atomic(path, dataset_to_text(ds));
}

EncodedDataset load_dataset(const std::filesystem::path& path) { return dataset_from_text(read_file(path)); }

// ---------------------------------------------------------------------------

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "text" || s == "txt") return ReportFormat::text;
  throw ValidationError("unknown report format '" + s + "'");
}

std::string comparison_csv(const EvaluationReport& report) { return to_csv(comparison_rows(report)); }

std::string tukey_csv(const std::vector<TukeyRow>& rows) { return to_csv(tukey_rows(rows)); }

std::string report_text(const EvaluationReport& report) {
  std::string out = "Sampling: " + report.strategy + "\n\n" + aligned(comparison_rows(report));
  if (report.anova) {
    const auto& a = *report.anova;
    char buf[160];
    std::snprintf(buf, sizeof buf, "\nANOVA on fold recall: F(%d, %d) = %.4f, p = %.4e%s\n", a.df_between,
                  a.df_within, a.f_stat, a.p_value, a.degenerate ? " (zero within-group variance)" : "");
    out += buf;
  }
  if (!report.tukey.empty()) {
    out += "\nTukey HSD (alpha = " + fixed4(report.alpha) + ")\n";
    out += aligned(tukey_rows(report.tukey));
  }
  return out;
}

void save_report(const EvaluationReport& report, const std::filesystem::path& path, ReportFormat format) {
  if (format == ReportFormat::text) {
    write_file_atomic(path, report_text(report));
    return;
  }
  write_file_atomic(path, comparison_csv(report));
  if (!report.tukey.empty()) {
    auto tukey_path = path;
    tukey_path.replace_filename(path.stem().string() + "_tukey" + path.extension().string());
    write_file_atomic(tukey_path, tukey_csv(report.tukey));
  }
}

std::string correlation_csv(const CorrelationMatrix& corr) {
  std::vector<std::vector<std::string>> t;
  std::vector<std::string> head{"variable"};
  head.insert(head.end(), corr.variables.begin(), corr.variables.end());
  t.push_back(head);
  for (std::size_t i = 0; i < corr.variables.size(); ++i) {
    std::vector<std::string> row{corr.variables[i]};
    for (double v : corr.r[i]) row.push_back(fixed4(v));
    t.push_back(row);
  }
  return to_csv(t);
}

// ---------------------------------------------------------------------------

std::string eval_results_to_json(const std::vector<CvResult>& results) {
  json arr = json::array();
  for (const auto& r : results) {
    json j;
    j["model_name"] = r.model_name;
    j["family"] = to_string(r.config.family);
    j["params"] = params_to_json(r.config.params);
    j["sampling"] = to_string(r.strategy.kind);
    j["k_neighbors"] = r.strategy.k_neighbors;
    j["k"] = r.k;
    j["seed"] = r.seed;
    j["recall"] = doubles(r.recall);
    json folds = json::array();
    for (const auto& f : r.folds) folds.push_back(metrics_to_json(f));
    j["folds"] = std::move(folds);
    arr.push_back(std::move(j));
  }
  json doc;
  doc["format"] = "diabrisk-eval";
  doc["format_version"] = kEvalFormatVersion;
  doc["results"] = std::move(arr);
  return doc.dump(1) + "\n";
}

std::vector<CvResult> eval_results_from_json(const std::string& text) {
  const json doc = parse_document(text, "evaluation results");
  return guarded("evaluation results", [&] {
    check_header(doc, "diabrisk-eval", kEvalFormatVersion);
    std::vector<CvResult> out;
    for (const auto& j : doc.at("results")) {
      CvResult r;
      r.model_name = j.at("model_name").get<std::string>();
      r.config = {r.model_name, model_family_from_string(j.at("family").get<std::string>()),
                  params_from_json(j.at("params"))};
      r.strategy.kind = sampling_kind_from_string(j.at("sampling").get<std::string>());
      r.strategy.k_neighbors = j.at("k_neighbors").get<int>();
      r.k = j.at("k").get<int>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.recall = doubles_from(j.at("recall"));
      for (const auto& f : j.at("folds")) r.folds.push_back(metrics_from_json(f));
      if (r.folds.size() != r.recall.size()) throw ValidationError("fold metrics and recall lengths differ");
      out.push_back(std::move(r));
    }
    return out;
  });
}

// ---------------------------------------------------------------------------

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write '" + tmp.string() + "'");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    if (!f) {
      std::filesystem::remove(tmp, ec);
      throw IoError("failed writing '" + tmp.string() + "'");
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot replace '" + path.string() + "'");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw NumericError("sha256 computation failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

}  // namespace diabrisk
