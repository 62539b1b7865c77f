#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "diabrisk/error.hpp"
#include "diabrisk/evaluation.hpp"
#include "diabrisk/explain.hpp"
#include "diabrisk/insights.hpp"
#include "diabrisk/lime.hpp"
#include "diabrisk/persistence.hpp"
#include "diabrisk/rng.hpp"
#include "diabrisk/service.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace diabrisk;

namespace {

constexpr const char* kVersion = "1.0.0";

// Records the flags, seeds and file hashes of one run; written next to the
// command's primary output as <output>.manifest.json.
class RunManifest {
 public:
  explicit RunManifest(const CLI::App& cmd) {
    doc_["tool"] = "diabrisk";
    doc_["version"] = kVersion;
    doc_["command"] = cmd.get_name();
    const std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
    doc_["started_at"] = stamp;
    json flags = json::object();
    for (const auto* opt : cmd.get_options()) {
      if (opt->get_name() == "--help") continue;
      const auto& res = opt->results();
      std::string key = opt->get_name();
      while (!key.empty() && key.front() == '-') key.erase(0, 1);
      if (res.empty()) {
        if (!opt->get_default_str().empty()) flags[key] = opt->get_default_str();
      } else if (res.size() == 1) {
        flags[key] = res.front();
      } else {
        flags[key] = res;
      }
    }
    doc_["flags"] = std::move(flags);
    doc_["seeds"] = json::object();
    doc_["inputs"] = json::array();
    doc_["outputs"] = json::array();
  }

  void seed(const std::string& name, std::uint64_t value) { doc_["seeds"][name] = std::to_string(value); }
  void input(const fs::path& p) { doc_["inputs"].push_back(file_entry(p)); }
  void output(const fs::path& p) { doc_["outputs"].push_back(file_entry(p)); }
  void note(const std::string& key, json value) { doc_[key] = std::move(value); }

  void write_beside(const fs::path& primary) const {
    write_file_atomic(fs::path(primary.string() + ".manifest.json"), doc_.dump(2) + "\n");
  }

 private:
  static json file_entry(const fs::path& p) {
    return json{{"path", p.string()}, {"sha256", sha256_hex(read_file(p))}};
  }
  json doc_;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

double parse_number(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw ValidationError(what + ": '" + text + "' is not a number");
  return v;
}

// "key=value" pairs; a "family." prefix restricts the pair to one family.
ParamMap params_for(ModelFamily family, const std::vector<std::string>& pairs) {
  ParamMap out;
  const std::string fam = to_string(family);
  for (const auto& p : pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw ValidationError("parameter '" + p + "' must look like key=value");
    std::string key = p.substr(0, eq);
    const auto dot = key.find('.');
    if (dot != std::string::npos) {
      model_family_from_string(key.substr(0, dot));
      if (key.substr(0, dot) != fam) continue;
      key = key.substr(dot + 1);
    }
    out[key] = parse_number(p.substr(eq + 1), "parameter " + key);
  }
  return out;
}

ParamGrid load_grid(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError("grid file " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ValidationError("grid file must hold an object of name -> list of values");
  ParamGrid grid;
  for (const auto& [key, values] : doc.items()) {
    if (!values.is_array() || values.empty())
      throw ValidationError("grid entry '" + key + "' must be a non-empty list of numbers");
    std::vector<double> vs;
    for (const auto& v : values) {
      if (!v.is_number()) throw ValidationError("grid entry '" + key + "' must contain numbers only");
      vs.push_back(v.get<double>());
    }
    grid.emplace_back(key, std::move(vs));
  }
  return grid;
}

std::vector<double> row_for_model(const EncodedDataset& ds, std::size_t r, const FeatureSchema& model_schema) {
  std::vector<double> row;
  for (const auto& f : model_schema.features()) row.push_back(ds.rows(r, ds.schema.index_of(f.name)));
  return row;
}

void print_split(const EncodedDataset& ds) {
  const double pos = ds.positive_rate();
  std::printf("class split: %.2f%% negative / %.2f%% positive (%zu / %zu)\n", 100.0 * (1.0 - pos), 100.0 * pos,
              ds.count_label(0), ds.count_label(1));
}

// --------------------------------------------------------------------------

struct PrepareArgs {
  std::string input, schema = "brfss2015", output;
};

int run_prepare(const PrepareArgs& a, const CLI::App& cmd) {
  if (a.schema != "brfss2015") throw ValidationError("unknown schema '" + a.schema + "' (expected brfss2015)");
  const auto raw = load_csv(a.input, brfss_schema());
  const auto prepared = prepare_dataset(raw);
  const auto& ds = prepared.dataset;
  std::printf("raw rows: %zu\n", prepared.raw_rows);
  std::printf("after recode: %zu\n", prepared.after_recode);
  std::printf("duplicates removed: %zu\n", prepared.duplicates_removed);
  std::printf("rows: %zu\n", ds.size());
  print_split(ds);
  std::printf("range violations: %zu, extreme values: %zu\n", prepared.validation.violations.size(),
              prepared.validation.extremes.size());
  save_dataset(ds, a.output);
  RunManifest m(cmd);
  m.input(a.input);
  m.output(a.output);
  m.note("rows", ds.size());
  m.write_beside(a.output);
  return 0;
}

struct TrainArgs {
  std::string data, model, sampling = "none", grid, out, name;
  std::vector<std::string> params;
  std::uint64_t seed = 42;
  int cv = 10;
  int smote_k = 5;
};

int run_train(const TrainArgs& a, const CLI::App& cmd) {
  const auto ds = load_dataset(a.data);
  const auto family = model_family_from_string(a.model);
  RunManifest m(cmd);
  m.input(a.data);
  m.seed("seed", a.seed);

  SamplingStrategy strategy{sampling_kind_from_string(a.sampling), a.smote_k, derive_seed(a.seed, 1)};
  ModelConfig config{a.name, family, params_for(family, a.params)};
  if (config.name.empty()) config.name = default_model_name(family, config.params);

  std::optional<CvResult> cv;
  if (!a.grid.empty()) {
    if (a.cv < 2) throw ValidationError("grid search needs --cv >= 2");
    m.input(a.grid);
    const auto search = grid_search(config, load_grid(a.grid), ds, strategy, a.cv, derive_seed(a.seed, 2));
    for (const auto& p : search.points)
      if (!p.error.empty()) std::fprintf(stderr, "grid point skipped: %s\n", p.error.c_str());
    config.params = search.best_params;
    cv = search.best;
    json best = json::object();
    for (const auto& [k, v] : config.params) best[k] = v;
    m.note("best_params", best);
  } else if (a.cv >= 2) {
    cv = cross_validate(config, ds, strategy, a.cv, derive_seed(a.seed, 2));
  }
  if (cv) std::printf("cv recall (%d folds): %.4f\n", cv->k, cv->mean_recall());

  const std::uint64_t fit_seed = derive_seed(a.seed, 3);
  m.seed("sampling", strategy.seed);
  m.seed("cv", derive_seed(a.seed, 2));
  m.seed("fit", fit_seed);
  const auto resampled = apply_sampling(ds, strategy).dataset;

  ModelArtifact art;
  art.schema = ds.schema;
  art.model = fit_model(family, config.params, resampled, fit_seed);
  art.discretizer = fit_discretizer(ds);
  auto vars = comorbidity_variables();
  std::erase_if(vars, [&](const std::string& v) { return !ds.schema.find(v); });
  vars.push_back(ds.schema.target_name());
  art.correlations = pearson_matrix(ds, vars);
  art.training.model_name = config.name;
  art.training.sampling = to_string(strategy.kind);
  art.training.seed = a.seed;
  art.training.training_rows = resampled.size();
  art.training.data_sha256 = sha256_hex(read_file(a.data));
  if (cv) {
    art.training.cv_folds = cv->k;
    art.training.cv_recall = cv->recall;
  }
  save_model(art, a.out);
  std::printf("trained %s on %zu rows (%s) -> %s\n", config.name.c_str(), resampled.size(),
              to_string(strategy.kind).c_str(), a.out.c_str());
  m.output(a.out);
  m.write_beside(a.out);
  return 0;
}

struct EvaluateArgs {
  std::string data, models = "logistic,tree,forest,gbdt,knn", sampling = "none", report, format = "csv", results;
  std::vector<std::string> params;
  int cv = 10;
  std::uint64_t seed = 42;
  double threshold = 0.5;
  double alpha = 0.05;
  int smote_k = 5;
};

int run_evaluate(const EvaluateArgs& a, const CLI::App& cmd) {
  const auto ds = load_dataset(a.data);
  const auto format = report_format_from_string(a.format);
  RunManifest m(cmd);
  m.input(a.data);
  m.seed("seed", a.seed);
  SamplingStrategy strategy{sampling_kind_from_string(a.sampling), a.smote_k, derive_seed(a.seed, 1)};
  m.seed("sampling", strategy.seed);

  std::vector<CvResult> results;
  for (const auto& name : split_list(a.models)) {
    const auto family = model_family_from_string(name);
    ModelConfig config{"", family, params_for(family, a.params)};
    config.name = default_model_name(family, config.params);
    std::fprintf(stderr, "cross-validating %s (%d folds, %s)\n", config.name.c_str(), a.cv,
                 to_string(strategy.kind).c_str());
    results.push_back(cross_validate(config, ds, strategy, a.cv, a.seed, a.threshold));
  }
  if (results.empty()) throw ValidationError("--models selected no models");

  const auto report = comparison_report(results, a.alpha);
  std::cout << report_text(report);
  save_report(report, a.report, format);

  const fs::path results_path =
      a.results.empty() ? fs::path(a.report).replace_extension(".eval.json") : fs::path(a.results);
  write_file_atomic(results_path, eval_results_to_json(results));
  m.output(a.report);
  m.output(results_path);
  m.write_beside(a.report);
  return 0;
}

struct CompareArgs {
  std::vector<std::string> eval_results;
  bool anova = false, tukey = false;
  double alpha = 0.05;
  std::string report, format = "text";
};

int run_compare(const CompareArgs& a, const CLI::App& cmd) {
  RunManifest m(cmd);
  std::vector<CvResult> results;
  for (const auto& path : a.eval_results) {
    m.input(path);
    auto part = eval_results_from_json(read_file(path));
    results.insert(results.end(), part.begin(), part.end());
  }
  if (results.size() < 2) throw ValidationError("compare needs results for at least 2 models");
  auto report = comparison_report(results, a.alpha);
  const bool both = !a.anova && !a.tukey;
  if (!a.anova && !both) report.anova.reset();
  if (!a.tukey && !both) report.tukey.clear();
  std::cout << report_text(report);
  if (!a.report.empty()) {
    save_report(report, a.report, report_format_from_string(a.format));
    m.output(a.report);
    m.write_beside(a.report);
  }
  return 0;
}

struct ExplainArgs {
  std::string model, data, method = "both", out;
  std::size_t row = 0;
  int lime_samples = 5000;
  std::optional<std::uint64_t> seed;
};

int run_explain(const ExplainArgs& a, const CLI::App& cmd) {
  const auto art = load_model(a.model);
  const auto ds = load_dataset(a.data);
  if (a.row >= ds.size())
    throw ValidationError("row " + std::to_string(a.row) + " is out of range (dataset has " +
                          std::to_string(ds.size()) + " rows)");
  const bool want_shap = a.method == "shap" || a.method == "both";
  const bool want_lime = a.method == "lime" || a.method == "both";
  const auto x = row_for_model(ds, a.row, art.schema);
  RunManifest m(cmd);
  m.input(a.model);
  m.input(a.data);

  json doc;
  doc["row"] = a.row;
  doc["label"] = ds.target[a.row];
  doc["probability"] = art.model.predict_proba(x);
  if (want_shap) {
    const auto* ens = art.model.ensemble();
    if (!ens) throw ValidationError("SHAP explanations need a tree-ensemble (gbdt) model");
    const auto e = tree_shap(*ens, x);
    doc["shap"] = json::parse(shap_to_json(e));
    const double residual = std::abs(e.residual());
    std::printf("shap local accuracy residual: %.3e (%s)\n", residual, residual <= 1e-6 ? "ok" : "FAILED");
    if (residual > 1e-6) throw NumericError("SHAP local accuracy violated");
  }
  if (want_lime) {
    if (!art.discretizer) throw ValidationError("model artifact has no LIME discretizer");
    LimeConfig cfg;
    cfg.n_samples = a.lime_samples;
    const std::uint64_t seed = a.seed ? *a.seed : request_seed(x);
    m.seed("lime", seed);
    auto fn = [&art](std::span<const double> z) { return art.model.predict_proba(z); };
    const auto e = lime_explain(fn, x, *art.discretizer, cfg, seed);
    doc["lime"] = json::parse(lime_to_json(e, *art.discretizer));
    std::printf("lime local fit quality: %.4f%s\n", e.local_fit_quality, e.low_confidence ? " (low confidence)" : "");
  }
  write_file_atomic(a.out, doc.dump(2) + "\n");
  m.output(a.out);
  m.write_beside(a.out);
  return 0;
}

struct CorrelateArgs {
  std::string data, vars, out;
};

int run_correlate(const CorrelateArgs& a, const CLI::App& cmd) {
  const auto ds = load_dataset(a.data);
  std::vector<std::string> vars;
  if (a.vars.empty()) {
    vars = comorbidity_variables();
    vars.push_back(ds.schema.target_name());
  } else {
    vars = split_list(a.vars);
  }
  const auto corr = pearson_matrix(ds, vars);
  const auto target = corr.index_of(ds.schema.target_name());
  for (std::size_t i = 0; i < corr.variables.size(); ++i) {
    if (target && *target == i) continue;
    if (target) std::printf("r(%s, %s) = %+.4f\n", ds.schema.target_name().c_str(), corr.variables[i].c_str(),
                            corr.r[*target][i]);
  }
  for (const auto& v : corr.excluded) std::printf("excluded (zero variance): %s\n", v.c_str());
  write_file_atomic(a.out, correlation_csv(corr));
  RunManifest m(cmd);
  m.input(a.data);
  m.output(a.out);
  m.write_beside(a.out);
  return 0;
}

struct ServeArgs {
  std::string model, host = "0.0.0.0", origin = "*";
  int port = 8080;
  double threshold = 0.5;
  int lime_samples = 5000;
};

int run_serve(const ServeArgs& a) {
  ServiceConfig config{a.threshold, a.lime_samples, a.origin};
  std::optional<AssessmentEngine> engine;
  if (!a.model.empty()) {
    engine.emplace(load_model(a.model), config);
    std::fprintf(stderr, "loaded %s\n", a.model.c_str());
  } else {
    std::fprintf(stderr, "no model given; model endpoints will answer 503\n");
  }
  ServiceRouter router(engine ? &*engine : nullptr, config);
  run_http_server(router, a.host, a.port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explainable diabetes-risk modelling pipeline"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Load, recode, deduplicate, validate and engineer a CSV");
  prepare->add_option("--input", prep.input, "BRFSS-format CSV")->required();
  prepare->add_option("--schema", prep.schema, "Input schema")->capture_default_str();
  prepare->add_option("--output", prep.output, "Dataset artifact to write")->required();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Fit one model and write a model artifact");
  train->add_option("--data", tr.data, "Prepared dataset artifact")->required();
  train->add_option("--model", tr.model, "logistic|tree|forest|gbdt|knn")->required();
  train->add_option("--sampling", tr.sampling, "none|smote|undersample")->capture_default_str();
  train->add_option("--grid", tr.grid, "JSON file: parameter -> list of values");
  train->add_option("--param", tr.params, "Hyperparameter key=value (repeatable)");
  train->add_option("--seed", tr.seed, "Master seed")->capture_default_str();
  train->add_option("--cv", tr.cv, "Folds for CV metadata and grid search; 0 skips CV")->capture_default_str();
  train->add_option("--smote-k", tr.smote_k, "SMOTE neighbours")->capture_default_str();
  train->add_option("--name", tr.name, "Display name stored in the artifact");
  train->add_option("--out", tr.out, "Model artifact to write")->required();

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Cross-validate several models under one sampling strategy");
  evaluate->add_option("--data", ev.data, "Prepared dataset artifact")->required();
  evaluate->add_option("--models", ev.models, "Comma-separated model families")->capture_default_str();
  evaluate->add_option("--param", ev.params, "Hyperparameter [family.]key=value (repeatable)");
  evaluate->add_option("--sampling", ev.sampling, "none|smote|undersample")->capture_default_str();
  evaluate->add_option("--cv", ev.cv, "Folds")->capture_default_str();
  evaluate->add_option("--seed", ev.seed, "Fold and sampling seed")->capture_default_str();
  evaluate->add_option("--threshold", ev.threshold, "Classification threshold")->capture_default_str();
  evaluate->add_option("--alpha", ev.alpha, "Significance level")->capture_default_str();
  evaluate->add_option("--smote-k", ev.smote_k, "SMOTE neighbours")->capture_default_str();
  evaluate->add_option("--report", ev.report, "Comparison report to write")->required();
  evaluate->add_option("--format", ev.format, "csv|text")->capture_default_str();
  evaluate->add_option("--results", ev.results, "Per-fold results JSON (default: <report>.eval.json)");

  CompareArgs cmp;
  auto* compare = app.add_subcommand("compare", "ANOVA and Tukey HSD over saved per-fold recall");
  compare->add_option("--eval-results", cmp.eval_results, "Results JSON from evaluate")->required();
  compare->add_flag("--anova", cmp.anova, "Include the one-way ANOVA");
  compare->add_flag("--tukey", cmp.tukey, "Include the Tukey HSD table");
  compare->add_option("--alpha", cmp.alpha, "Significance level")->capture_default_str();
  compare->add_option("--report", cmp.report, "Report file to write");
  compare->add_option("--format", cmp.format, "csv|text")->capture_default_str();

  ExplainArgs ex;
  auto* explain = app.add_subcommand("explain", "SHAP and/or LIME explanation of one dataset row");
  explain->add_option("--model", ex.model, "Model artifact")->required();
  explain->add_option("--data", ex.data, "Prepared dataset artifact")->required();
  explain->add_option("--row", ex.row, "Row index")->required();
  explain->add_option("--method", ex.method, "shap|lime|both")
      ->check(CLI::IsMember({"shap", "lime", "both"}))
      ->capture_default_str();
  explain->add_option("--lime-samples", ex.lime_samples, "LIME perturbations")->capture_default_str();
  explain->add_option("--seed", ex.seed, "LIME seed (default: hash of the row)");
  explain->add_option("--out", ex.out, "Explanation JSON to write")->required();

  CorrelateArgs co;
  auto* correlate = app.add_subcommand("correlate", "Pearson correlation table");
  correlate->add_option("--data", co.data, "Prepared dataset artifact")->required();
  correlate->add_option("--vars", co.vars, "Comma-separated variables (default: comorbidities + target)");
  correlate->add_option("--out", co.out, "CSV to write")->required();

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "HTTP risk-assessment service");
  serve->add_option("--model", sv.model, "Model artifact")->envname("DIABRISK_MODEL");
  serve->add_option("--host", sv.host, "Bind address")->envname("DIABRISK_HOST")->capture_default_str();
  serve->add_option("--port", sv.port, "Port")->envname("DIABRISK_PORT")->capture_default_str();
  serve->add_option("--threshold", sv.threshold, "Classification threshold")
      ->envname("DIABRISK_THRESHOLD")
      ->capture_default_str();
  serve->add_option("--lime-samples", sv.lime_samples, "LIME perturbations per request")
      ->envname("DIABRISK_LIME_SAMPLES")
      ->capture_default_str();
  serve->add_option("--origin", sv.origin, "Allowed CORS origin")->envname("DIABRISK_ORIGIN")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*prepare) return run_prepare(prep, *prepare);
    if (*train) return run_train(tr, *train);
    if (*evaluate) return run_evaluate(ev, *evaluate);
    if (*compare) return run_compare(cmp, *compare);
    if (*explain) return run_explain(ex, *explain);
    if (*correlate) return run_correlate(co, *correlate);
    if (*serve) return run_serve(sv);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
