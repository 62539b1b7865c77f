#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "diabrisk/error.hpp"
#include "diabrisk/evaluation.hpp"
#include "diabrisk/explain.hpp"
#include "diabrisk/insights.hpp"
#include "diabrisk/lime.hpp"
#include "diabrisk/persistence.hpp"
#include "diabrisk/rng.hpp"
#include "diabrisk/service.hpp"
#include "diabrisk/stats.hpp"

namespace py = pybind11;
using namespace diabrisk;

namespace {

py::object from_json(const std::string& text) { return py::module_::import("json").attr("loads")(text); }
std::string to_json(const py::object& obj) { return py::module_::import("json").attr("dumps")(obj).cast<std::string>(); }

std::vector<double> model_row(const ModelArtifact& a, const std::vector<double>& row) {
  if (row.size() != a.schema.size())
    throw ValidationError("expected " + std::to_string(a.schema.size()) + " values, got " + std::to_string(row.size()));
  return row;
}

ModelArtifact train(const EncodedDataset& ds, const std::string& family_name, const ParamMap& params,
                    const std::string& sampling, std::uint64_t seed) {
  const auto family = model_family_from_string(family_name);
  SamplingStrategy strategy{sampling_kind_from_string(sampling), 5, derive_seed(seed, 1)};
  const auto resampled = apply_sampling(ds, strategy).dataset;
  ModelArtifact a;
  a.schema = ds.schema;
  a.model = fit_model(family, params, resampled, derive_seed(seed, 3));
  a.discretizer = fit_discretizer(ds);
  auto vars = comorbidity_variables();
  std::erase_if(vars, [&](const std::string& v) { return !ds.schema.find(v); });
  vars.push_back(ds.schema.target_name());
  a.correlations = pearson_matrix(ds, vars);
  a.training.model_name = default_model_name(family, params);
  a.training.sampling = to_string(strategy.kind);
  a.training.seed = seed;
  a.training.training_rows = resampled.size();
  return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Explainable diabetes-risk modelling";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<EncodedDataset>(m, "Dataset")
      .def_static("load", [](const std::string& p) { return load_dataset(p); })
      .def("save", [](const EncodedDataset& d, const std::string& p) { save_dataset(d, p); })
      .def("__len__", &EncodedDataset::size)
      .def_property_readonly("feature_names", [](const EncodedDataset& d) { return d.schema.names(); })
      .def_property_readonly("target_name", [](const EncodedDataset& d) { return d.schema.target_name(); })
      .def_property_readonly("target", [](const EncodedDataset& d) { return d.target; })
      .def_property_readonly("provenance", [](const EncodedDataset& d) { return d.provenance; })
      .def("row", [](const EncodedDataset& d, std::size_t i) {
        if (i >= d.size()) throw py::index_error("row out of range");
        auto r = d.rows.row(i);
        return std::vector<double>(r.begin(), r.end());
      })
      .def("positive_rate", &EncodedDataset::positive_rate);

  m.def(
      "prepare_csv",
      [](const std::string& path) {
        auto prepared = prepare_dataset(load_csv(path, brfss_schema()));
        py::dict counts;
        counts["raw_rows"] = prepared.raw_rows;
        counts["after_recode"] = prepared.after_recode;
        counts["duplicates_removed"] = prepared.duplicates_removed;
        counts["rows"] = prepared.dataset.size();
        return py::make_tuple(prepared.dataset, counts);
      },
      py::arg("path"), "Load, recode, deduplicate, validate and engineer a BRFSS-format CSV.");

  m.def(
      "engineer",
      [](const std::vector<double>& inputs) {
        const auto s = compute_scores(brfss_schema(), inputs);
        py::dict d;
        d["risk_factor_count"] = s.risk_factor_count;
        d["lifestyle_score"] = s.lifestyle_score;
        d["healthcare_score"] = s.healthcare_access_score;
        return d;
      },
      py::arg("inputs"));

  m.def("input_feature_names", [] { return brfss_schema().names(); });

  py::class_<ModelArtifact>(m, "Model")
      .def_static("load", [](const std::string& p) { return load_model(p); })
      .def_static("from_json", &model_from_json)
      .def("save", [](const ModelArtifact& a, const std::string& p) { save_model(a, p); })
      .def("to_json", &model_to_json)
      .def_property_readonly("family", [](const ModelArtifact& a) { return to_string(a.model.family()); })
      .def_property_readonly("name", [](const ModelArtifact& a) { return a.training.model_name; })
      .def_property_readonly("feature_names", [](const ModelArtifact& a) { return a.schema.names(); })
      .def_property_readonly("params", [](const ModelArtifact& a) { return a.model.params(); })
      .def("predict_proba",
           [](const ModelArtifact& a, const std::vector<double>& row) {
             return a.model.predict_proba(model_row(a, row));
           })
      .def("shap",
           [](const ModelArtifact& a, const std::vector<double>& row) {
             const auto* ens = a.model.ensemble();
             if (!ens) throw ValidationError("SHAP explanations need a tree-ensemble (gbdt) model");
             return from_json(shap_to_json(tree_shap(*ens, model_row(a, row))));
           })
      .def(
          "lime",
          [](const ModelArtifact& a, const std::vector<double>& row, int n_samples, std::uint64_t seed) {
            if (!a.discretizer) throw ValidationError("model has no LIME discretizer");
            LimeConfig cfg;
            cfg.n_samples = n_samples;
            auto fn = [&a](std::span<const double> z) { return a.model.predict_proba(z); };
            return from_json(lime_to_json(lime_explain(fn, model_row(a, row), *a.discretizer, cfg, seed),
                                          *a.discretizer));
          },
          py::arg("row"), py::arg("n_samples") = 5000, py::arg("seed") = 0);

  m.def("train", &train, py::arg("dataset"), py::arg("family"), py::arg("params") = ParamMap{},
        py::arg("sampling") = "none", py::arg("seed") = 42,
        "Resample, fit one model and attach the LIME discretizer and correlations.");

  py::class_<AssessmentEngine>(m, "Engine")
      .def(py::init([](const ModelArtifact& a, double threshold, int lime_samples) {
             return AssessmentEngine(a, ServiceConfig{threshold, lime_samples, "*"});
           }),
           py::arg("model"), py::arg("threshold") = 0.5, py::arg("lime_samples") = 5000)
      .def("assess",
           [](const AssessmentEngine& e, const py::object& request) {
             const auto inputs = parse_assessment_request(to_json(request));
             std::string out;
             {
               py::gil_scoped_release release;
               out = assessment_to_json(e.assess(inputs), e);
             }
             return from_json(out);
           })
      .def("meta", [](const AssessmentEngine& e) { return from_json(model_meta_json(e)); })
      .def("comorbidity", [](const AssessmentEngine& e) { return from_json(comorbidity_json(e)); });

  m.def("roc_auc", [](const std::vector<int>& y, const std::vector<double>& s) { return roc_auc(y, s); });
  m.def("anova_oneway", [](const std::vector<std::vector<double>>& groups) {
    const auto r = anova_oneway(groups);
    return py::make_tuple(r.f_stat, r.p_value);
  });
  m.def(
      "tukey_hsd",
      [](const NamedGroups& groups, double alpha) {
        py::list rows;
        for (const auto& r : tukey_hsd(groups, alpha)) {
          py::dict d;
          d["group1"] = r.group1;
          d["group2"] = r.group2;
          d["meandiff"] = r.meandiff;
          d["p_adj"] = r.p_adj;
          d["lower"] = r.lower;
          d["upper"] = r.upper;
          d["reject"] = r.reject;
          rows.append(d);
        }
        return rows;
      },
      py::arg("groups"), py::arg("alpha") = 0.05);
  m.def("studentized_range_quantile", &stats::studentized_range_quantile, py::arg("alpha"), py::arg("groups"),
        py::arg("df"));
}
