#include <cmath>
#include <cstring>
#include <filesystem>

#include "diabrisk/error.hpp"
#include "diabrisk/persistence.hpp"
#include "diabrisk/rng.hpp"
#include "doctest.h"
#include "synthetic.hpp"

using namespace diabrisk;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto d = fs::temp_directory_path() / "diabrisk_persistence_test";
  fs::create_directories(d);
  return d;
}

ModelArtifact artifact_for(ModelFamily fam, const EncodedDataset& ds) {
  ParamMap params;
  if (fam == ModelFamily::forest) params = {{"n_trees", 8}, {"max_depth", 6}};
  if (fam == ModelFamily::gbdt) params = {{"n_trees", 25}};
  ModelArtifact a;
  a.schema = ds.schema;
  a.model = fit_model(fam, params, ds, 0xfeedfacecafebeefULL);
  a.discretizer = fit_discretizer(ds);
  a.training.model_name = default_model_name(fam, params);
  a.training.seed = 0xfeedfacecafebeefULL;
  a.training.cv_recall = {0.5, 0.25};
  return a;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

std::string replace_once(std::string s, const std::string& from, const std::string& to) {
  auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("model artifacts round-trip bit for bit for every family") {
  auto ds = testing::synthetic_prepared(1200, 21);
  Rng rng(1);
  for (auto fam : {ModelFamily::logistic, ModelFamily::tree, ModelFamily::forest, ModelFamily::gbdt,
                   ModelFamily::knn}) {
    CAPTURE(to_string(fam));
    auto a = artifact_for(fam, ds);
    auto path = temp_dir() / ("model_" + to_string(fam) + ".json");
    save_model(a, path);
    auto b = load_model(path);
    CHECK(b.model == a.model);
    CHECK(b.schema == a.schema);
    CHECK(*b.discretizer == *a.discretizer);
    CHECK(b.training.seed == a.training.seed);
    for (int i = 0; i < 200; ++i) {
      std::vector<double> x(ds.feature_count());
      for (std::size_t j = 0; j < x.size(); ++j) {
        const auto& r = ds.schema[j].valid_range;
        x[j] = r.lo + (r.hi - r.lo) * uniform01(rng);
      }
      CHECK(same_bits(a.model.predict_proba(x), b.model.predict_proba(x)));
      if (a.model.has_margin()) CHECK(same_bits(a.model.predict_margin(x), b.model.predict_margin(x)));
    }
    CHECK(model_to_json(b) == model_to_json(a));
  }
}

TEST_CASE("loading rejects broken artifacts") {
  auto ds = testing::synthetic_prepared(600, 22);
  auto text = model_to_json(artifact_for(ModelFamily::gbdt, ds));

  auto future = replace_once(text, "\"format_version\": 1", "\"format_version\": 2");
  CHECK_THROWS_WITH_AS(model_from_json(future), doctest::Contains("format_version 2"), ValidationError);

  CHECK_THROWS_WITH_AS(model_from_json(text.substr(0, text.size() / 2)), doctest::Contains("truncated"),
                       ValidationError);

  // Break cover conservation on the first tree's root.
  auto cover_pos = text.find("\"cover\": [");
  REQUIRE(cover_pos != std::string::npos);
  auto num_start = text.find_first_of("0123456789", cover_pos);
  auto num_end = text.find_first_of(",]", num_start);
  auto broken = text;
  broken.replace(num_start, num_end - num_start, "1");
  CHECK_THROWS_WITH_AS(model_from_json(broken), doctest::Contains("cover"), ValidationError);

  auto bad_child = replace_once(text, "\"left\": [\n", "\"left\": [\n   999,\n");
  CHECK_THROWS_AS(model_from_json(bad_child), ValidationError);

  CHECK_THROWS_AS(model_from_json("{\"format\": \"something-else\"}"), ValidationError);
  CHECK_THROWS_AS(load_model(temp_dir() / "does_not_exist.json"), IoError);
}

TEST_CASE("dataset artifact round trip is exact and byte-stable") {
  auto ds = testing::synthetic_prepared(500, 23);
  auto text = dataset_to_text(ds);
  auto back = dataset_from_text(text);
  CHECK(back == ds);
  CHECK(dataset_to_text(back) == text);
  CHECK(text.rfind("#diabrisk-dataset 1\n", 0) == 0);

  auto future = replace_once(text, "#diabrisk-dataset 1", "#diabrisk-dataset 9");
  CHECK_THROWS_AS(dataset_from_text(future), ValidationError);
  auto bad = text + "1,2,3\n";
  CHECK_THROWS_AS(dataset_from_text(bad), ValidationError);

  auto path = temp_dir() / "ds.csv";
  save_dataset(ds, path);
  CHECK(load_dataset(path) == ds);
}

TEST_CASE("reports use the fixed headers and 4-decimal formatting") {
  EvaluationReport r;
  r.strategy = "undersample";
  r.rows = {{"GBDT (leaf-wise)", {0.72, 0.31, 0.78341, 0.44, 0.82219, false, false}},
            {"Logistic Regression", {0.7, 0.3, 0.76, 0.43, 0.81, false, false}}};
  r.anova = AnovaResult{12.5, 1e-10, 4, 45, 0.1, 0.2, false};
  r.tukey = {{"A", "B", -0.01234, 0.5, -0.05, 0.03, false}, {"A", "C", 0.1, 0.001, 0.05, 0.15, true}};
  auto csv = comparison_csv(r);
  CHECK(csv.rfind("Model,Accuracy,Precision,Recall,F1,ROC-AUC\n", 0) == 0);
  CHECK(csv.find("GBDT (leaf-wise),0.7200,0.3100,0.7834,0.4400,0.8222\n") != std::string::npos);
  auto tk = tukey_csv(r.tukey);
  CHECK(tk.rfind("group1,group2,meandiff,p-adj,lower,upper,reject\n", 0) == 0);
  CHECK(tk.find("A,B,-0.0123,0.5000,-0.0500,0.0300,False\n") != std::string::npos);
  CHECK(tk.find(",True\n") != std::string::npos);

  auto text = report_text(r);
  CHECK(text.find("ANOVA") != std::string::npos);
  CHECK(text.find("Tukey HSD") != std::string::npos);
  CHECK(report_text(r) == text);

  auto path = temp_dir() / "cmp.csv";
  save_report(r, path, ReportFormat::csv);
  CHECK(read_file(path) == csv);
  CHECK(read_file(temp_dir() / "cmp_tukey.csv") == tk);
  save_report(r, path, ReportFormat::csv);
  CHECK(read_file(path) == csv);
}

TEST_CASE("eval results round trip") {
  CvResult c;
  c.model_name = "KNN";
  c.config = {"KNN", ModelFamily::knn, {{"k", 5}}};
  c.strategy = {SamplingKind::smote, 5, 0};
  c.k = 2;
  c.seed = 42;
  c.recall = {0.5, 0.6};
  c.folds = {{0.8, 0.4, 0.5, 0.44, 0.7, false, false}, {0.8, 0.4, 0.6, 0.48, std::nan(""), false, true}};
  auto back = eval_results_from_json(eval_results_to_json({c}));
  REQUIRE(back.size() == 1);
  CHECK(back[0].recall == c.recall);
  CHECK(back[0].strategy.kind == SamplingKind::smote);
  CHECK(std::isnan(back[0].folds[1].roc_auc));
  CHECK(back[0].folds[1].auc_undefined);
  CHECK(back[0].config.params.at("k") == 5);
}

TEST_CASE("atomic writes leave no temporary files") {
  auto dir = temp_dir() / "atomic";
  fs::remove_all(dir);
  write_file_atomic(dir / "a.txt", "one");
  write_file_atomic(dir / "a.txt", "two");
  CHECK(read_file(dir / "a.txt") == "two");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  CHECK(files == 1);
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
