#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(DIABRISK_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One shared workspace with a prepared synthetic dataset.
const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("diabrisk_cli_" + std::to_string(getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    std::ofstream(d / "raw.csv") << diabrisk::testing::synthetic_brfss_csv(2500, 11);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

const std::string& prepared() {
  static const std::string p = [] {
    auto r = cli("prepare --input " + path("raw.csv") + " --output " + path("ds.txt"));
    REQUIRE_MESSAGE(r.code == 0, r.output);
    return path("ds.txt");
  }();
  return p;
}

const std::string& trained_gbdt() {
  static const std::string p = [] {
    auto r = cli("train --data " + prepared() +
                 " --model gbdt --sampling undersample --seed 42 --cv 3 --param n_trees=30 --out " + path("gbdt.json"));
    REQUIRE_MESSAGE(r.code == 0, r.output);
    return path("gbdt.json");
  }();
  return p;
}

}  // namespace

TEST_CASE("prepare reports counts and writes a byte-stable artifact") {
  auto r = cli("prepare --input " + path("raw.csv") + " --output " + path("ds_again.txt"));
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(r.output.find("duplicates removed:") != std::string::npos);
  CHECK(r.output.find("class split:") != std::string::npos);
  CHECK(slurp(path("ds_again.txt")) == slurp(prepared()));
  auto manifest = json::parse(slurp(path("ds_again.txt.manifest.json")));
  CHECK(manifest["command"] == "prepare");
  CHECK(manifest["outputs"][0]["sha256"].get<std::string>().size() == 64);
}

TEST_CASE("missing input file exits with the I/O code") {
  auto r = cli("prepare --input " + path("nope.csv") + " --output " + path("x.txt"));
  CHECK(r.code == 3);
  CHECK(r.output.find("nope.csv") != std::string::npos);
}

TEST_CASE("bad flags exit with the validation code") {
  CHECK(cli("train --data " + prepared() + " --model svm --out " + path("svm.json")).code == 2);
  CHECK(cli("frobnicate").code == 2);
}

TEST_CASE("training is deterministic given its flags") {
  const auto first = slurp(trained_gbdt());
  auto r = cli("train --data " + prepared() +
               " --model gbdt --sampling undersample --seed 42 --cv 3 --param n_trees=30 --out " + path("gbdt2.json"));
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(slurp(path("gbdt2.json")) == first);
  auto art = json::parse(first);
  CHECK(art["training"]["cv_recall"].size() == 3);
}

TEST_CASE("knn with more neighbours than rows fails cleanly") {
  auto r = cli("train --data " + prepared() + " --model knn --sampling undersample --cv 0 --param k=100000 --out " +
               path("knn.json"));
  CHECK(r.code == 2);
  CHECK(r.output.find("exceeds") != std::string::npos);
}

TEST_CASE("grid search picks parameters and records them") {
  std::ofstream(path("grid.json")) << R"({"max_depth": [2, 4], "min_samples_leaf": [1, 20]})";
  auto r = cli("train --data " + prepared() + " --model tree --sampling undersample --cv 3 --grid " +
               path("grid.json") + " --out " + path("tree.json"));
  REQUIRE_MESSAGE(r.code == 0, r.output);
  auto manifest = json::parse(slurp(path("tree.json.manifest.json")));
  CHECK(manifest.contains("best_params"));
}

TEST_CASE("explain prints the SHAP check line and LIME is reproducible") {
  auto r1 = cli("explain --model " + trained_gbdt() + " --data " + prepared() +
                " --row 5 --method both --lime-samples 800 --out " + path("ex1.json"));
  REQUIRE_MESSAGE(r1.code == 0, r1.output);
  CHECK(r1.output.find("shap local accuracy residual") != std::string::npos);
  CHECK(r1.output.find("(ok)") != std::string::npos);
  auto r2 = cli("explain --model " + trained_gbdt() + " --data " + prepared() +
                " --row 5 --method both --lime-samples 800 --out " + path("ex2.json"));
  REQUIRE(r2.code == 0);
  CHECK(slurp(path("ex1.json")) == slurp(path("ex2.json")));
  auto doc = json::parse(slurp(path("ex1.json")));
  CHECK(doc.contains("shap"));
  CHECK(doc.contains("lime"));
}

TEST_CASE("explain rejects an out-of-range row") {
  auto r = cli("explain --model " + trained_gbdt() + " --data " + prepared() + " --row 999999 --out " +
               path("ex3.json"));
  CHECK(r.code == 2);
  CHECK(r.output.find("out of range") != std::string::npos);
}

TEST_CASE("correlate writes a square table") {
  auto r = cli("correlate --data " + prepared() + " --out " + path("corr.csv"));
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(r.output.find("r(Diabetes_binary, HighBP)") != std::string::npos);
  std::istringstream in(slurp(path("corr.csv")));
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 6);
}

TEST_CASE("evaluate and compare") {
  auto r = cli("evaluate --data " + prepared() +
               " --models logistic,tree --cv 4 --sampling undersample --seed 3 --report " + path("cmp.csv"));
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(fs::exists(path("cmp.csv")));
  CHECK(fs::exists(path("cmp_tukey.csv")));
  CHECK(fs::exists(path("cmp.eval.json")));
  CHECK(fs::exists(path("cmp.csv.manifest.json")));

  auto c = cli("compare --eval-results " + path("cmp.eval.json") + " --anova --tukey --report " + path("cmp.txt"));
  REQUIRE_MESSAGE(c.code == 0, c.output);
  CHECK(c.output.find("ANOVA") != std::string::npos);

  auto one = cli("evaluate --data " + prepared() + " --models logistic --cv 4 --seed 3 --report " + path("one.csv"));
  REQUIRE(one.code == 0);
  CHECK(cli("compare --eval-results " + path("one.eval.json")).code == 2);

  auto other = cli("evaluate --data " + prepared() + " --models knn --cv 5 --seed 3 --report " + path("k5.csv"));
  REQUIRE(other.code == 0);
  auto mixed = cli("compare --eval-results " + path("one.eval.json") + " " + path("k5.eval.json"));
  CHECK(mixed.code == 2);
  CHECK(mixed.output.find("inconsistent") != std::string::npos);
}

TEST_CASE("serve answers health and metadata, then stops on SIGTERM") {
  const int port = 30000 + static_cast<int>(getpid() % 20000);
  const std::string model = trained_gbdt();
  const pid_t child = fork();
  REQUIRE(child >= 0);
  if (child == 0) {
    const std::string port_s = std::to_string(port);
    execl(DIABRISK_CLI, DIABRISK_CLI, "serve", "--model", model.c_str(), "--host", "127.0.0.1", "--port",
          port_s.c_str(), "--lime-samples", "500", static_cast<char*>(nullptr));
    _exit(127);
  }
  httplib::Client client("127.0.0.1", port);
  httplib::Result health;
  for (int i = 0; i < 100 && !health; ++i) {
    health = client.Get("/health");
    if (!health) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  REQUIRE(health);
  CHECK(health->body == "ok");
  auto meta = client.Get("/model/meta");
  REQUIRE(meta);
  CHECK(json::parse(meta->body)["input_features"].size() == 21);

  kill(child, SIGTERM);
  int status = 0;
  waitpid(child, &status, 0);
  CHECK(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);
}
