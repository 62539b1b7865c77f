#include <cmath>
#include <set>

#include "diabrisk/error.hpp"
#include "diabrisk/models.hpp"

namespace diabrisk {

std::string to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::logistic: return "logistic";
    case ModelFamily::tree: return "tree";
    case ModelFamily::forest: return "forest";
    case ModelFamily::gbdt: return "gbdt";
    case ModelFamily::knn: return "knn";
  }
  return "logistic";
}

ModelFamily model_family_from_string(const std::string& s) {
  if (s == "logistic") return ModelFamily::logistic;
  if (s == "tree") return ModelFamily::tree;
  if (s == "forest") return ModelFamily::forest;
  if (s == "gbdt") return ModelFamily::gbdt;
  if (s == "knn") return ModelFamily::knn;
  throw ValidationError("unknown model family '" + s + "'");
}

// ---------------------------------------------------------------------------
// ParamMap conversion

namespace {

class ParamReader {
 public:
  ParamReader(const ParamMap& m, std::initializer_list<const char*> allowed, const char* family) : m_(m) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : m) {
      if (!ok.count(k)) throw ValidationError(std::string("unknown ") + family + " parameter '" + k + "'");
      if (!std::isfinite(v)) throw ValidationError("parameter '" + k + "' is not finite");
    }
  }
  template <class T>
  void get(const char* key, T& out) const {
    auto it = m_.find(key);
    if (it == m_.end()) return;
    if constexpr (std::is_same_v<T, bool>) {
      out = it->second != 0.0;
    } else if constexpr (std::is_integral_v<T>) {
      if (it->second != std::floor(it->second))
        throw ValidationError(std::string("parameter '") + key + "' must be an integer");
      out = static_cast<T>(it->second);
    } else {
      out = static_cast<T>(it->second);
    }
  }

 private:
  const ParamMap& m_;
};

}  // namespace

LogisticParams logistic_params(const ParamMap& m) {
  ParamReader r(m, {"l2", "max_iters", "tol"}, "logistic");
  LogisticParams p;
  r.get("l2", p.l2);
  r.get("max_iters", p.max_iters);
  r.get("tol", p.tol);
  return p;
}

TreeParams tree_params(const ParamMap& m) {
  ParamReader r(m, {"max_depth", "min_samples_leaf", "max_bins"}, "tree");
  TreeParams p;
  r.get("max_depth", p.max_depth);
  r.get("min_samples_leaf", p.min_samples_leaf);
  r.get("max_bins", p.max_bins);
  return p;
}

ForestParams forest_params(const ParamMap& m) {
  ParamReader r(m, {"n_trees", "max_depth", "min_samples_leaf", "mtry", "bootstrap", "seed", "max_bins"}, "forest");
  ForestParams p;
  r.get("n_trees", p.n_trees);
  r.get("max_depth", p.max_depth);
  r.get("min_samples_leaf", p.min_samples_leaf);
  r.get("mtry", p.mtry);
  r.get("bootstrap", p.bootstrap);
  r.get("seed", p.seed);
  r.get("max_bins", p.max_bins);
  return p;
}

GbdtParams gbdt_params(const ParamMap& m) {
  ParamReader r(m,
                {"n_trees", "learning_rate", "num_leaves", "max_depth", "min_child_samples", "lambda", "max_bins",
                 "depthwise"},
                "gbdt");
  GbdtParams p;
  r.get("n_trees", p.n_trees);
  r.get("learning_rate", p.learning_rate);
  r.get("num_leaves", p.num_leaves);
  r.get("max_depth", p.max_depth);
  r.get("min_child_samples", p.min_child_samples);
  r.get("lambda", p.lambda);
  r.get("max_bins", p.max_bins);
  bool depthwise = false;
  r.get("depthwise", depthwise);
  p.growth = depthwise ? GrowthPolicy::depth_wise : GrowthPolicy::leaf_wise;
  return p;
}

KnnParams knn_params(const ParamMap& m) {
  ParamReader r(m, {"k", "standardize"}, "knn");
  KnnParams p;
  r.get("k", p.k);
  r.get("standardize", p.standardize);
  return p;
}

ParamMap to_param_map(const LogisticParams& p) {
  return {{"l2", p.l2}, {"max_iters", p.max_iters}, {"tol", p.tol}};
}
ParamMap to_param_map(const TreeParams& p) {
  return {{"max_depth", p.max_depth}, {"min_samples_leaf", p.min_samples_leaf}, {"max_bins", p.max_bins}};
}
ParamMap to_param_map(const ForestParams& p) {
  return {{"n_trees", p.n_trees},
          {"max_depth", p.max_depth},
          {"min_samples_leaf", p.min_samples_leaf},
          {"mtry", p.mtry},
          {"bootstrap", p.bootstrap ? 1.0 : 0.0},
          {"seed", static_cast<double>(p.seed)},
          {"max_bins", p.max_bins}};
}
ParamMap to_param_map(const GbdtParams& p) {
  return {{"n_trees", p.n_trees},
          {"learning_rate", p.learning_rate},
          {"num_leaves", p.num_leaves},
          {"max_depth", p.max_depth},
          {"min_child_samples", p.min_child_samples},
          {"lambda", p.lambda},
          {"max_bins", p.max_bins},
          {"depthwise", p.growth == GrowthPolicy::depth_wise ? 1.0 : 0.0}};
}
ParamMap to_param_map(const KnnParams& p) { return {{"k", p.k}, {"standardize", p.standardize ? 1.0 : 0.0}}; }

// ---------------------------------------------------------------------------
// Classifier

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;
}  // namespace

ModelFamily Classifier::family() const {
  return std::visit(overloaded{[](const LogisticModel&) { return ModelFamily::logistic; },
                               [](const TreeModel&) { return ModelFamily::tree; },
                               [](const ForestModel&) { return ModelFamily::forest; },
                               [](const GbdtModel&) { return ModelFamily::gbdt; },
                               [](const KnnModel&) { return ModelFamily::knn; }},
                    state_);
}

ParamMap Classifier::params() const {
  return std::visit([](const auto& m) { return to_param_map(m.params); }, state_);
}

bool Classifier::has_margin() const {
  return std::holds_alternative<LogisticModel>(state_) || std::holds_alternative<GbdtModel>(state_);
}

const TreeEnsemble* Classifier::ensemble() const {
  if (auto* g = std::get_if<GbdtModel>(&state_)) return &g->ensemble;
  return nullptr;
}

void Classifier::check_width(std::size_t n) const {
  if (n != feature_names_.size())
    throw ValidationError("expected " + std::to_string(feature_names_.size()) + " features, got " +
                          std::to_string(n));
}

double Classifier::predict_margin(std::span<const double> x) const {
  check_width(x.size());
  if (auto* l = std::get_if<LogisticModel>(&state_)) return l->margin(x);
  if (auto* g = std::get_if<GbdtModel>(&state_)) return g->ensemble.margin(x);
  throw ValidationError(to_string(family()) + " models do not define a margin");
}

double Classifier::predict_proba(std::span<const double> x) const {
  check_width(x.size());
  return std::visit(overloaded{[&](const LogisticModel& m) { return sigmoid(m.margin(x)); },
                               [&](const TreeModel& m) { return m.tree.predict(x); },
                               [&](const ForestModel& m) { return m.probability(x); },
                               [&](const GbdtModel& m) { return m.ensemble.probability(x); },
                               [&](const KnnModel& m) { return m.probability(x); }},
                    state_);
}

std::vector<double> Classifier::predict_proba(const Matrix& x) const {
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_proba(x.row(r));
  return out;
}

std::vector<double> Classifier::predict_margin(const Matrix& x) const {
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_margin(x.row(r));
  return out;
}

Classifier fit_model(ModelFamily family, const ParamMap& params, const EncodedDataset& train, std::uint64_t seed) {
  switch (family) {
    case ModelFamily::logistic: return fit_logistic(train, logistic_params(params));
    case ModelFamily::tree: return fit_tree(train, tree_params(params));
    case ModelFamily::forest: {
      auto p = forest_params(params);
      // Parameter maps hold doubles; keep the seed exactly representable.
      if (!params.count("seed")) p.seed = seed & ((std::uint64_t{1} << 53) - 1);
      return fit_forest(train, p);
    }
    case ModelFamily::gbdt: return fit_gbdt_classifier(train, gbdt_params(params));
    case ModelFamily::knn: return fit_knn(train, knn_params(params));
  }
  throw ValidationError("unknown model family");
}

}  // namespace diabrisk
