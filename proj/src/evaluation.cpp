#include "diabrisk/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "diabrisk/error.hpp"
#include "diabrisk/rng.hpp"
#include "diabrisk/stats.hpp"

namespace diabrisk {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

double roc_auc(std::span<const int> y_true, std::span<const double> scores) {
  if (y_true.size() != scores.size()) throw ValidationError("label and score lengths differ");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  double n_pos = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j share their average.
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (y_true[order[t]] == 1) rank_sum_pos += midrank;
    i = j;
  }
  for (int y : y_true) n_pos += y == 1;
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) return kNaN;
  return (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

MetricSet compute_metrics(std::span<const int> y_true, std::span<const double> scores, double threshold) {
  if (y_true.size() != scores.size()) throw ValidationError("label and score lengths differ");
  if (y_true.empty()) throw ValidationError("cannot compute metrics on an empty set");
  double tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] != 0 && y_true[i] != 1) throw ValidationError("labels must be binary");
    const bool pred = scores[i] >= threshold;
    if (y_true[i] == 1) (pred ? tp : fn) += 1;
    else (pred ? fp : tn) += 1;
  }
  MetricSet m;
  m.accuracy = (tp + tn) / static_cast<double>(y_true.size());
  m.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  if (tp + fn > 0) {
    m.recall = tp / (tp + fn);
  } else {
    m.recall = kNaN;
    m.recall_undefined = true;
  }
  m.f1 = (!m.recall_undefined && m.precision + m.recall > 0)
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  m.roc_auc = roc_auc(y_true, scores);
  m.auc_undefined = std::isnan(m.roc_auc);
  return m;
}

MetricSet mean_metrics(std::span<const MetricSet> folds) {
  MetricSet m;
  if (folds.empty()) return m;
  for (const auto& f : folds) {
    m.accuracy += f.accuracy;
    m.precision += f.precision;
    m.recall += f.recall;
    m.f1 += f.f1;
    m.roc_auc += f.roc_auc;
    m.recall_undefined |= f.recall_undefined;
    m.auc_undefined |= f.auc_undefined;
  }
  const double k = static_cast<double>(folds.size());
  m.accuracy /= k;
  m.precision /= k;
  m.recall /= k;
  m.f1 /= k;
  m.roc_auc /= k;
  return m;
}

// ---------------------------------------------------------------------------

Folds stratified_kfold(std::span<const int> target, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("fold count must be >= 2");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] != 0 && target[i] != 1) throw ValidationError("labels must be binary");
    by_class[target[i]].push_back(i);
  }
  const auto kk = static_cast<std::size_t>(k);
  for (int c = 0; c < 2; ++c)
    if (by_class[c].size() < kk)
      throw ValidationError("class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                            " rows, fewer than k=" + std::to_string(k));
  Rng rng(seed);
  Folds folds(kk);
  std::size_t offset = 0;
  for (auto& members : by_class) {
    shuffle(members, rng);
    for (std::size_t i = 0; i < members.size(); ++i) folds[(offset + i) % kk].push_back(members[i]);
    offset = (offset + members.size()) % kk;
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

HoldoutSplit stratified_holdout(std::span<const int> target, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0 && test_fraction < 1)) throw ValidationError("test fraction must lie in (0, 1)");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] != 0 && target[i] != 1) throw ValidationError("labels must be binary");
    by_class[target[i]].push_back(i);
  }
  Rng rng(seed);
  HoldoutSplit split;
  for (auto& members : by_class) {
    shuffle(members, rng);
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(members.size()) * test_fraction));
    split.test.insert(split.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.insert(split.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// ---------------------------------------------------------------------------

double CvResult::mean_recall() const { return std::accumulate(recall.begin(), recall.end(), 0.0) / recall.size(); }

double CvResult::mean_f1() const {
  double s = 0.0;
  for (const auto& f : folds) s += f.f1;
  return s / static_cast<double>(folds.size());
}

MetricSet evaluate_holdout(const ModelConfig& config, const EncodedDataset& train, const EncodedDataset& test,
                           const SamplingStrategy& strategy, std::uint64_t seed, double threshold) {
  SamplingStrategy s = strategy;
  s.seed = derive_seed(seed, 1);
  auto resampled = apply_sampling(train, s);
  auto model = fit_model(config.family, config.params, resampled.dataset, derive_seed(seed, 2));
  auto scores = model.predict_proba(test.rows);
  return compute_metrics(test.target, scores, threshold);
}

CvResult cross_validate(const ModelConfig& config, const EncodedDataset& data, const SamplingStrategy& strategy,
                        int k, std::uint64_t seed, double threshold) {
  auto folds = stratified_kfold(data.target, k, seed);
  CvResult res;
  res.model_name = config.name.empty() ? default_model_name(config.family, config.params) : config.name;
  res.config = config;
  res.strategy = strategy;
  res.k = k;
  res.seed = seed;
  std::vector<char> in_test(data.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::fill(in_test.begin(), in_test.end(), 0);
    for (auto i : folds[f]) in_test[i] = 1;
    std::vector<std::size_t> train_idx;
    train_idx.reserve(data.size() - folds[f].size());
    for (std::size_t i = 0; i < data.size(); ++i)
      if (!in_test[i]) train_idx.push_back(i);
    auto train = data.subset(train_idx);
    auto test = data.subset(folds[f]);
    auto m = evaluate_holdout(config, train, test, strategy, derive_seed(seed, 1000 + f), threshold);
    res.recall.push_back(m.recall);
    res.folds.push_back(m);
  }
  return res;
}

std::vector<ParamMap> expand_grid(const ParamGrid& grid, const ParamMap& base) {
  std::vector<ParamMap> out{base};
  for (const auto& [name, values] : grid) {
    if (values.empty()) throw ValidationError("grid parameter '" + name + "' has no values");
    std::vector<ParamMap> next;
    next.reserve(out.size() * values.size());
    for (const auto& partial : out)
      for (double v : values) {
        auto p = partial;
        p[name] = v;
        next.push_back(std::move(p));
      }
    out = std::move(next);
  }
  return out;
}

GridSearchResult grid_search(const ModelConfig& base, const ParamGrid& grid, const EncodedDataset& data,
                             const SamplingStrategy& strategy, int cv_k, std::uint64_t seed) {
  if (grid.empty()) throw ValidationError("grid search requires a non-empty grid");
  GridSearchResult out;
  std::optional<std::size_t> best;
  for (auto& params : expand_grid(grid, base.params)) {
    GridPoint point;
    point.params = params;
    try {
      ModelConfig cfg = base;
      cfg.params = params;
      point.result = cross_validate(cfg, data, strategy, cv_k, seed);
    } catch (const std::exception& e) {
      point.error = e.what();
    }
    out.points.push_back(std::move(point));
    const auto& cur = out.points.back();
    if (!cur.result) continue;
    if (!best) {
      best = out.points.size() - 1;
      continue;
    }
    const auto& incumbent = *out.points[*best].result;
    const double r = cur.result->mean_recall(), rb = incumbent.mean_recall();
    if (r > rb || (r == rb && cur.result->mean_f1() > incumbent.mean_f1())) best = out.points.size() - 1;
  }
  if (!best) throw ValidationError("grid search failed at every lattice point: " + out.points.front().error);
  out.best_params = out.points[*best].params;
  out.best = *out.points[*best].result;
  return out;
}

// ---------------------------------------------------------------------------

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw ValidationError("ANOVA requires at least 2 groups");
  double total = 0.0;
  std::size_t n_total = 0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw ValidationError("ANOVA requires at least 2 values per group");
    total += std::accumulate(g.begin(), g.end(), 0.0);
    n_total += g.size();
  }
  const double grand = total / static_cast<double>(n_total);
  AnovaResult r;
  for (const auto& g : groups) {
    const double m = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
    r.ss_between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double v : g) r.ss_within += (v - m) * (v - m);
  }
  r.df_between = static_cast<int>(groups.size()) - 1;
  r.df_within = static_cast<int>(n_total - groups.size());
  if (r.ss_within == 0.0) {
    if (r.ss_between == 0.0) {
      r.f_stat = 0.0;
      r.p_value = 1.0;
    } else {
      r.f_stat = std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
      r.degenerate = true;
    }
    return r;
  }
  r.f_stat = (r.ss_between / r.df_between) / (r.ss_within / r.df_within);
  r.p_value = stats::f_sf(r.f_stat, r.df_between, r.df_within);
  return r;
}

std::vector<TukeyRow> tukey_hsd(const NamedGroups& groups_in, double alpha) {
  if (groups_in.size() < 2) throw ValidationError("Tukey HSD requires at least 2 groups");
  auto groups = groups_in;
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [name, values] : groups)
    if (values.empty()) throw ValidationError("Tukey HSD group '" + name + "' is empty");

  const std::size_t m = groups.size();
  std::vector<double> means(m);
  double ssw = 0.0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& v = groups[i].second;
    means[i] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    for (double x : v) ssw += (x - means[i]) * (x - means[i]);
    total += v.size();
  }
  if (total <= m) throw ValidationError("Tukey HSD needs more observations than groups");
  const double df = static_cast<double>(total - m);
  const double msw = ssw / df;
  if (!(msw > 0)) throw NumericError("Tukey HSD undefined: within-group variance is zero");
  const double q_crit = stats::studentized_range_quantile(alpha, static_cast<double>(m), df);

  std::vector<TukeyRow> rows;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      TukeyRow row;
      row.group1 = groups[i].first;
      row.group2 = groups[j].first;
      row.meandiff = means[j] - means[i];
      // Tukey-Kramer standard error; equals sqrt(msw / n) for equal sizes.
      const double se = std::sqrt(0.5 * msw *
                                  (1.0 / static_cast<double>(groups[i].second.size()) +
                                   1.0 / static_cast<double>(groups[j].second.size())));
      row.lower = row.meandiff - q_crit * se;
      row.upper = row.meandiff + q_crit * se;
      row.p_adj = stats::studentized_range_sf(std::abs(row.meandiff) / se, static_cast<double>(m), df);
      row.reject = row.p_adj < alpha;
      rows.push_back(std::move(row));
    }
  return rows;
}

std::string default_model_name(ModelFamily family, const ParamMap& params) {
  switch (family) {
    case ModelFamily::logistic: return "Logistic Regression";
    case ModelFamily::tree: return "Decision Tree";
    case ModelFamily::forest: return "Random Forest";
    case ModelFamily::gbdt: {
      auto it = params.find("depthwise");
      return it != params.end() && it->second != 0.0 ? "GBDT (depth-wise)" : "GBDT (leaf-wise)";
    }
    case ModelFamily::knn: return "KNN";
  }
  return "model";
}

EvaluationReport comparison_report(const std::vector<CvResult>& results, double alpha) {
  if (results.empty()) throw ValidationError("comparison report requires at least one model");
  const auto& ref = results.front();
  for (const auto& r : results) {
    if (r.k != ref.k || r.seed != ref.seed || r.strategy.kind != ref.strategy.kind ||
        r.recall.size() != static_cast<std::size_t>(r.k))
      throw ValidationError("inconsistent fold configuration between '" + ref.model_name + "' and '" +
                            r.model_name + "'");
  }
  EvaluationReport rep;
  rep.strategy = to_string(ref.strategy.kind);
  rep.alpha = alpha;
  for (const auto& r : results) rep.rows.push_back({r.model_name, r.mean()});
  std::stable_sort(rep.rows.begin(), rep.rows.end(),
                   [](const ReportRow& a, const ReportRow& b) { return a.metrics.f1 > b.metrics.f1; });
  if (results.size() >= 2) {
    std::vector<std::vector<double>> groups;
    NamedGroups named;
    for (const auto& r : results) {
      groups.push_back(r.recall);
      named.emplace_back(r.model_name, r.recall);
    }
    rep.anova = anova_oneway(groups);
    try {
      rep.tukey = tukey_hsd(named, alpha);
    } catch (const NumericError&) {
      // zero within-group variance: Tukey undefined, ANOVA carries the degeneracy flag
    }
  }
  return rep;
}

}  // namespace diabrisk
