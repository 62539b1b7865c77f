#include "diabrisk/insights.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>

#include "diabrisk/error.hpp"

namespace diabrisk {

std::optional<std::size_t> CorrelationMatrix::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < variables.size(); ++i)
    if (variables[i] == name) return i;
  return std::nullopt;
}

double CorrelationMatrix::at(const std::string& a, const std::string& b) const {
  auto i = index_of(a);
  auto j = index_of(b);
  if (!i || !j) throw ValidationError("correlation matrix has no entry for '" + a + "' x '" + b + "'");
  return r[*i][*j];
}

CorrelationMatrix pearson_matrix(const EncodedDataset& ds, const std::vector<std::string>& vars) {
  if (ds.size() < 2) throw ValidationError("correlation needs at least 2 rows");
  const auto n = static_cast<double>(ds.size());

  CorrelationMatrix out;
  std::vector<std::vector<double>> centred;
  std::vector<double> norms;
  for (const auto& name : vars) {
    std::vector<double> col;
    if (name == ds.schema.target_name()) {
      col.assign(ds.target.begin(), ds.target.end());
    } else {
      col = ds.rows.column(ds.schema.index_of(name));
    }
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / n;
    double ss = 0.0;
    for (auto& v : col) {
      v -= mean;
      ss += v * v;
    }
    if (!(ss > 0.0)) {
      out.excluded.push_back(name);
      continue;
    }
    out.variables.push_back(name);
    centred.push_back(std::move(col));
    norms.push_back(std::sqrt(ss));
  }

  const std::size_t m = out.variables.size();
  out.r.assign(m, std::vector<double>(m, 1.0));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < centred[a].size(); ++i) s += centred[a][i] * centred[b][i];
      const double v = std::clamp(s / (norms[a] * norms[b]), -1.0, 1.0);
      out.r[a][b] = out.r[b][a] = v;
    }
  return out;
}

const std::vector<std::string>& comorbidity_variables() {
  static const std::vector<std::string> vars{"HighBP", "HighChol", "HeartDiseaseorAttack", "Stroke"};
  return vars;
}

CorrelationMatrix reference_comorbidity_correlations() {
  CorrelationMatrix c;
  c.variables = {columns::kTargetBinary};
  const auto& vars = comorbidity_variables();
  c.variables.insert(c.variables.end(), vars.begin(), vars.end());
  const double ref[] = {0.26, 0.20, 0.17, 0.10};
  const std::size_t m = c.variables.size();
  c.r.assign(m, std::vector<double>(m, std::nan("")));
  for (std::size_t i = 0; i < m; ++i) c.r[i][i] = 1.0;
  for (std::size_t i = 1; i < m; ++i) c.r[0][i] = c.r[i][0] = ref[i - 1];
  return c;
}

std::string to_string(AlertSeverity s) {
  switch (s) {
    case AlertSeverity::info: return "info";
    case AlertSeverity::elevated: return "elevated";
    case AlertSeverity::high: return "high";
  }
  return "info";
}

namespace {

struct ConditionText {
  const char* feature;
  const char* label;
  const char* risk;
};

constexpr ConditionText kConditions[] = {
    {"HighBP", "High blood pressure", "cardiovascular"},
    {"HighChol", "High cholesterol", "cardiovascular"},
    {"HeartDiseaseorAttack", "Heart disease or heart attack", "cardiovascular"},
    {"Stroke", "Stroke", "stroke-related"},
};

std::string fmt_r(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", r);
  return buf;
}

double target_correlation(const CorrelationMatrix& corr, const std::string& feature) {
  for (const char* target : {columns::kTargetBinary, columns::kTarget3})
    if (corr.index_of(target) && corr.index_of(feature)) return corr.at(target, feature);
  throw ValidationError("correlation matrix lacks the diabetes-vs-" + feature + " entry");
}

}  // namespace

std::vector<ComorbidityAlert> comorbidity_alerts(const FeatureSchema& schema, std::span<const double> inputs,
                                                 bool predicted_positive, const CorrelationMatrix& corr) {
  if (inputs.size() != schema.size()) throw ValidationError("inputs do not match the schema width");
  bool any_present = false;
  for (const auto& c : kConditions) any_present |= inputs[schema.index_of(c.feature)] >= 0.5;

  std::vector<ComorbidityAlert> alerts;
  for (const auto& c : kConditions) {
    const double r = target_correlation(corr, c.feature);
    const bool present = inputs[schema.index_of(c.feature)] >= 0.5;
    ComorbidityAlert a;
    a.condition = c.feature;
    a.label = c.label;
    a.correlation_with_diabetes = r;
    const std::string cite = " (correlation with diabetes r = " + fmt_r(r) + ")";
    if (present && predicted_positive) {
      a.severity = AlertSeverity::high;
      a.message = std::string(c.label) + " together with a predicted diabetes risk raises " + c.risk +
                  " risk" + cite + ". Discuss combined management with a clinician.";
    } else if (present) {
      a.severity = AlertSeverity::elevated;
      a.message = std::string(c.label) + " is reported" + cite +
                  ". It co-occurs with diabetes; keep up regular monitoring.";
    } else if (predicted_positive && !any_present && r >= 0.20) {
      a.severity = AlertSeverity::info;
      a.message = "Diabetes risk is associated with " + std::string(c.label) + cite + "; consider screening for it.";
    } else {
      continue;
    }
    alerts.push_back(std::move(a));
  }
  std::stable_sort(alerts.begin(), alerts.end(), [](const auto& a, const auto& b) {
    if (a.severity != b.severity) return a.severity > b.severity;
    return a.correlation_with_diabetes > b.correlation_with_diabetes;
  });
  return alerts;
}

std::vector<RankedContribution> top_contributions(const ShapExplanation& e, std::size_t k) {
  std::vector<std::size_t> order(e.contributions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(e.contributions[a]) > std::abs(e.contributions[b]);
  });
  order.resize(std::min(k, order.size()));
  std::vector<RankedContribution> out;
  for (auto j : order) out.push_back({e.feature_names.at(j), e.contributions[j]});
  return out;
}

namespace {

struct Rule {
  const char* feature;
  const char* condition;
  std::function<bool(double)> holds;
  const char* message;
  int priority;
};

const std::vector<Rule>& rule_table() {
  static const std::vector<Rule> rules{
      {"Smoker", "Smoker = 1", [](double v) { return v >= 0.5; },
       "Quitting smoking lowers both diabetes and cardiovascular risk; ask about cessation programmes.", 1},
      {"BMI", "BMI >= 30", [](double v) { return v >= 30.0; },
       "A structured weight-management plan can substantially reduce diabetes risk.", 2},
      {"PhysActivity", "PhysActivity = 0", [](double v) { return v < 0.5; },
       "Aim for at least 150 minutes of moderate physical activity per week.", 3},
      {"GenHlth", "GenHlth >= 4", [](double v) { return v >= 4.0; },
       "Your self-rated health is fair or poor; schedule a general check-up.", 4},
      {"HvyAlcoholConsump", "HvyAlcoholConsump = 1", [](double v) { return v >= 0.5; },
       "Reduce alcohol intake to within recommended limits.", 5},
      {"Fruits", "Fruits = 0", [](double v) { return v < 0.5; },
       "Include fruit in your diet at least once a day.", 6},
      {"Veggies", "Veggies = 0", [](double v) { return v < 0.5; },
       "Include vegetables in your diet at least once a day.", 6},
      {"CholCheck", "CholCheck = 0", [](double v) { return v < 0.5; },
       "You have not had a cholesterol check in five years; arrange a screening.", 7},
      {"NoDocbcCost", "NoDocbcCost = 1", [](double v) { return v >= 0.5; },
       "Cost kept you from seeing a doctor; look into community health centres or coverage assistance.", 8},
  };
  return rules;
}

constexpr int kMaintenancePriority = 100;

}  // namespace

std::vector<Recommendation> recommendations(const FeatureSchema& schema, std::span<const double> inputs,
                                            const std::vector<RankedContribution>& shap_top) {
  if (inputs.size() != schema.size()) throw ValidationError("inputs do not match the schema width");
  std::vector<Recommendation> out;
  for (const auto& rule : rule_table()) {
    auto idx = schema.find(rule.feature);
    if (!idx || !rule.holds(inputs[*idx])) continue;
    const bool backed = std::any_of(shap_top.begin(), shap_top.end(), [&](const RankedContribution& c) {
      return c.feature == rule.feature && c.phi > 0.0;
    });
    if (backed) out.push_back({rule.feature, rule.condition, rule.message, rule.priority});
  }
  if (out.empty())
    out.push_back({"", "", "Keep up your current habits and repeat this assessment annually.", kMaintenancePriority});
  return out;
}

}  // namespace diabrisk
