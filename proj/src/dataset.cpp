#include "diabrisk/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_set>

#include "diabrisk/error.hpp"

namespace diabrisk {

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::binary: return "binary";
    case FeatureKind::ordinal: return "ordinal";
    case FeatureKind::count: return "count";
    case FeatureKind::continuous: return "continuous";
  }
  return "continuous";
}

FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "binary") return FeatureKind::binary;
  if (s == "ordinal") return FeatureKind::ordinal;
  if (s == "count") return FeatureKind::count;
  if (s == "continuous") return FeatureKind::continuous;
  throw ValidationError("unknown feature kind '" + s + "'");
}

FeatureSchema::FeatureSchema(std::vector<FeatureSpec> features, std::string target_name)
    : features_(std::move(features)), target_name_(std::move(target_name)) {
  std::unordered_set<std::string> seen;
  for (const auto& f : features_) {
    if (!seen.insert(f.name).second) throw ValidationError("duplicate feature name '" + f.name + "'");
    if (!(f.valid_range.lo <= f.valid_range.hi))
      throw ValidationError("empty valid range for feature '" + f.name + "'");
  }
}

std::optional<std::size_t> FeatureSchema::find(const std::string& name) const {
  for (std::size_t i = 0; i < features_.size(); ++i)
    if (features_[i].name == name) return i;
  return std::nullopt;
}

std::size_t FeatureSchema::index_of(const std::string& name) const {
  auto i = find(name);
  if (!i) throw ValidationError("missing column '" + name + "'");
  return *i;
}

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.push_back(f.name);
  return out;
}

FeatureSchema FeatureSchema::with_appended(std::span<const FeatureSpec> extra) const {
  auto fs = features_;
  fs.insert(fs.end(), extra.begin(), extra.end());
  return FeatureSchema(std::move(fs), target_name_);
}

FeatureSchema FeatureSchema::with_target(std::string target_name) const {
  return FeatureSchema(features_, std::move(target_name));
}

namespace {

FeatureSpec bin(const char* name) { return {name, FeatureKind::binary, {0, 1}, std::nullopt}; }

}  // namespace

const FeatureSchema& brfss_schema() {
  static const FeatureSchema schema(
      {
          bin("HighBP"),
          bin("HighChol"),
          bin("CholCheck"),
          {"BMI", FeatureKind::continuous, {10, 100}, ValueRange{15, 60}},
          bin("Smoker"),
          bin("Stroke"),
          bin("HeartDiseaseorAttack"),
          bin("PhysActivity"),
          bin("Fruits"),
          bin("Veggies"),
          bin("HvyAlcoholConsump"),
          bin("AnyHealthcare"),
          bin("NoDocbcCost"),
          {"GenHlth", FeatureKind::ordinal, {1, 5}, std::nullopt},
          {"MentHlth", FeatureKind::count, {0, 30}, std::nullopt},
          {"PhysHlth", FeatureKind::count, {0, 30}, std::nullopt},
          bin("DiffWalk"),
          bin("Sex"),
          {"Age", FeatureKind::ordinal, {1, 13}, std::nullopt},
          {"Education", FeatureKind::ordinal, {1, 6}, std::nullopt},
          {"Income", FeatureKind::ordinal, {1, 8}, std::nullopt},
      },
      columns::kTarget3);
  return schema;
}

const std::vector<FeatureSpec>& engineered_feature_specs() {
  static const std::vector<FeatureSpec> specs{
      {columns::kRiskFactorCount, FeatureKind::count, {0, 4}, std::nullopt},
      {columns::kLifestyleScore, FeatureKind::continuous, {1, 5}, std::nullopt},
      {columns::kHealthcareScore, FeatureKind::continuous, {1, 5}, std::nullopt},
  };
  return specs;
}

const FeatureSchema& brfss_engineered_schema() {
  static const FeatureSchema schema =
      brfss_schema().with_appended(engineered_feature_specs()).with_target(columns::kTargetBinary);
  return schema;
}

std::size_t EncodedDataset::count_label(int label) const {
  return static_cast<std::size_t>(std::count(target.begin(), target.end(), label));
}

double EncodedDataset::positive_rate() const {
  if (target.empty()) return 0.0;
  return static_cast<double>(count_label(1)) / static_cast<double>(target.size());
}

EncodedDataset EncodedDataset::subset(std::span<const std::size_t> idx) const {
  EncodedDataset out;
  out.schema = schema;
  out.rows = rows.select_rows(idx);
  out.target.reserve(idx.size());
  for (auto i : idx) out.target.push_back(target[i]);
  out.provenance = provenance;
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

void split_fields(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

bool parse_number(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

RawTable parse_csv(std::string_view text, const FeatureSchema& schema, std::string source) {
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      line = text.substr(pos, nl - pos);
      pos = nl + 1;
      if (!trim(line).empty()) return true;
    }
    return false;
  };

  std::string_view header;
  if (!next_line(header)) throw ValidationError(source + ": empty file");
  std::vector<std::string_view> fields;
  split_fields(header, fields);

  auto locate = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < fields.size(); ++i)
      if (fields[i] == name) return i;
    return std::nullopt;
  };

  std::vector<std::size_t> col_of(schema.size());
  for (std::size_t f = 0; f < schema.size(); ++f) {
    auto c = locate(schema[f].name);
    if (!c) throw ValidationError(source + ": missing column '" + schema[f].name + "'");
    col_of[f] = *c;
  }
  std::string target_name = schema.target_name();
  auto target_col = locate(target_name);
  if (!target_col && target_name == columns::kTarget3) {
    target_name = columns::kTargetBinary;
    target_col = locate(target_name);
  }
  if (!target_col) throw ValidationError(source + ": missing column '" + schema.target_name() + "'");

  RawTable raw;
  raw.schema = schema.with_target(target_name);
  raw.source = std::move(source);
  raw.rows = Matrix(0, schema.size());
  std::vector<double> row(schema.size());
  std::string_view line;
  std::size_t line_no = 1;
  while (next_line(line)) {
    ++line_no;
    split_fields(line, fields);
    auto cell = [&](std::size_t col, const std::string& name) {
      if (col >= fields.size())
        throw ValidationError(raw.source + ": line " + std::to_string(line_no) + " is missing column '" +
                              name + "'");
      double v = 0.0;
      if (!parse_number(fields[col], v))
        throw ValidationError(raw.source + ": unparseable cell at line " + std::to_string(line_no) +
                              ", column '" + name + "': '" + std::string(fields[col]) + "'");
      return v;
    };
    for (std::size_t f = 0; f < schema.size(); ++f) row[f] = cell(col_of[f], schema[f].name);
    raw.rows.append_row(row);
    raw.target.push_back(cell(*target_col, target_name));
  }
  if (raw.rows.rows() == 0) throw ValidationError(raw.source + ": no data rows");
  return raw;
}

RawTable load_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_csv(text, schema, path.string());
}

// ---------------------------------------------------------------------------
// Recoding and deduplication

namespace {

std::string ratio_note(const EncodedDataset& ds) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  double pos = 100.0 * ds.positive_rate();
  os << "class ratio: " << (100.0 - pos) << "% label-0 / " << pos << "% label-1 (n=" << ds.size() << ")";
  return os.str();
}

}  // namespace

EncodedDataset recode_target(const RawTable& raw) {
  EncodedDataset ds;
  ds.rows = Matrix(0, raw.schema.size());
  ds.rows.reserve_rows(raw.row_count());
  const bool already_binary = raw.schema.target_name() == columns::kTargetBinary;
  std::size_t dropped = 0;
  for (std::size_t r = 0; r < raw.row_count(); ++r) {
    double t = raw.target[r];
    int label = 0;
    if (already_binary) {
      if (t != 0.0 && t != 1.0)
        throw ValidationError("target value " + std::to_string(t) + " at row " + std::to_string(r + 1) +
                              " is not in {0,1}");
      label = static_cast<int>(t);
    } else if (t == 0.0) {
      label = 0;
    } else if (t == 1.0) {
      ++dropped;
      continue;
    } else if (t == 2.0) {
      label = 1;
    } else {
      throw ValidationError("target value " + std::to_string(t) + " at row " + std::to_string(r + 1) +
                            " is not in {0,1,2}");
    }
    ds.rows.append_row(raw.rows.row(r));
    ds.target.push_back(label);
  }
  if (ds.target.empty()) throw ValidationError("no rows left after removing prediabetic entries");
  ds.schema = raw.schema.with_target(columns::kTargetBinary);
  ds.provenance.push_back("load: " + raw.source + " (" + std::to_string(raw.row_count()) + " rows)");
  if (!already_binary)
    ds.provenance.push_back("recode: dropped " + std::to_string(dropped) + " prediabetic rows; 2 -> 1");
  ds.provenance.push_back(ratio_note(ds));
  return ds;
}

EncodedDataset recode_target(const EncodedDataset& ds) {
  if (ds.schema.target_name() == columns::kTargetBinary) return ds;
  RawTable raw;
  raw.schema = ds.schema;
  raw.rows = ds.rows;
  raw.target.assign(ds.target.begin(), ds.target.end());
  raw.source = "dataset";
  auto out = recode_target(raw);
  out.provenance.insert(out.provenance.begin(), ds.provenance.begin(), ds.provenance.end());
  return out;
}

namespace {

struct RowKey {
  std::span<const double> values;
  int label;
};

struct RowKeyHash {
  std::size_t operator()(const RowKey& k) const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::uint64_t v) {
      h ^= v;
      h *= 1099511628211ull;
    };
    for (double d : k.values) {
      if (d == 0.0) d = 0.0;  // fold -0.0
      std::uint64_t bits;
      std::memcpy(&bits, &d, sizeof bits);
      mix(bits);
    }
    mix(static_cast<std::uint64_t>(k.label));
    return static_cast<std::size_t>(h);
  }
};

struct RowKeyEq {
  bool operator()(const RowKey& a, const RowKey& b) const {
    return a.label == b.label && std::equal(a.values.begin(), a.values.end(), b.values.begin(), b.values.end());
  }
};

}  // namespace

DedupResult deduplicate(const EncodedDataset& ds) {
  std::unordered_set<RowKey, RowKeyHash, RowKeyEq> seen;
  seen.reserve(ds.size() * 2);
  std::vector<std::size_t> keep;
  keep.reserve(ds.size());
  for (std::size_t r = 0; r < ds.size(); ++r)
    if (seen.insert(RowKey{ds.rows.row(r), ds.target[r]}).second) keep.push_back(r);
  DedupResult res;
  res.removed = ds.size() - keep.size();
  res.dataset = ds.subset(keep);
  res.dataset.provenance.push_back("deduplicate: removed " + std::to_string(res.removed) + " rows");
  res.dataset.provenance.push_back(ratio_note(res.dataset));
  return res;
}

ValidationReport validate_ranges(const EncodedDataset& ds) {
  ValidationReport rep;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t f = 0; f < ds.schema.size(); ++f) {
      const auto& spec = ds.schema[f];
      double v = ds.rows(r, f);
      if (!std::isfinite(v))
        throw ValidationError("non-finite value in column '" + spec.name + "' at row " + std::to_string(r));
      if (spec.kind == FeatureKind::count && v < 0)
        throw ValidationError("negative count in column '" + spec.name + "' at row " + std::to_string(r));
      if (!spec.valid_range.contains(v))
        rep.violations.push_back({r, spec.name, v});
      else if (spec.typical_range && !spec.typical_range->contains(v))
        rep.extremes.push_back({r, spec.name, v});
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Composite scores

CompositeScores compute_scores(const FeatureSchema& schema, std::span<const double> row,
                               const ScoreConfig& cfg) {
  auto at = [&](const char* name) { return row[schema.index_of(name)]; };
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };

  CompositeScores s;
  s.risk_factor_count =
      static_cast<int>(at("HighBP") + at("HighChol") + at("Stroke") + at("HeartDiseaseorAttack"));

  const double lifestyle[] = {
      clamp01(at("PhysActivity")),
      clamp01(at("Fruits")),
      clamp01(at("Veggies")),
      clamp01(1.0 - at("Smoker")),
      clamp01(1.0 - at("HvyAlcoholConsump")),
      clamp01(1.0 - at("MentHlth") / cfg.health_days_scale),
      clamp01(1.0 - at("PhysHlth") / cfg.health_days_scale),
  };
  double sum = 0.0;
  for (double v : lifestyle) sum += v;
  s.lifestyle_score = 1.0 + 4.0 * sum / 7.0;

  const double access[] = {
      clamp01(at("AnyHealthcare")),
      clamp01(1.0 - at("NoDocbcCost")),
      clamp01(at("CholCheck")),
  };
  s.healthcare_access_score = 1.0 + 4.0 * (access[0] + access[1] + access[2]) / 3.0;
  return s;
}

EncodedDataset engineer_features(const EncodedDataset& ds, const ScoreConfig& cfg) {
  for (const auto& spec : engineered_feature_specs())
    if (ds.schema.find(spec.name)) throw ValidationError("column '" + spec.name + "' already present");
  // Resolve every source column up front so a missing one fails before any work.
  for (const char* name : {"HighBP", "HighChol", "Stroke", "HeartDiseaseorAttack", "PhysActivity", "Fruits",
                           "Veggies", "Smoker", "HvyAlcoholConsump", "MentHlth", "PhysHlth", "AnyHealthcare",
                           "NoDocbcCost", "CholCheck"})
    ds.schema.index_of(name);

  EncodedDataset out;
  out.schema = ds.schema.with_appended(engineered_feature_specs());
  out.target = ds.target;
  out.provenance = ds.provenance;
  const std::size_t p = ds.feature_count();
  std::vector<double> data;
  data.reserve(ds.size() * (p + 3));
  for (std::size_t r = 0; r < ds.size(); ++r) {
    auto row = ds.rows.row(r);
    data.insert(data.end(), row.begin(), row.end());
    auto s = compute_scores(ds.schema, row, cfg);
    data.push_back(static_cast<double>(s.risk_factor_count));
    data.push_back(s.lifestyle_score);
    data.push_back(s.healthcare_access_score);
  }
  out.rows = Matrix(ds.size(), p + 3, std::move(data));
  out.provenance.push_back("engineer: appended RiskFactorCount, LifestyleScore, HealthcareScore");
  return out;
}

PreparedData prepare_dataset(const RawTable& raw, const ScoreConfig& cfg) {
  PreparedData out;
  out.raw_rows = raw.row_count();
  auto recoded = recode_target(raw);
  out.after_recode = recoded.size();
  auto dedup = deduplicate(recoded);
  out.duplicates_removed = dedup.removed;
  out.validation = validate_ranges(dedup.dataset);
  dedup.dataset.provenance.push_back("validate: " + std::to_string(out.validation.violations.size()) +
                                     " violations, " + std::to_string(out.validation.extremes.size()) +
                                     " extreme values retained");
  out.dataset = engineer_features(dedup.dataset, cfg);
  return out;
}

}  // namespace diabrisk
