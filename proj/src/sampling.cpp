#include "diabrisk/sampling.hpp"

#include <algorithm>
#include <unordered_map>

#include "diabrisk/error.hpp"
#include "diabrisk/rng.hpp"

namespace diabrisk {

std::string to_string(SamplingKind kind) {
  switch (kind) {
    case SamplingKind::original: return "original";
    case SamplingKind::smote: return "smote";
    case SamplingKind::undersample: return "undersample";
  }
  return "original";
}

SamplingKind sampling_kind_from_string(const std::string& s) {
  if (s == "original" || s == "none") return SamplingKind::original;
  if (s == "smote") return SamplingKind::smote;
  if (s == "undersample") return SamplingKind::undersample;
  throw ValidationError("unknown sampling strategy '" + s + "'");
}

namespace {

struct ClassSplit {
  std::vector<std::size_t> minority;
  std::vector<std::size_t> majority;
  int minority_label = 1;
};

ClassSplit split_classes(const EncodedDataset& ds) {
  std::vector<std::size_t> zeros, ones;
  for (std::size_t i = 0; i < ds.size(); ++i) (ds.target[i] == 1 ? ones : zeros).push_back(i);
  if (zeros.empty() || ones.empty()) throw ValidationError("resampling requires both classes to be non-empty");
  ClassSplit s;
  if (ones.size() <= zeros.size()) {
    s.minority = std::move(ones);
    s.majority = std::move(zeros);
    s.minority_label = 1;
  } else {
    s.minority = std::move(zeros);
    s.majority = std::move(ones);
    s.minority_label = 0;
  }
  return s;
}

// k nearest minority rows of minority[pos] (positions into `minority`),
// excluding itself, ordered by (distance, row index).
std::vector<std::size_t> minority_neighbors(const Matrix& x, const std::vector<std::size_t>& minority,
                                            std::size_t pos, int k) {
  const auto query = x.row(minority[pos]);
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(minority.size() - 1);
  for (std::size_t j = 0; j < minority.size(); ++j) {
    if (j == pos) continue;
    const auto other = x.row(minority[j]);
    double d = 0.0;
    for (std::size_t c = 0; c < query.size(); ++c) {
      double diff = query[c] - other[c];
      d += diff * diff;
    }
    dist.emplace_back(d, minority[j]);
  }
  const auto kk = static_cast<std::size_t>(k);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
  std::vector<std::size_t> out(kk);
  for (std::size_t i = 0; i < kk; ++i) out[i] = dist[i].second;
  return out;
}

}  // namespace

ResampledDataset smote(const EncodedDataset& ds, int k, std::uint64_t seed, std::optional<double> fixed_u) {
  if (k < 1) throw ValidationError("SMOTE requires k_neighbors >= 1");
  auto split = split_classes(ds);
  if (split.minority.size() < static_cast<std::size_t>(k) + 1)
    throw ValidationError("minority class has " + std::to_string(split.minority.size()) +
                          " rows; SMOTE with k=" + std::to_string(k) + " needs at least " + std::to_string(k + 1));

  ResampledDataset out;
  out.strategy = {SamplingKind::smote, k, seed};
  out.dataset = ds;
  out.synthetic_mask.assign(ds.size(), false);
  out.source_index.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out.source_index[i] = i;

  const std::size_t need = split.majority.size() - split.minority.size();
  Rng rng(seed);
  std::unordered_map<std::size_t, std::vector<std::size_t>> neighbor_cache;
  std::vector<double> synth(ds.feature_count());
  out.dataset.rows.reserve_rows(ds.size() + need);
  for (std::size_t s = 0; s < need; ++s) {
    const std::size_t pos = uniform_index(rng, split.minority.size());
    auto it = neighbor_cache.find(pos);
    if (it == neighbor_cache.end())
      it = neighbor_cache.emplace(pos, minority_neighbors(ds.rows, split.minority, pos, k)).first;
    const std::size_t nn = it->second[uniform_index(rng, it->second.size())];
    const double u = fixed_u ? *fixed_u : uniform01(rng);
    const std::size_t parent = split.minority[pos];
    const auto a = ds.rows.row(parent);
    const auto b = ds.rows.row(nn);
    for (std::size_t c = 0; c < synth.size(); ++c) synth[c] = a[c] + u * (b[c] - a[c]);
    out.dataset.rows.append_row(synth);
    out.dataset.target.push_back(split.minority_label);
    out.synthetic_mask.push_back(true);
    out.source_index.push_back(parent);
    out.origins.push_back({parent, nn, u});
  }
  out.dataset.provenance.push_back("smote: k=" + std::to_string(k) + " seed=" + std::to_string(seed) + ", " +
                                   std::to_string(need) + " synthetic rows");
  return out;
}

ResampledDataset random_undersample(const EncodedDataset& ds, std::uint64_t seed) {
  auto split = split_classes(ds);
  Rng rng(seed);
  // Partial Fisher-Yates: the first minority.size() slots are the sample.
  auto pool = split.majority;
  const std::size_t keep_n = split.minority.size();
  for (std::size_t i = 0; i < keep_n; ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
  std::vector<std::size_t> keep(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep_n));
  keep.insert(keep.end(), split.minority.begin(), split.minority.end());
  std::sort(keep.begin(), keep.end());

  ResampledDataset out;
  out.strategy = {SamplingKind::undersample, 0, seed};
  out.dataset = ds.subset(keep);
  out.synthetic_mask.assign(keep.size(), false);
  out.source_index = std::move(keep);
  out.dataset.provenance.push_back("undersample: seed=" + std::to_string(seed) + ", kept " +
                                   std::to_string(out.dataset.size()) + " of " + std::to_string(ds.size()) +
                                   " rows");
  return out;
}

ResampledDataset apply_sampling(const EncodedDataset& ds, const SamplingStrategy& strategy) {
  switch (strategy.kind) {
    case SamplingKind::smote: return smote(ds, strategy.k_neighbors, strategy.seed);
    case SamplingKind::undersample: return random_undersample(ds, strategy.seed);
    case SamplingKind::original: break;
  }
  ResampledDataset out;
  out.strategy = {SamplingKind::original, 0, strategy.seed};
  out.dataset = ds;
  out.synthetic_mask.assign(ds.size(), false);
  out.source_index.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out.source_index[i] = i;
  return out;
}

}  // namespace diabrisk
