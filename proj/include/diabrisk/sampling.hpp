#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "diabrisk/dataset.hpp"

namespace diabrisk {

enum class SamplingKind { original, smote, undersample };

std::string to_string(SamplingKind kind);
/// Accepts "original"/"none", "smote", "undersample".
SamplingKind sampling_kind_from_string(const std::string& s);

struct SamplingStrategy {
  SamplingKind kind = SamplingKind::original;
  int k_neighbors = 5;
  std::uint64_t seed = 0;
};

struct SyntheticOrigin {
  std::size_t parent = 0;    // input row index
  std::size_t neighbor = 0;  // input row index of the chosen neighbor
  double u = 0.0;
};

struct ResampledDataset {
  EncodedDataset dataset;
  std::vector<bool> synthetic_mask;
  // For each output row, the input row it came from (the parent for synthetics).
  std::vector<std::size_t> source_index;
  // One entry per synthetic row, in output order.
  std::vector<SyntheticOrigin> origins;
  SamplingStrategy strategy;
};

/// Raises the minority class to the majority count by interpolating toward
/// one of the k Euclidean nearest minority neighbors (ties by lowest index).
/// `fixed_u` pins the interpolation factor; it exists for tests.
ResampledDataset smote(const EncodedDataset& ds, int k, std::uint64_t seed,
                       std::optional<double> fixed_u = std::nullopt);

/// Subsamples the majority class without replacement to the minority count.
/// Surviving rows keep their input order.
ResampledDataset random_undersample(const EncodedDataset& ds, std::uint64_t seed);

ResampledDataset apply_sampling(const EncodedDataset& ds, const SamplingStrategy& strategy);

}  // namespace diabrisk
