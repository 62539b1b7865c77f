#pragma once

// Histogram binning shared by the CART and boosted-tree learners.

#include <cstdint>
#include <vector>

#include "diabrisk/matrix.hpp"

namespace diabrisk::detail {

struct BinnedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  // upper[f][b]: inclusive upper edge of bin b for feature f; the last edge is +inf.
  std::vector<std::vector<double>> upper;
  std::vector<std::uint16_t> bins;  // row-major, rows x cols

  std::uint16_t at(std::size_t r, std::size_t f) const { return bins[r * cols + f]; }
  std::size_t bin_count(std::size_t f) const { return upper[f].size(); }
};

/// At most max_bins bins per feature. When a feature has no more distinct
/// values than max_bins every distinct value gets its own bin and split
/// thresholds are exact midpoints.
BinnedMatrix bin_features(const Matrix& x, int max_bins);

}  // namespace diabrisk::detail
