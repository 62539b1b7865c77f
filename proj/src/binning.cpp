#include "binning.hpp"

#include <algorithm>
#include <limits>

#include "diabrisk/error.hpp"

namespace diabrisk::detail {

namespace {

double midpoint(double a, double b) {
  double m = a + (b - a) / 2.0;
  return m < b ? m : a;
}

std::vector<double> feature_edges(std::vector<double> values, int max_bins) {
  std::sort(values.begin(), values.end());
  std::vector<double> distinct;
  std::vector<std::size_t> counts;
  for (double v : values) {
    if (distinct.empty() || v != distinct.back()) {
      distinct.push_back(v);
      counts.push_back(1);
    } else {
      ++counts.back();
    }
  }
  std::vector<double> edges;
  const auto limit = static_cast<std::size_t>(max_bins);
  if (distinct.size() <= limit) {
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i) edges.push_back(midpoint(distinct[i], distinct[i + 1]));
  } else {
    const double target = static_cast<double>(values.size()) / static_cast<double>(max_bins);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < distinct.size() && edges.size() + 1 < limit; ++i) {
      acc += static_cast<double>(counts[i]);
      if (acc >= target) {
        edges.push_back(midpoint(distinct[i], distinct[i + 1]));
        acc = 0.0;
      }
    }
  }
  edges.push_back(std::numeric_limits<double>::infinity());
  return edges;
}

}  // namespace

BinnedMatrix bin_features(const Matrix& x, int max_bins) {
  if (max_bins < 2 || max_bins > 65535) throw ValidationError("max_bins must be in [2, 65535]");
  BinnedMatrix out;
  out.rows = x.rows();
  out.cols = x.cols();
  out.upper.resize(x.cols());
  out.bins.resize(x.rows() * x.cols());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    out.upper[f] = feature_edges(x.column(f), max_bins);
    const auto& up = out.upper[f];
    for (std::size_t r = 0; r < x.rows(); ++r) {
      auto it = std::lower_bound(up.begin(), up.end(), x(r, f));
      out.bins[r * out.cols + f] = static_cast<std::uint16_t>(it - up.begin());
    }
  }
  return out;
}

}  // namespace diabrisk::detail
