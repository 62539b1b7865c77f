#include <algorithm>

#include "diabrisk/error.hpp"
#include "diabrisk/models.hpp"

namespace diabrisk {

Classifier fit_knn(const EncodedDataset& train, const KnnParams& params) {
  if (params.k < 1) throw ValidationError("knn requires k >= 1");
  if (static_cast<std::size_t>(params.k) > train.size())
    throw ValidationError("knn k=" + std::to_string(params.k) + " exceeds training size " +
                          std::to_string(train.size()));
  KnnModel m;
  m.params = params;
  if (params.standardize) {
    m.standardizer = Standardizer::fit(train.rows);
    m.train = m.standardizer.apply(train.rows);
  } else {
    m.train = train.rows;
  }
  m.labels = train.target;
  return Classifier(std::move(m), train.schema.names());
}

double KnnModel::probability(std::span<const double> x) const {
  thread_local std::vector<double> query;
  thread_local std::vector<std::pair<double, std::size_t>> dist;
  query.assign(x.begin(), x.end());
  if (params.standardize) standardizer.apply(x, query);

  const std::size_t n = train.rows(), p = train.cols();
  dist.resize(n);
  const double* data = train.data().data();
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = data + r * p;
    double d = 0.0;
    for (std::size_t c = 0; c < p; ++c) {
      const double diff = row[c] - query[c];
      d += diff * diff;
    }
    dist[r] = {d, r};
  }
  const auto k = static_cast<std::size_t>(params.k);
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
  std::size_t positives = 0;
  for (std::size_t i = 0; i < k; ++i) positives += labels[dist[i].second] == 1;
  return static_cast<double>(positives) / static_cast<double>(k);
}

}  // namespace diabrisk
