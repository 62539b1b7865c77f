// L2-regularized logistic regression fit by damped Newton iterations on
// standardized features.

#include <Eigen/Dense>
#include <cmath>

#include "diabrisk/error.hpp"
#include "diabrisk/models.hpp"

namespace diabrisk {

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  const std::size_t n = x.rows(), p = x.cols();
  s.mean.assign(p, 0.0);
  s.scale.assign(p, 0.0);
  if (n == 0) return s;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < p; ++c) s.mean[c] += x(r, c);
  for (auto& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < p; ++c) {
      const double d = x(r, c) - s.mean[c];
      s.scale[c] += d * d;
    }
  for (auto& v : s.scale) {
    v = std::sqrt(v / static_cast<double>(n));
    if (!(v > 1e-12)) v = 0.0;
  }
  return s;
}

void Standardizer::apply(std::span<const double> x, std::span<double> out) const {
  for (std::size_t c = 0; c < x.size(); ++c) out[c] = scale[c] > 0 ? (x[c] - mean[c]) / scale[c] : 0.0;
}

Matrix Standardizer::apply(const Matrix& x) const {
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) apply(x.row(r), out.row(r));
  return out;
}

double LogisticModel::margin(std::span<const double> x) const {
  double m = intercept;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    const double s = standardizer.scale[c];
    if (s > 0) m += weights[c] * (x[c] - standardizer.mean[c]) / s;
  }
  return m;
}

namespace logistic_detail {

namespace {
double linear(std::span<const double> coef, std::span<const double> row) {
  double z = coef[0];
  for (std::size_t c = 0; c < row.size(); ++c) z += coef[c + 1] * row[c];
  return z;
}
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
}  // namespace

double objective(std::span<const double> coef, const Matrix& xs, std::span<const int> y, double l2) {
  double loss = 0.0;
  for (std::size_t r = 0; r < xs.rows(); ++r) {
    const double z = linear(coef, xs.row(r));
    loss += softplus(z) - y[r] * z;
  }
  loss /= static_cast<double>(xs.rows());
  double pen = 0.0;
  for (std::size_t c = 1; c < coef.size(); ++c) pen += coef[c] * coef[c];
  return loss + 0.5 * l2 * pen;
}

std::vector<double> gradient(std::span<const double> coef, const Matrix& xs, std::span<const int> y, double l2) {
  std::vector<double> g(coef.size(), 0.0);
  for (std::size_t r = 0; r < xs.rows(); ++r) {
    const auto row = xs.row(r);
    const double e = sigmoid(linear(coef, row)) - y[r];
    g[0] += e;
    for (std::size_t c = 0; c < row.size(); ++c) g[c + 1] += e * row[c];
  }
  const double inv_n = 1.0 / static_cast<double>(xs.rows());
  for (auto& v : g) v *= inv_n;
  for (std::size_t c = 1; c < coef.size(); ++c) g[c] += l2 * coef[c];
  return g;
}

}  // namespace logistic_detail

Classifier fit_logistic(const EncodedDataset& train, const LogisticParams& params) {
  const std::size_t positives = train.count_label(1);
  if (train.size() == 0 || positives == 0 || positives == train.size())
    throw ValidationError("logistic regression requires at least one row of each class");
  if (params.l2 < 0) throw ValidationError("l2 must be >= 0");

  LogisticModel model;
  model.params = params;
  model.standardizer = Standardizer::fit(train.rows);
  const Matrix xs = model.standardizer.apply(train.rows);
  const std::size_t n = xs.rows(), p = xs.cols(), d = p + 1;
  const std::span<const int> y(train.target);

  std::vector<double> coef(d, 0.0);
  double f = logistic_detail::objective(coef, xs, y, params.l2);
  int it = 0;
  double gnorm = 0.0;
  for (; it < params.max_iters; ++it) {
    auto g = logistic_detail::gradient(coef, xs, y, params.l2);
    gnorm = 0.0;
    for (double v : g) gnorm += v * v;
    gnorm = std::sqrt(gnorm);
    if (gnorm <= params.tol) break;

    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    Eigen::VectorXd xr(static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = xs.row(r);
      double z = coef[0];
      xr[0] = 1.0;
      for (std::size_t c = 0; c < p; ++c) {
        xr[static_cast<Eigen::Index>(c + 1)] = row[c];
        z += coef[c + 1] * row[c];
      }
      const double pr = sigmoid(z);
      hess.selfadjointView<Eigen::Lower>().rankUpdate(xr, pr * (1.0 - pr));
    }
    hess = hess.selfadjointView<Eigen::Lower>();
    hess /= static_cast<double>(n);
    for (std::size_t c = 1; c < d; ++c) hess(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)) += params.l2;
    hess.diagonal().array() += 1e-12;

    Eigen::VectorXd gv = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(d));
    Eigen::VectorXd step = hess.ldlt().solve(gv);
    if (!step.allFinite()) step = gv;

    // Backtracking line search (Armijo).
    const double slope = gv.dot(step);
    double t = 1.0;
    std::vector<double> trial(d);
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t c = 0; c < d; ++c) trial[c] = coef[c] - t * step[static_cast<Eigen::Index>(c)];
      const double ft = logistic_detail::objective(trial, xs, y, params.l2);
      if (ft <= f - 1e-4 * t * slope) {
        coef = trial;
        f = ft;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  model.intercept = coef[0];
  model.weights.assign(coef.begin() + 1, coef.end());
  model.iterations = it;
  model.final_gradient_norm = gnorm;
  return Classifier(std::move(model), train.schema.names());
}

}  // namespace diabrisk
