#pragma once

#include <functional>

namespace diabrisk::stats {

double normal_pdf(double z);
double normal_cdf(double z);
/// 1 - normal_cdf(z) without cancellation for large z.
double normal_sf(double z);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

double f_cdf(double f, double df1, double df2);
/// Upper tail 1 - F_cdf, computed directly for small p-values.
double f_sf(double f, double df1, double df2);

double student_t_cdf(double t, double df);
double student_t_two_sided_p(double t, double df);

/// P(Q <= q) for the studentized range of `groups` means with `df` error
/// degrees of freedom. Outer integral over the scaled chi density, inner
/// integral over the normal density of the range of `groups` normals.
double studentized_range_cdf(double q, double groups, double df);
double studentized_range_sf(double q, double groups, double df);
/// Upper-alpha critical value: P(Q > q) = alpha, found by bisection.
double studentized_range_quantile(double alpha, double groups, double df);

/// Adaptive Gauss-Kronrod (7/15) integration of f over [a, b].
double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol = 1e-12,
                 double rel_tol = 1e-10);

}  // namespace diabrisk::stats
