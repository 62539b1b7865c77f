#include "diabrisk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "diabrisk/error.hpp"

namespace diabrisk::stats {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }
double normal_sf(double z) { return 0.5 * std::erfc(z * kInvSqrt2); }

// ---------------------------------------------------------------------------
// Incomplete beta (modified Lentz continued fraction)

namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  throw NumericError("incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0) || !(b > 0)) throw NumericError("incomplete beta requires a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_cdf(double f, double df1, double df2) {
  if (f <= 0) return 0.0;
  if (std::isinf(f)) return 1.0;
  const double x = df1 * f / (df1 * f + df2);
  return incomplete_beta(df1 / 2.0, df2 / 2.0, x);
}

double f_sf(double f, double df1, double df2) {
  if (f <= 0) return 1.0;
  if (std::isinf(f)) return 0.0;
  const double y = df2 / (df2 + df1 * f);
  return incomplete_beta(df2 / 2.0, df1 / 2.0, y);
}

double student_t_two_sided_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

double student_t_cdf(double t, double df) {
  const double tail = 0.5 * student_t_two_sided_p(t, df);
  return t >= 0 ? 1.0 - tail : tail;
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod 7/15

namespace {

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

double gk_adaptive(const std::function<double(double)>& f, double a, double b, double abs_tol, double rel_tol,
                   int depth) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double kron = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double s = f(c - dx) + f(c + dx);
    kron += kWgk[j] * s;
    if (j % 2 == 1) gauss += kWg[j / 2] * s;
  }
  kron *= h;
  gauss *= h;
  const double err = std::abs(kron - gauss);
  if (depth >= 40 || err <= std::max(abs_tol, rel_tol * std::abs(kron))) return kron;
  return gk_adaptive(f, a, c, abs_tol / 2, rel_tol, depth + 1) + gk_adaptive(f, c, b, abs_tol / 2, rel_tol, depth + 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol, double rel_tol) {
  if (a == b) return 0.0;
  return gk_adaptive(f, a, b, abs_tol, rel_tol, 0);
}

// ---------------------------------------------------------------------------
// Studentized range

namespace {

// P(range of k iid standard normals <= w)
double range_cdf(double w, double k) {
  if (w <= 0) return 0.0;
  auto integrand = [&](double z) {
    // Phi(z) - Phi(z - w), computed on the tail that avoids cancellation.
    const double mass = z > 0 ? normal_sf(z - w) - normal_sf(z) : normal_cdf(z) - normal_cdf(z - w);
    if (mass <= 0) return 0.0;
    return normal_pdf(z) * std::pow(mass, k - 1.0);
  };
  double total = integrate(integrand, -9.0, 0.0, 1e-14, 1e-12) + integrate(integrand, 0.0, 9.0, 1e-14, 1e-12);
  return std::clamp(k * total, 0.0, 1.0);
}

}  // namespace

double studentized_range_cdf(double q, double groups, double df) {
  if (groups < 2) throw NumericError("studentized range needs at least 2 groups");
  if (!(df > 0)) throw NumericError("studentized range needs df > 0");
  if (q <= 0) return 0.0;
  if (std::isinf(q)) return 1.0;
  if (df > 1e5) return range_cdf(q, groups);

  // Density of s = sqrt(chi2_df / df).
  const double log_c = 0.5 * df * std::log(df) - std::lgamma(0.5 * df) - (0.5 * df - 1.0) * std::log(2.0);
  auto integrand = [&](double s) {
    if (s <= 0) return 0.0;
    const double log_g = log_c + (df - 1.0) * std::log(s) - 0.5 * df * s * s;
    return std::exp(log_g) * range_cdf(q * s, groups);
  };
  const double mode = std::sqrt(std::max(0.0, (df - 1.0) / df));
  const double spread = 10.0 / std::sqrt(df);
  const double lo = std::max(0.0, mode - spread);
  const double hi = mode + spread + 1.0;
  double total = integrate(integrand, lo, mode, 1e-13, 1e-11) + integrate(integrand, mode, hi, 1e-13, 1e-11);
  return std::clamp(total, 0.0, 1.0);
}

double studentized_range_sf(double q, double groups, double df) {
  return std::clamp(1.0 - studentized_range_cdf(q, groups, df), 0.0, 1.0);
}

double studentized_range_quantile(double alpha, double groups, double df) {
  if (!(alpha > 0 && alpha < 1)) throw NumericError("alpha must lie in (0, 1)");
  const double target = 1.0 - alpha;
  double lo = 0.0, hi = 4.0;
  while (studentized_range_cdf(hi, groups, df) < target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) throw NumericError("studentized range quantile bracket failed");
  }
  // Illinois-modified regula falsi on f(q) = cdf(q) - target.
  double f_lo = studentized_range_cdf(lo, groups, df) - target;
  double f_hi = studentized_range_cdf(hi, groups, df) - target;
  int side = 0;
  for (int i = 0; i < 100 && hi - lo > 1e-12 * std::max(1.0, hi); ++i) {
    double mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
    if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
    const double f_mid = studentized_range_cdf(mid, groups, df) - target;
    if (f_mid == 0.0) return mid;
    if ((f_mid < 0) == (f_lo < 0)) {
      lo = mid;
      f_lo = f_mid;
      if (side == -1) f_hi *= 0.5;
      side = -1;
    } else {
      hi = mid;
      f_hi = f_mid;
      if (side == 1) f_lo *= 0.5;
      side = 1;
    }
    if (std::abs(f_mid) < 1e-14) return mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace diabrisk::stats
