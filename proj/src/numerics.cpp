#include "msurv/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace msurv {

long double digamma_ld(long double x) {
  if (!(x > 0.0L)) throw std::domain_error("digamma: argument must be positive");
  long double acc = 0.0L;
  while (x < 8.0L) {
    acc -= 1.0L / x;
    x += 1.0L;
  }
  const long double inv = 1.0L / x;
  const long double inv2 = inv * inv;
  // ln x - 1/(2x) - sum B_{2k} / (2k x^{2k}), truncated after x^{-14}.
  const long double series =
      inv2 * (1.0L / 12.0L -
              inv2 * (1.0L / 120.0L -
                      inv2 * (1.0L / 252.0L -
                              inv2 * (1.0L / 240.0L -
                                      inv2 * (1.0L / 132.0L -
                                              inv2 * (691.0L / 32760.0L -
                                                      inv2 / 12.0L))))));
  return acc + std::log(x) - 0.5L * inv - series;
}

double digamma(double x) {
  return static_cast<double>(digamma_ld(static_cast<long double>(x)));
}

namespace {

double simpson(const std::function<double(double)>& f, double a, double fa,
               double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_step(const std::function<double(double)>& f, double a,
                     double fa, double b, double fb, double fm, double whole,
                     double tol, int depth, bool& ok) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, a, fa, m, fm, flm);
  const double right = simpson(f, m, fm, b, fb, frm);
  const double delta = left + right - whole;
  if (depth <= 0) {
    ok = false;
    return left + right + delta / 15.0;
  }
  if (std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_step(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1, ok) +
         adaptive_step(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1, ok);
}

}  // namespace

QuadResult integrate_adaptive(const std::function<double(double)>& f, double a,
                              double b, double tol) {
  QuadResult res;
  if (!(b > a)) {
    res.converged = true;
    return res;
  }
  bool ok = true;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = simpson(f, a, fa, b, fb, fm);
  res.value = adaptive_step(f, a, fa, b, fb, fm, whole, tol, 48, ok);
  res.converged = ok;
  return res;
}

double gauss_legendre(const std::function<double(double)>& f, double a,
                      double b) {
  // Nodes and weights on [-1, 1], filled once by Newton iteration on the
  // Legendre recurrence.
  static const int n = 32;
  struct Table {
    double x[32], w[32];
    Table() {
      for (int i = 0; i < n; ++i) {
        double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
          double p0 = 1.0, p1 = t;
          for (int k = 2; k <= n; ++k) {
            const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
            p0 = p1;
            p1 = p2;
          }
          const double dp = n * (t * p1 - p0) / (t * t - 1.0);
          const double step = p1 / dp;
          t -= step;
          if (std::fabs(step) < 1e-15) {
            double q0 = 1.0, q1 = t;
            for (int k = 2; k <= n; ++k) {
              const double q2 = ((2 * k - 1) * t * q1 - (k - 1) * q0) / k;
              q0 = q1;
              q1 = q2;
            }
            const double d = n * (t * q1 - q0) / (t * t - 1.0);
            x[i] = t;
            w[i] = 2.0 / ((1.0 - t * t) * d * d);
            break;
          }
        }
      }
    }
  };
  static const Table tab;
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += tab.w[i] * f(mid + half * tab.x[i]);
  return acc * half;
}

double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

namespace {

double gamma_p_series(double a, double x) {
  double term = 1.0 / a, sum = term, ap = a;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::domain_error("regularized_gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_contfrac(a, x);
}

double chi_square_sf(double stat, int dof) {
  if (stat <= 0.0) return 1.0;
  return 1.0 - regularized_gamma_p(0.5 * dof, 0.5 * stat);
}

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Jacobi theta transform: the alternating series converges too slowly
    // here, but the dual series needs only a few terms.
    const double pi = 3.14159265358979323846;
    double cdf = 0.0;
    for (int k = 1; k <= 20; k += 2) {
      const double term = std::exp(-k * k * pi * pi / (8.0 * lambda * lambda));
      cdf += term;
      if (term < 1e-16 * cdf) break;
    }
    cdf *= std::sqrt(2.0 * pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) *
                        std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::fabs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t na = a.size(), nb = b.size();
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < na && j < nb) {
    const double t = std::min(a[i], b[j]);
    while (i < na && a[i] <= t) ++i;
    while (j < nb && b[j] <= t) ++j;
    d = std::max(d, std::fabs(double(i) / na - double(j) / nb));
  }
  const double ne = double(na) * nb / double(na + nb);
  const double lam = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  return kolmogorov_q(lam);
}

double ks_one_sample_pvalue(std::vector<double> sample,
                            const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const std::size_t n = sample.size();
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = cdf(sample[i]);
    d = std::max(d, std::fabs(c - double(i) / n));
    d = std::max(d, std::fabs(double(i + 1) / n - c));
  }
  const double sn = std::sqrt(double(n));
  const double lam = (sn + 0.12 + 0.11 / sn) * d;
  return kolmogorov_q(lam);
}

}  // namespace msurv
