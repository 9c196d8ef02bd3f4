#pragma once

#include <functional>
#include <vector>

namespace msurv {

// psi(x) for x > 0; |error| < 1e-12 over the positive axis.
double digamma(double x);

// Extended-precision variant used where alternating digamma sums would
// otherwise lose digits to cancellation.
long double digamma_ld(long double x);

struct QuadResult {
  double value = 0.0;
  bool converged = false;
};

// Adaptive Simpson on [a, b] targeting absolute tolerance tol.
QuadResult integrate_adaptive(const std::function<double(double)>& f,
                              double a, double b, double tol);

// Fixed 32-point Gauss-Legendre rule on [a, b]; near machine accuracy for
// smooth integrands on order-one panels.
double gauss_legendre(const std::function<double(double)>& f, double a,
                      double b);

double binom(int n, int k);

// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);

// Chi-square upper tail probability with k degrees of freedom.
double chi_square_sf(double stat, int dof);

// Kolmogorov distribution tail Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

// Two-sample Kolmogorov-Smirnov p-value (asymptotic).
double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b);

// One-sample KS p-value against a CDF.
double ks_one_sample_pvalue(std::vector<double> sample,
                            const std::function<double(double)>& cdf);

}  // namespace msurv
