#pragma once

#include <vector>

namespace mams {

// Standard normal CDF.
double normal_cdf(double x);

// Standard normal quantile, Wichura's AS 241 (PPND16). Accurate to full
// double precision for p in (0, 1).
double normal_quantile(double p);

// Quantile with linear interpolation between order statistics
// (R type 7): h = (n-1)q, x[floor(h)] + frac(h) * (x[floor(h)+1] - x[floor(h)]).
// `sorted` must be ascending and non-empty.
double quantile_type7(const std::vector<double>& sorted, double q);

// Upper tail of the chi-square distribution with `df` degrees of freedom,
// i.e. P(X >= x). Regularized incomplete gamma, series + continued fraction.
double chisq_upper_tail(double x, double df);

double mean(const std::vector<double>& v);
double sample_variance(const std::vector<double>& v);  // denominator n-1

}  // namespace mams
