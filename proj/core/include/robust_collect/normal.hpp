#pragma once

namespace robust_collect {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_cdf(double x);
// Inverse standard-normal CDF for p in (0, 1).
double normal_quantile(double p);
double normal_log_pdf(double x, double mean, double stdev);

}  // namespace robust_collect
