#pragma once

#include <cmath>

namespace tghf {

inline double norm_pdf(double z) { return 0.3989422804014326779 * std::exp(-0.5 * z * z); }

inline double norm_log_pdf(double z) { return -0.91893853320467274178 - 0.5 * z * z; }

// Accurate in both tails via erfc.
inline double norm_cdf(double z) { return 0.5 * std::erfc(-z * 0.70710678118654752440); }

// Inverse standard normal CDF, relative error below 1e-15 on (0,1).
// Throws domain error for u outside the open interval.
double norm_quantile(double u);

}  // namespace tghf
