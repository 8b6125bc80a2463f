#pragma once

#include <cmath>

namespace qte {

// Standard normal CDF.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Standard normal quantile (inverse CDF), Acklam's rational approximation
// refined with one Halley step. Accurate to ~1e-15 over (0, 1).
double normal_quantile(double p);

// Critical value z_{alpha/2} for a two-sided interval at level alpha.
inline double critical_value(double alpha) {
    return normal_quantile(1.0 - alpha / 2.0);
}

}  // namespace qte
