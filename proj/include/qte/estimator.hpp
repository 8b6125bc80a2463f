#pragma once

#include <span>
#include <string>
#include <vector>

#include "qte/histogram.hpp"

namespace qte {

// Per-cluster sample moments feeding the delta-method variance.
struct ClusterStats {
    std::size_t k = 0;  // number of units
    double mean_s = 0.0;
    double mean_n = 0.0;
    double var_s = 0.0;
    double var_n = 0.0;
    double cov_sn = 0.0;
};

// Sample moments with K-1 denominators.
ClusterStats cluster_stats(std::span<const double> s, std::span<const double> n);

// Delta-method variance of the ratio-of-averages mean, floored at 0.
double clustered_mean_variance(const ClusterStats& stats);

struct QuantileQuery {
    double p = 0.5;
    double alpha = 0.05;
    double z = 0.0;  // critical value at 1 - alpha/2
};

QuantileQuery make_query(double p, double alpha);

struct RankBounds {
    double r_mid = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double n = 0.0;
    bool clamped = false;  // a bound fell outside [1, n] and was clamped
};

// Rank-space outer confidence interval: L, U = n(p -/+ z sqrt(p(1-p)/n)),
// L floored and U ceiled (outward), both clamped to [1, n]. n may be
// non-integral for privatized histograms. Throws when both probability
// bounds fall outside (0, 1].
RankBounds rank_bounds(double n, const QuantileQuery& query);

struct QuantileEstimate {
    double q = 0.0;       // point estimate
    double se = 0.0;      // sigma_p
    double c = 0.0;       // correction factor
    double sigma_i = 0.0; // clustered sd of the indicator mean, times sqrt(n)
    double x_lower = 0.0;
    double x_upper = 0.0;
    RankBounds bounds;
    std::vector<std::string> flags;
};

// Quantile point estimate and clustered standard error from full
// observation-level data, one inner vector per unit.
QuantileEstimate exact_quantile_ci(const std::vector<std::vector<double>>& units,
                                   const QuantileQuery& query);

// Non-owning variant; lets callers re-partition units without copying.
QuantileEstimate exact_quantile_ci(std::span<const std::vector<double>* const> units,
                                   const QuantileQuery& query);

// Same estimate from per-unit histograms over one arm's units; value-space
// quantities are interpolated from pooled bin counts.
QuantileEstimate histogram_quantile_ci(std::span<const UnitHistogram> histograms,
                                       const BinSpec& spec,
                                       const QuantileQuery& query);

QuantileEstimate histogram_quantile_ci(std::span<const UnitHistogram* const> histograms,
                                       const BinSpec& spec,
                                       const QuantileQuery& query);

// Variants with externally supplied pooled counts (pooled-noise DP mode);
// per-unit indicator sums still come from the given histograms.
QuantileEstimate histogram_quantile_ci(std::span<const UnitHistogram* const> histograms,
                                       const PooledCounts& pooled,
                                       const BinSpec& spec,
                                       const QuantileQuery& query);

enum class EffectKind { absolute, relative };

struct EffectEstimate {
    double tau = 0.0;
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double p_value = 1.0;
    EffectKind kind = EffectKind::absolute;
};

EffectEstimate qte_absolute(const QuantileEstimate& est_t,
                            const QuantileEstimate& est_c,
                            const QuantileQuery& query);

// Relative lift q_t/q_c - 1 with the independent-arms ratio variance.
EffectEstimate qte_relative(const QuantileEstimate& est_t,
                            const QuantileEstimate& est_c,
                            const QuantileQuery& query);

}  // namespace qte
