#include "qte/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qte/kernels.hpp"
#include "qte/math.hpp"

namespace qte {

ClusterStats cluster_stats(std::span<const double> s, std::span<const double> n) {
    if (s.size() != n.size())
        throw std::invalid_argument("cluster_stats: mismatched lengths");
    const std::size_t k = s.size();
    if (k < 2) throw std::invalid_argument("cluster_stats: need at least 2 units");

    auto m = kernels::pair_moments(s.data(), n.data(), k);
    const double kd = static_cast<double>(k);
    ClusterStats out;
    out.k = k;
    out.mean_s = m.sum_a / kd;
    out.mean_n = m.sum_b / kd;
    out.var_s = std::max(0.0, (m.sum_aa - kd * out.mean_s * out.mean_s) / (kd - 1.0));
    out.var_n = std::max(0.0, (m.sum_bb - kd * out.mean_n * out.mean_n) / (kd - 1.0));
    out.cov_sn = (m.sum_ab - kd * out.mean_s * out.mean_n) / (kd - 1.0);
    return out;
}

double clustered_mean_variance(const ClusterStats& stats) {
    if (!(stats.mean_n > 0.0))
        throw std::invalid_argument("clustered_mean_variance: mean cluster size must be > 0");
    const double ratio = stats.mean_s / stats.mean_n;
    const double quad =
        stats.var_s - 2.0 * ratio * stats.cov_sn + ratio * ratio * stats.var_n;
    const double v = quad / (static_cast<double>(stats.k) * stats.mean_n * stats.mean_n);
    return std::max(0.0, v);
}

QuantileQuery make_query(double p, double alpha) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("make_query: p must be in (0,1)");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("make_query: alpha must be in (0,1)");
    return QuantileQuery{p, alpha, critical_value(alpha)};
}

RankBounds rank_bounds(double n, const QuantileQuery& query) {
    if (!(n >= 2.0)) throw std::invalid_argument("rank_bounds: need n >= 2");
    if (!(n * query.p >= 1.0))
        throw std::runtime_error("rank_bounds: insufficient sample for quantile");

    const double half = query.z * std::sqrt(query.p * (1.0 - query.p) / n);
    const double p_lo = query.p - half;
    const double p_hi = query.p + half;
    if (p_lo <= 0.0 && p_hi > 1.0)
        throw std::runtime_error("rank_bounds: insufficient sample for quantile");

    RankBounds b;
    b.n = n;
    b.r_mid = std::clamp(std::floor(n * query.p), 1.0, std::floor(n));
    if (query.z == 0.0) {
        b.lower = b.upper = b.r_mid;
        return b;
    }
    double lo_raw = std::floor(n * p_lo);
    double hi_raw = std::ceil(n * p_hi);
    b.lower = std::clamp(lo_raw, 1.0, n);
    b.upper = std::clamp(hi_raw, 1.0, n);
    b.clamped = (lo_raw < 1.0) || (hi_raw > n);
    if (b.lower > b.r_mid) b.lower = b.r_mid;
    if (b.upper < b.r_mid) b.upper = b.r_mid;
    return b;
}

namespace {

// Shared tail of both algorithm variants once value-space quantities and
// per-unit indicator sums are known.
QuantileEstimate finish_estimate(double x_mid, double x_lo, double x_hi,
                                 const RankBounds& bounds,
                                 std::span<const double> s,
                                 std::span<const double> n_per_unit,
                                 const QuantileQuery& query,
                                 std::vector<std::string> flags) {
    auto stats = cluster_stats(s, n_per_unit);
    double var_ibar = clustered_mean_variance(stats);
    double sigma_i = std::sqrt(bounds.n * var_ibar);
    double denom = std::sqrt(query.p * (1.0 - query.p));
    double c = sigma_i / denom;

    QuantileEstimate est;
    est.q = x_mid;
    est.x_lower = x_lo;
    est.x_upper = x_hi;
    est.bounds = bounds;
    est.sigma_i = sigma_i;
    est.c = c;
    est.se = c * (x_hi - x_lo) / (2.0 * query.z);
    est.flags = std::move(flags);
    if (bounds.clamped) est.flags.push_back("rank_bounds_clamped");
    return est;
}

}  // namespace

QuantileEstimate exact_quantile_ci(std::span<const std::vector<double>* const> units,
                                   const QuantileQuery& query) {
    if (units.size() < 2)
        throw std::invalid_argument("exact_quantile_ci: need at least 2 units");
    std::vector<double> all;
    for (const auto* u : units) all.insert(all.end(), u->begin(), u->end());
    const double n = static_cast<double>(all.size());
    if (all.size() < 2)
        throw std::invalid_argument("exact_quantile_ci: need at least 2 observations");

    auto bounds = rank_bounds(n, query);
    std::sort(all.begin(), all.end());
    auto order_stat = [&](double r) {
        auto idx = static_cast<std::size_t>(std::clamp(r, 1.0, n)) - 1;
        return all[idx];
    };
    double x_mid = order_stat(bounds.r_mid);
    double x_lo = order_stat(bounds.lower);
    double x_hi = order_stat(bounds.upper);

    std::vector<double> s(units.size()), cnt(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        double si = 0.0;
        for (double x : *units[i])
            if (x <= x_mid) si += 1.0;
        s[i] = si;
        cnt[i] = static_cast<double>(units[i]->size());
    }
    return finish_estimate(x_mid, x_lo, x_hi, bounds, s, cnt, query, {});
}

QuantileEstimate exact_quantile_ci(const std::vector<std::vector<double>>& units,
                                   const QuantileQuery& query) {
    std::vector<const std::vector<double>*> ptrs;
    ptrs.reserve(units.size());
    for (const auto& u : units) ptrs.push_back(&u);
    return exact_quantile_ci(std::span<const std::vector<double>* const>(ptrs), query);
}

namespace {

PooledCounts pool_pointers(std::span<const UnitHistogram* const> histograms,
                           std::size_t n_bins) {
    PooledCounts pooled;
    pooled.counts.assign(n_bins, 0.0);
    for (const auto* h : histograms) {
        for (const auto& [bin, c] : h->counts) {
            pooled.counts.at(bin) += c;
            pooled.total += c;
        }
    }
    return pooled;
}

}  // namespace

QuantileEstimate histogram_quantile_ci(std::span<const UnitHistogram* const> histograms,
                                       const BinSpec& spec,
                                       const QuantileQuery& query) {
    auto pooled = pool_pointers(histograms, spec.bin_count());
    return histogram_quantile_ci(histograms, pooled, spec, query);
}

QuantileEstimate histogram_quantile_ci(std::span<const UnitHistogram> histograms,
                                       const BinSpec& spec,
                                       const QuantileQuery& query) {
    std::vector<const UnitHistogram*> ptrs;
    ptrs.reserve(histograms.size());
    for (const auto& h : histograms) ptrs.push_back(&h);
    return histogram_quantile_ci(std::span<const UnitHistogram* const>(ptrs), spec, query);
}

QuantileEstimate histogram_quantile_ci(std::span<const UnitHistogram* const> histograms,
                                       const PooledCounts& pooled,
                                       const BinSpec& spec,
                                       const QuantileQuery& query) {
    if (histograms.size() < 2)
        throw std::invalid_argument("histogram_quantile_ci: need at least 2 units");
    const double n = pooled.total;
    if (!(n >= 2.0))
        throw std::invalid_argument("histogram_quantile_ci: pooled n must be >= 2");

    auto bounds = rank_bounds(n, query);
    auto loc_mid = locate_rank(pooled.counts, spec, bounds.r_mid);
    auto loc_lo = locate_rank(pooled.counts, spec, bounds.lower);
    auto loc_hi = locate_rank(pooled.counts, spec, bounds.upper);
    double x_mid = value_at_rank(loc_mid);
    double x_lo = value_at_rank(loc_lo);
    double x_hi = value_at_rank(loc_hi);

    std::vector<std::string> flags;
    if (loc_lo.bin_index == loc_hi.bin_index) flags.push_back("low_resolution");

    std::vector<double> s(histograms.size()), cnt(histograms.size());
    for (std::size_t i = 0; i < histograms.size(); ++i) {
        s[i] = interpolated_below(*histograms[i], spec, x_mid);
        cnt[i] = histograms[i]->total();
    }
    return finish_estimate(x_mid, x_lo, x_hi, bounds, s, cnt, query, std::move(flags));
}

namespace {

EffectEstimate finish_effect(double tau, double se, EffectKind kind,
                             const QuantileQuery& query) {
    EffectEstimate eff;
    eff.tau = tau;
    eff.se = se;
    eff.kind = kind;
    eff.ci_lo = tau - query.z * se;
    eff.ci_hi = tau + query.z * se;
    if (se > 0.0)
        eff.p_value = 2.0 * normal_cdf(-std::abs(tau / se));
    else
        eff.p_value = (tau == 0.0) ? 1.0 : 0.0;
    return eff;
}

}  // namespace

EffectEstimate qte_absolute(const QuantileEstimate& est_t,
                            const QuantileEstimate& est_c,
                            const QuantileQuery& query) {
    double tau = est_t.q - est_c.q;
    double se = std::sqrt(est_t.se * est_t.se + est_c.se * est_c.se);
    return finish_effect(tau, se, EffectKind::absolute, query);
}

EffectEstimate qte_relative(const QuantileEstimate& est_t,
                            const QuantileEstimate& est_c,
                            const QuantileQuery& query) {
    if (est_c.q == 0.0)
        throw std::invalid_argument("qte_relative: control quantile is 0");
    double q0 = est_c.q, q1 = est_t.q;
    double var1 = est_t.se * est_t.se;
    double var0 = est_c.se * est_c.se;
    double var = (var1 + (q1 * q1) / (q0 * q0) * var0) / (q0 * q0);
    return finish_effect(q1 / q0 - 1.0, std::sqrt(var), EffectKind::relative, query);
}

}  // namespace qte
