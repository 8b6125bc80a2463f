#include "qte/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace qte {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t idx) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (idx + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

struct ArmSplit {
    std::vector<const UnitHistogram*> treatment;
    std::vector<const UnitHistogram*> control;
};

ArmSplit split_arms(std::span<const UnitHistogram> histograms,
                    std::span<const Arm> arms) {
    ArmSplit s;
    for (std::size_t i = 0; i < histograms.size(); ++i)
        (arms[i] == Arm::treatment ? s.treatment : s.control).push_back(&histograms[i]);
    return s;
}

double quantile_of(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    auto r = static_cast<std::size_t>(
        std::clamp(std::floor(static_cast<double>(v.size()) * p), 1.0,
                   static_cast<double>(v.size())));
    return v[r - 1];
}

double sd_of(std::span<const double> v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

ComparisonReport compare_to_baseline(std::span<const Observation> observations,
                                     const BinSpec& spec,
                                     std::span<const double> quantiles,
                                     const QuantileQuery& base_query,
                                     EffectKind kind) {
    // Exact per-unit observation vectors (clipped, as the histogram sees them).
    std::map<std::string, std::pair<Arm, std::vector<double>>> per_unit;
    for (const auto& obs : observations) {
        auto& entry = per_unit[obs.unit_id];
        if (!entry.second.empty() && entry.first != obs.arm)
            throw std::runtime_error("compare_to_baseline: unit in both arms");
        entry.first = obs.arm;
        entry.second.push_back(clip(obs.value, spec));
    }
    std::vector<std::vector<double>> units_t, units_c;
    for (auto& [id, entry] : per_unit)
        (entry.first == Arm::treatment ? units_t : units_c).push_back(std::move(entry.second));

    auto histograms = aggregate(observations, spec);
    std::vector<Arm> arms(histograms.size());
    for (std::size_t i = 0; i < histograms.size(); ++i) arms[i] = histograms[i].arm;
    auto split = split_arms(histograms, arms);

    ComparisonReport report;
    for (double p : quantiles) {
        auto query = make_query(p, base_query.alpha);
        auto base_t = exact_quantile_ci(units_t, query);
        auto base_c = exact_quantile_ci(units_c, query);
        auto hist_t = histogram_quantile_ci(split.treatment, spec, query);
        auto hist_c = histogram_quantile_ci(split.control, spec, query);
        auto base_eff = kind == EffectKind::absolute ? qte_absolute(base_t, base_c, query)
                                                     : qte_relative(base_t, base_c, query);
        auto hist_eff = kind == EffectKind::absolute ? qte_absolute(hist_t, hist_c, query)
                                                     : qte_relative(hist_t, hist_c, query);
        ComparisonRow row;
        row.p = p;
        row.n_bins = spec.bin_count();
        row.strategy = spec.strategy;
        row.baseline_tau = base_eff.tau;
        row.baseline_ci_width = base_eff.ci_hi - base_eff.ci_lo;
        row.hist_tau = hist_eff.tau;
        row.hist_ci_width = hist_eff.ci_hi - hist_eff.ci_lo;
        if (row.baseline_tau != 0.0)
            row.tau_rel_err = (row.hist_tau - row.baseline_tau) / std::abs(row.baseline_tau);
        if (row.baseline_ci_width != 0.0)
            row.ci_width_rel_err =
                (row.hist_ci_width - row.baseline_ci_width) / std::abs(row.baseline_ci_width);
        report.rows.push_back(row);
    }
    return report;
}

void permute_arms(std::vector<Arm>& arms, std::mt19937_64& rng) {
    std::size_t n_t = static_cast<std::size_t>(
        std::count(arms.begin(), arms.end(), Arm::treatment));
    if (n_t < 2 || arms.size() - n_t < 2)
        throw std::invalid_argument("permute_arms: need at least 2 units per arm");
    std::shuffle(arms.begin(), arms.end(), rng);
}

namespace {

template <typename EstimateFn>
AATestReport run_aa_test(std::vector<Arm> arms, double p, double alpha,
                         std::size_t n_permutations, std::uint64_t seed,
                         EstimateFn estimate) {
    if (n_permutations < 100)
        throw std::invalid_argument("aa_test: need at least 100 permutations");
    auto query = make_query(p, alpha);
    std::mt19937_64 rng(seed);

    AATestReport report;
    report.n_permutations = n_permutations;
    for (std::size_t t = 0; t < n_permutations; ++t) {
        permute_arms(arms, rng);
        try {
            EffectEstimate eff = estimate(arms, query);
            report.p_values.push_back(eff.p_value);
            report.taus.push_back(eff.tau);
            report.ses.push_back(eff.se);
        } catch (const std::exception&) {
            ++report.failures;
        }
    }
    if (!report.p_values.empty()) {
        auto ks = ks_uniformity(report.p_values);
        report.ks_statistic = ks.statistic;
        report.ks_p_value = ks.p_value;
        double n = static_cast<double>(report.p_values.size());
        double c95 = 0.0, c99 = 0.0;
        for (double pv : report.p_values) {
            if (pv >= 0.05) c95 += 1.0;
            if (pv >= 0.01) c99 += 1.0;
        }
        report.cover_95 = c95 / n;
        report.cover_99 = c99 / n;
    }
    return report;
}

}  // namespace

AATestReport aa_test(std::span<const UnitHistogram> histograms,
                     const BinSpec& spec, double p, double alpha,
                     std::size_t n_permutations, std::uint64_t seed) {
    std::vector<Arm> arms(histograms.size());
    for (std::size_t i = 0; i < histograms.size(); ++i) arms[i] = histograms[i].arm;
    return run_aa_test(
        std::move(arms), p, alpha, n_permutations, seed,
        [&](const std::vector<Arm>& perm, const QuantileQuery& query) {
            auto split = split_arms(histograms, perm);
            auto est_t = histogram_quantile_ci(split.treatment, spec, query);
            auto est_c = histogram_quantile_ci(split.control, spec, query);
            return qte_absolute(est_t, est_c, query);
        });
}

AATestReport aa_test_exact(const std::vector<std::vector<double>>& units,
                           double p, double alpha, std::size_t n_permutations,
                           std::uint64_t seed) {
    // Exact-data A/A test assigns arms 50/50 by index parity before permuting.
    std::vector<Arm> arms(units.size());
    for (std::size_t i = 0; i < units.size(); ++i)
        arms[i] = (i % 2 == 0) ? Arm::treatment : Arm::control;
    return run_aa_test(
        std::move(arms), p, alpha, n_permutations, seed,
        [&](const std::vector<Arm>& perm, const QuantileQuery& query) {
            std::vector<const std::vector<double>*> t, c;
            for (std::size_t i = 0; i < units.size(); ++i)
                (perm[i] == Arm::treatment ? t : c).push_back(&units[i]);
            auto est_t = exact_quantile_ci(t, query);
            auto est_c = exact_quantile_ci(c, query);
            return qte_absolute(est_t, est_c, query);
        });
}

KsResult ks_uniformity(std::span<const double> p_values) {
    if (p_values.empty()) throw std::invalid_argument("ks_uniformity: empty sample");
    std::vector<double> sorted(p_values.begin(), p_values.end());
    for (double x : sorted)
        if (x < 0.0 || x > 1.0)
            throw std::invalid_argument("ks_uniformity: values must be in [0,1]");
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        double hi = (static_cast<double>(i) + 1.0) / n - sorted[i];
        double lo = sorted[i] - static_cast<double>(i) / n;
        d = std::max({d, hi, lo});
    }
    // Asymptotic Kolmogorov tail: Q(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 lambda^2)
    double lambda = std::sqrt(n) * d;
    double q = 0.0;
    for (int j = 1; j <= 100; ++j) {
        double term = 2.0 * std::exp(-2.0 * lambda * lambda * j * j);
        q += (j % 2 == 1) ? term : -term;
    }
    return {d, std::clamp(q, 0.0, 1.0)};
}

std::vector<DpSweepSummary> dp_sweep(std::span<const UnitHistogram> histograms,
                                     const BinSpec& spec, double p, double alpha,
                                     std::span<const double> epsilons,
                                     std::size_t n_draws, std::uint64_t seed,
                                     int sensitivity, DpMode mode) {
    if (n_draws < 100) throw std::invalid_argument("dp_sweep: need at least 100 draws");
    auto query = make_query(p, alpha);
    std::vector<Arm> arms(histograms.size());
    for (std::size_t i = 0; i < histograms.size(); ++i) arms[i] = histograms[i].arm;
    auto split = split_arms(histograms, arms);

    auto noiseless_t = histogram_quantile_ci(split.treatment, spec, query);
    auto noiseless_c = histogram_quantile_ci(split.control, spec, query);
    auto noiseless = qte_absolute(noiseless_t, noiseless_c, query);

    std::vector<DpSweepSummary> out;
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
        DpSweepSummary summary;
        summary.epsilon = epsilons[e];
        for (std::size_t d = 0; d < n_draws; ++d) {
            PrivacyParams params{epsilons[e], sensitivity,
                                 mix_seed(seed, e * n_draws + d)};
            EffectEstimate eff;
            if (mode == DpMode::per_unit) {
                auto noisy = privatize_all(histograms, params);
                auto s = split_arms(noisy, arms);
                auto est_t = histogram_quantile_ci(s.treatment, spec, query);
                auto est_c = histogram_quantile_ci(s.control, spec, query);
                eff = qte_absolute(est_t, est_c, query);
            } else {
                auto pooled_t = pooled_counts(histograms, Arm::treatment, spec.bin_count());
                auto pooled_c = pooled_counts(histograms, Arm::control, spec.bin_count());
                auto noisy_t = privatize_pooled(pooled_t, Arm::treatment, params);
                auto noisy_c = privatize_pooled(pooled_c, Arm::control, params);
                auto est_t = histogram_quantile_ci(split.treatment, noisy_t, spec, query);
                auto est_c = histogram_quantile_ci(split.control, noisy_c, spec, query);
                eff = qte_absolute(est_t, est_c, query);
            }
            summary.taus.push_back(eff.tau);
            summary.ses.push_back(eff.se);
        }
        double nd = static_cast<double>(summary.taus.size());
        for (double t : summary.taus) summary.tau_mean += t / nd;
        for (double s : summary.ses) summary.se_mean += s / nd;
        summary.tau_sd = sd_of(summary.taus, summary.tau_mean);
        summary.se_sd = sd_of(summary.ses, summary.se_mean);
        summary.tau_p05 = quantile_of(summary.taus, 0.05);
        summary.tau_p95 = quantile_of(summary.taus, 0.95);
        summary.se_bias = summary.se_mean - noiseless.se;
        out.push_back(std::move(summary));
    }
    return out;
}

}  // namespace qte
