#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qte/estimator.hpp"
#include "qte/histogram.hpp"
#include "qte/privacy.hpp"

namespace qte {

// One quantile's full-data-vs-histogram comparison row. Relative errors are
// signed, (hist - baseline) / |baseline|; undefined when the baseline is 0.
struct ComparisonRow {
    double p = 0.0;
    double baseline_tau = 0.0;
    double baseline_ci_width = 0.0;
    double hist_tau = 0.0;
    double hist_ci_width = 0.0;
    std::optional<double> tau_rel_err;
    std::optional<double> ci_width_rel_err;
    std::size_t n_bins = 0;
    BinStrategy strategy = BinStrategy::linear;
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;
};

ComparisonReport compare_to_baseline(std::span<const Observation> observations,
                                     const BinSpec& spec,
                                     std::span<const double> quantiles,
                                     const QuantileQuery& base_query,
                                     EffectKind kind = EffectKind::absolute);

struct AATestReport {
    std::size_t n_permutations = 0;
    std::vector<double> p_values;
    std::vector<double> taus;
    std::vector<double> ses;
    double ks_statistic = 0.0;
    double ks_p_value = 0.0;
    double cover_95 = 0.0;  // fraction of permutations whose 95% CI covers 0
    double cover_99 = 0.0;
    std::size_t failures = 0;
};

// Uniform random relabeling of arms across units, arm sizes preserved.
// `arms` is the per-unit assignment, permuted in place.
void permute_arms(std::vector<Arm>& arms, std::mt19937_64& rng);

// A/A permutation test on per-unit histograms: repeatedly relabel arms,
// re-estimate the QTE at quantile p, and aggregate the p-value distribution.
AATestReport aa_test(std::span<const UnitHistogram> histograms,
                     const BinSpec& spec, double p, double alpha,
                     std::size_t n_permutations, std::uint64_t seed);

// Same test on exact per-unit observation vectors.
AATestReport aa_test_exact(const std::vector<std::vector<double>>& units,
                           double p, double alpha, std::size_t n_permutations,
                           std::uint64_t seed);

// One-sample two-sided Kolmogorov-Smirnov test against Uniform(0,1).
// The p-value uses the asymptotic Kolmogorov series.
struct KsResult {
    double statistic = 0.0;
    double p_value = 0.0;
};

KsResult ks_uniformity(std::span<const double> p_values);

struct DpSweepSummary {
    double epsilon = 0.0;
    double tau_mean = 0.0;
    double tau_sd = 0.0;
    double tau_p05 = 0.0;
    double tau_p95 = 0.0;
    double se_mean = 0.0;
    double se_sd = 0.0;
    double se_bias = 0.0;  // mean(se_noisy) - se_noiseless
    std::vector<double> taus;
    std::vector<double> ses;
};

// Repeated privatization and re-estimation of the QTE at quantile p for
// each epsilon; per-draw noise streams are derived from (seed, draw index).
std::vector<DpSweepSummary> dp_sweep(std::span<const UnitHistogram> histograms,
                                     const BinSpec& spec, double p, double alpha,
                                     std::span<const double> epsilons,
                                     std::size_t n_draws, std::uint64_t seed,
                                     int sensitivity = 1,
                                     DpMode mode = DpMode::per_unit);

}  // namespace qte
