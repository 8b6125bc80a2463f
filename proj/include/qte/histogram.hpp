#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace qte {

enum class BinStrategy { linear, loglinear, historical };

enum class Arm { treatment, control };

const char* to_string(Arm arm);
const char* to_string(BinStrategy s);
Arm parse_arm(const std::string& s);
BinStrategy parse_strategy(const std::string& s);

// Ordered bin boundaries plus clip thresholds. Bin j (1-based) spans
// [boundaries[j-1], boundaries[j]), last bin closed on the right.
struct BinSpec {
    std::vector<double> boundaries;
    double clip_lo = 0.0;
    double clip_hi = 0.0;
    BinStrategy strategy = BinStrategy::linear;

    std::size_t bin_count() const { return boundaries.size() - 1; }
    void validate() const;  // throws std::invalid_argument on violation
};

BinSpec linear_bins(double lo, double hi, std::size_t n_bins);

// Boundaries equally spaced in log space over [max(lo, log_floor), hi].
// When lo < log_floor the first boundary is pinned at lo.
BinSpec log_linear_bins(double lo, double hi, std::size_t n_bins,
                        double log_floor = 1.0);

// Boundaries at the nearest-rank empirical quantiles j/n_bins of the
// historical sample; duplicate boundaries are collapsed.
BinSpec historical_quantile_bins(std::span<const double> historical_values,
                                 std::size_t n_bins);

double clip(double value, const BinSpec& spec);

// 0-based index of the bin containing a clipped value.
std::size_t bin_index_of(const BinSpec& spec, double value);

struct Observation {
    std::string unit_id;
    Arm arm = Arm::control;
    double value = 0.0;
};

// One unit's per-bin counts, stored sparsely. Counts are reals so that
// privatized histograms reuse the same representation.
struct UnitHistogram {
    std::string unit_id;
    Arm arm = Arm::control;
    std::size_t n_bins = 0;
    std::map<std::uint32_t, double> counts;

    double total() const;
    void add(std::uint32_t bin, double weight = 1.0);
};

std::vector<UnitHistogram> aggregate(std::span<const Observation> observations,
                                     const BinSpec& spec);

UnitHistogram merge(const UnitHistogram& h1, const UnitHistogram& h2);

struct PooledCounts {
    std::vector<double> counts;
    double total = 0.0;
};

PooledCounts pooled_counts(std::span<const UnitHistogram> histograms, Arm arm,
                           std::size_t n_bins);

struct RankLocator {
    std::size_t bin_index = 0;  // 0-based
    double k = 0.0;             // relative rank within the bin
    double m = 0.0;             // count in the bin
    double bin_lo = 0.0;
    double bin_hi = 0.0;
};

// First bin whose cumulative count reaches rank r, with the rank's offset
// into that bin. Ranks are real-valued (counts may be non-integral post-DP).
RankLocator locate_rank(std::span<const double> pooled, const BinSpec& spec,
                        double r);

// Linear interpolation within the located bin: b_l + (b_r - b_l) * k / m.
double value_at_rank(const RankLocator& loc);

// Interpolated count of this unit's observations below x.
double interpolated_below(const UnitHistogram& hist, const BinSpec& spec,
                          double x);

}  // namespace qte
