#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "qte/histogram.hpp"

namespace qte {

struct PrivacyParams {
    double epsilon = 1.0;
    int sensitivity = 1;
    std::uint64_t seed = 0;

    void validate() const;
    double alpha() const;  // exp(-epsilon / sensitivity)
};

enum class DpMode { per_unit, pooled };

DpMode parse_dp_mode(const std::string& s);
const char* to_string(DpMode mode);

// Two-sided geometric noise: P(k) = (1-alpha)/(1+alpha) * alpha^|k|.
// Sampled as the difference of two geometric variables with success
// probability 1 - alpha.
int sample_two_sided_geometric(double alpha, std::mt19937_64& rng);

// Independent noise on every bin across the full spec width, then
// truncation of negatives to 0. Counts must be non-negative integers.
UnitHistogram privatize_histogram(const UnitHistogram& hist,
                                  const PrivacyParams& params,
                                  std::mt19937_64& rng);

// Per-unit privatization with noise streams keyed by (seed, unit_id, arm);
// output is deterministic for a given seed and unit set.
std::vector<UnitHistogram> privatize_all(std::span<const UnitHistogram> histograms,
                                         const PrivacyParams& params);

// Pooled comparison mode: noise the pooled per-arm counts once instead of
// each unit's histogram.
PooledCounts privatize_pooled(const PooledCounts& pooled, Arm arm,
                              const PrivacyParams& params);

// Stable stream key for a unit's noise RNG.
std::uint64_t derive_stream_seed(std::uint64_t seed, const std::string& unit_id,
                                 Arm arm);

}  // namespace qte
