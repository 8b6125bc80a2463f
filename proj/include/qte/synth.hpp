#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qte/histogram.hpp"

namespace qte {

enum class ClusterSizeLaw { fixed, poisson_plus_one };
enum class ValueLaw { normal, lognormal, pareto };
enum class EffectLaw { none, additive, multiplicative };

struct SynthConfig {
    std::size_t n_units = 0;
    ClusterSizeLaw cluster_size_law = ClusterSizeLaw::fixed;
    double cluster_size_param = 1.0;  // m for fixed, lambda for poisson_plus_one
    ValueLaw value_law = ValueLaw::normal;
    double value_param1 = 0.0;  // mu for (log)normal, x_m for pareto
    double value_param2 = 1.0;  // sigma for (log)normal, shape a for pareto
    double treatment_fraction = 0.5;
    EffectLaw effect = EffectLaw::none;
    double effect_param = 0.0;  // delta for additive, gamma for multiplicative
    double clip_lo = 0.0;
    double clip_hi = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// One dataset draw: unit-level arm assignment, i.i.d. within-unit values
// with the treatment effect applied, clipped to [clip_lo, clip_hi].
// Output is sorted by unit_id and fully determined by config.seed.
std::vector<Observation> generate(const SynthConfig& config);

// Historical sample from the no-effect value law (optionally mean-shifted
// to model historical/actual mismatch), clipped.
std::vector<double> generate_historical(const SynthConfig& config,
                                        std::size_t n_samples,
                                        double shift = 0.0);

}  // namespace qte
