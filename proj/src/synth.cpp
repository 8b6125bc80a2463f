#include "qte/synth.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "qte/kernels.hpp"

namespace qte {

void SynthConfig::validate() const {
    if (n_units == 0) throw std::invalid_argument("SynthConfig: n_units must be > 0");
    if (!(treatment_fraction > 0.0 && treatment_fraction < 1.0))
        throw std::invalid_argument("SynthConfig: treatment_fraction must be in (0,1)");
    if (!(clip_lo < clip_hi))
        throw std::invalid_argument("SynthConfig: clip_lo must be < clip_hi");
    switch (value_law) {
        case ValueLaw::normal:
        case ValueLaw::lognormal:
            if (!(value_param2 > 0.0))
                throw std::invalid_argument("SynthConfig: sigma must be > 0");
            break;
        case ValueLaw::pareto:
            if (!(value_param1 > 0.0) || !(value_param2 > 0.0))
                throw std::invalid_argument("SynthConfig: pareto needs x_m > 0 and a > 0");
            break;
    }
    if (cluster_size_law == ClusterSizeLaw::fixed && !(cluster_size_param >= 1.0))
        throw std::invalid_argument("SynthConfig: fixed cluster size must be >= 1");
    if (cluster_size_law == ClusterSizeLaw::poisson_plus_one && !(cluster_size_param >= 0.0))
        throw std::invalid_argument("SynthConfig: poisson lambda must be >= 0");
}

namespace {

std::uint64_t unit_seed(std::uint64_t seed, std::uint64_t idx) {
    // splitmix64 over seed ^ index
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (idx + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double draw_value(const SynthConfig& c, std::mt19937_64& rng) {
    switch (c.value_law) {
        case ValueLaw::normal: {
            std::normal_distribution<double> d(c.value_param1, c.value_param2);
            return d(rng);
        }
        case ValueLaw::lognormal: {
            std::normal_distribution<double> d(c.value_param1, c.value_param2);
            return std::exp(d(rng));
        }
        case ValueLaw::pareto: {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            double v = 1.0 - u(rng);
            return c.value_param1 * std::pow(v, -1.0 / c.value_param2);
        }
    }
    return 0.0;
}

double apply_effect(const SynthConfig& c, double x) {
    switch (c.effect) {
        case EffectLaw::none: return x;
        case EffectLaw::additive: return x + c.effect_param;
        case EffectLaw::multiplicative: return x * c.effect_param;
    }
    return x;
}

std::size_t draw_cluster_size(const SynthConfig& c, std::mt19937_64& rng) {
    if (c.cluster_size_law == ClusterSizeLaw::fixed)
        return static_cast<std::size_t>(c.cluster_size_param);
    std::poisson_distribution<int> d(c.cluster_size_param);
    return static_cast<std::size_t>(d(rng)) + 1;
}

std::string unit_name(std::size_t idx) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "u%08zu", idx);
    return buf;
}

}  // namespace

std::vector<Observation> generate(const SynthConfig& config) {
    config.validate();
    std::vector<Observation> out;
    std::vector<double> values;
    for (std::size_t i = 0; i < config.n_units; ++i) {
        std::mt19937_64 rng(unit_seed(config.seed, i));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Arm arm = u(rng) < config.treatment_fraction ? Arm::treatment : Arm::control;
        std::size_t size = draw_cluster_size(config, rng);
        values.resize(size);
        for (std::size_t j = 0; j < size; ++j) {
            double x = draw_value(config, rng);
            if (arm == Arm::treatment) x = apply_effect(config, x);
            values[j] = x;
        }
        kernels::clamp_array(values.data(), values.size(), config.clip_lo, config.clip_hi);
        std::string id = unit_name(i);
        for (double x : values) out.push_back({id, arm, x});
    }
    return out;
}

std::vector<double> generate_historical(const SynthConfig& config,
                                        std::size_t n_samples,
                                        double shift) {
    config.validate();
    if (n_samples == 0)
        throw std::invalid_argument("generate_historical: n_samples must be > 0");
    SynthConfig base = config;
    base.effect = EffectLaw::none;
    std::mt19937_64 rng(unit_seed(config.seed ^ 0x5157a1e5u, 0));
    std::vector<double> out(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) out[i] = draw_value(base, rng) + shift;
    kernels::clamp_array(out.data(), out.size(), config.clip_lo, config.clip_hi);
    return out;
}

}  // namespace qte
