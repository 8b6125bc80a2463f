#include "qte/privacy.hpp"

#include <cmath>
#include <stdexcept>

namespace qte {

void PrivacyParams::validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("PrivacyParams: epsilon must be > 0");
    if (sensitivity < 1) throw std::invalid_argument("PrivacyParams: sensitivity must be >= 1");
}

double PrivacyParams::alpha() const {
    return std::exp(-epsilon / static_cast<double>(sensitivity));
}

DpMode parse_dp_mode(const std::string& s) {
    if (s == "per-unit") return DpMode::per_unit;
    if (s == "pooled") return DpMode::pooled;
    throw std::invalid_argument("unknown dp mode: " + s);
}

const char* to_string(DpMode mode) {
    return mode == DpMode::per_unit ? "per-unit" : "pooled";
}

int sample_two_sided_geometric(double alpha, std::mt19937_64& rng) {
    if (!(alpha >= 0.0 && alpha < 1.0))
        throw std::invalid_argument("sample_two_sided_geometric: alpha must be in [0,1)");
    // alpha underflows to 0 for very large epsilon; the mechanism degenerates
    // to a point mass at 0.
    if (alpha == 0.0) return 0;
    std::geometric_distribution<int> geom(1.0 - alpha);
    int g1 = geom(rng);
    int g2 = geom(rng);
    return g1 - g2;
}

std::uint64_t derive_stream_seed(std::uint64_t seed, const std::string& unit_id,
                                 Arm arm) {
    // FNV-1a over the seed bytes, the unit id, and the arm tag.
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](unsigned char byte) {
        h ^= byte;
        h *= 1099511628211ull;
    };
    for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed >> (8 * i)));
    for (char c : unit_id) mix(static_cast<unsigned char>(c));
    mix(arm == Arm::treatment ? 1 : 0);
    return h;
}

UnitHistogram privatize_histogram(const UnitHistogram& hist,
                                  const PrivacyParams& params,
                                  std::mt19937_64& rng) {
    params.validate();
    if (hist.n_bins == 0)
        throw std::invalid_argument("privatize_histogram: histogram has no bin count");
    const double alpha = params.alpha();

    UnitHistogram out;
    out.unit_id = hist.unit_id;
    out.arm = hist.arm;
    out.n_bins = hist.n_bins;
    for (std::uint32_t bin = 0; bin < hist.n_bins; ++bin) {
        double c = 0.0;
        if (auto it = hist.counts.find(bin); it != hist.counts.end()) c = it->second;
        if (c < 0.0 || c != std::floor(c))
            throw std::invalid_argument("privatize_histogram: counts must be non-negative integers");
        double noisy = c + sample_two_sided_geometric(alpha, rng);
        if (noisy > 0.0) out.counts[bin] = noisy;
    }
    return out;
}

std::vector<UnitHistogram> privatize_all(std::span<const UnitHistogram> histograms,
                                         const PrivacyParams& params) {
    params.validate();
    std::vector<UnitHistogram> out;
    out.reserve(histograms.size());
    for (const auto& h : histograms) {
        std::mt19937_64 rng(derive_stream_seed(params.seed, h.unit_id, h.arm));
        out.push_back(privatize_histogram(h, params, rng));
    }
    return out;
}

PooledCounts privatize_pooled(const PooledCounts& pooled, Arm arm,
                              const PrivacyParams& params) {
    params.validate();
    const double alpha = params.alpha();
    std::mt19937_64 rng(derive_stream_seed(params.seed, "__pooled__", arm));
    PooledCounts out;
    out.counts.resize(pooled.counts.size());
    out.total = 0.0;
    for (std::size_t j = 0; j < pooled.counts.size(); ++j) {
        double noisy = pooled.counts[j] + sample_two_sided_geometric(alpha, rng);
        out.counts[j] = std::max(0.0, noisy);
        out.total += out.counts[j];
    }
    return out;
}

}  // namespace qte
