#include "qte/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace qte {

const char* to_string(Arm arm) {
    return arm == Arm::treatment ? "treatment" : "control";
}

const char* to_string(BinStrategy s) {
    switch (s) {
        case BinStrategy::linear: return "linear";
        case BinStrategy::loglinear: return "loglinear";
        case BinStrategy::historical: return "historical";
    }
    return "linear";
}

Arm parse_arm(const std::string& s) {
    if (s == "treatment") return Arm::treatment;
    if (s == "control") return Arm::control;
    throw std::invalid_argument("unknown arm: " + s);
}

BinStrategy parse_strategy(const std::string& s) {
    if (s == "linear") return BinStrategy::linear;
    if (s == "loglinear") return BinStrategy::loglinear;
    if (s == "historical") return BinStrategy::historical;
    throw std::invalid_argument("unknown bin strategy: " + s);
}

void BinSpec::validate() const {
    if (boundaries.size() < 2)
        throw std::invalid_argument("BinSpec: need at least 2 boundaries");
    for (std::size_t i = 1; i < boundaries.size(); ++i)
        if (!(boundaries[i - 1] < boundaries[i]))
            throw std::invalid_argument("BinSpec: boundaries must be strictly increasing");
    if (clip_lo != boundaries.front() || clip_hi != boundaries.back())
        throw std::invalid_argument("BinSpec: clip thresholds must equal outer boundaries");
}

BinSpec linear_bins(double lo, double hi, std::size_t n_bins) {
    if (!(lo < hi)) throw std::invalid_argument("linear_bins: lo must be < hi");
    if (n_bins == 0) throw std::invalid_argument("linear_bins: n_bins must be >= 1");
    BinSpec spec;
    spec.strategy = BinStrategy::linear;
    spec.boundaries.resize(n_bins + 1);
    for (std::size_t j = 0; j <= n_bins; ++j)
        spec.boundaries[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n_bins);
    spec.boundaries.front() = lo;
    spec.boundaries.back() = hi;
    spec.clip_lo = lo;
    spec.clip_hi = hi;
    spec.validate();
    return spec;
}

BinSpec log_linear_bins(double lo, double hi, std::size_t n_bins, double log_floor) {
    if (!(hi > lo)) throw std::invalid_argument("log_linear_bins: hi must be > lo");
    if (lo < 0.0) throw std::invalid_argument("log_linear_bins: lo must be >= 0");
    if (n_bins == 0) throw std::invalid_argument("log_linear_bins: n_bins must be >= 1");
    if (!(log_floor > 0.0)) throw std::invalid_argument("log_linear_bins: log_floor must be > 0");

    const double start = std::max(lo, log_floor);
    const double llo = std::log(start);
    const double lhi = std::log(hi);
    BinSpec spec;
    spec.strategy = BinStrategy::loglinear;
    spec.boundaries.resize(n_bins + 1);
    for (std::size_t j = 0; j <= n_bins; ++j)
        spec.boundaries[j] =
            std::exp(llo + (lhi - llo) * static_cast<double>(j) / static_cast<double>(n_bins));
    if (lo < log_floor) spec.boundaries.front() = lo;
    spec.boundaries.back() = hi;
    spec.clip_lo = spec.boundaries.front();
    spec.clip_hi = hi;
    spec.validate();
    return spec;
}

BinSpec historical_quantile_bins(std::span<const double> historical_values,
                                 std::size_t n_bins) {
    if (historical_values.empty())
        throw std::invalid_argument("historical_quantile_bins: empty input");
    if (n_bins == 0)
        throw std::invalid_argument("historical_quantile_bins: n_bins must be >= 1");

    std::vector<double> sorted(historical_values.begin(), historical_values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();

    std::vector<double> raw(n_bins + 1);
    for (std::size_t j = 0; j <= n_bins; ++j) {
        // nearest-rank quantile: X_(floor(n*p)) clamped to [1, n]
        double p = static_cast<double>(j) / static_cast<double>(n_bins);
        std::size_t rank = static_cast<std::size_t>(std::floor(static_cast<double>(n) * p));
        rank = std::clamp<std::size_t>(rank, 1, n);
        raw[j] = sorted[rank - 1];
    }
    raw.erase(std::unique(raw.begin(), raw.end()), raw.end());

    BinSpec spec;
    spec.strategy = BinStrategy::historical;
    if (raw.size() == 1) {
        double v = raw[0];
        double eta = 1e-9 * std::max(1.0, std::abs(v));
        spec.boundaries = {v, v + eta};
    } else {
        spec.boundaries = std::move(raw);
    }
    spec.clip_lo = spec.boundaries.front();
    spec.clip_hi = spec.boundaries.back();
    spec.validate();
    return spec;
}

double clip(double value, const BinSpec& spec) {
    return std::clamp(value, spec.clip_lo, spec.clip_hi);
}

std::size_t bin_index_of(const BinSpec& spec, double value) {
    double v = clip(value, spec);
    // half-open [b_{j-1}, b_j), last bin closed
    auto it = std::upper_bound(spec.boundaries.begin(), spec.boundaries.end(), v);
    std::size_t idx = static_cast<std::size_t>(it - spec.boundaries.begin());
    if (idx == 0) return 0;
    if (idx > spec.bin_count()) return spec.bin_count() - 1;
    return idx - 1;
}

double UnitHistogram::total() const {
    double t = 0.0;
    for (const auto& [bin, c] : counts) t += c;
    return t;
}

void UnitHistogram::add(std::uint32_t bin, double weight) {
    counts[bin] += weight;
}

std::vector<UnitHistogram> aggregate(std::span<const Observation> observations,
                                     const BinSpec& spec) {
    spec.validate();
    std::unordered_map<std::string, std::size_t> index;
    std::vector<UnitHistogram> out;
    for (const auto& obs : observations) {
        auto [it, inserted] = index.try_emplace(obs.unit_id, out.size());
        if (inserted) {
            UnitHistogram h;
            h.unit_id = obs.unit_id;
            h.arm = obs.arm;
            h.n_bins = spec.bin_count();
            out.push_back(std::move(h));
        }
        UnitHistogram& h = out[it->second];
        if (h.arm != obs.arm)
            throw std::runtime_error("aggregate: unit '" + obs.unit_id +
                                     "' appears in both arms");
        h.add(static_cast<std::uint32_t>(bin_index_of(spec, obs.value)));
    }
    std::sort(out.begin(), out.end(),
              [](const UnitHistogram& a, const UnitHistogram& b) {
                  return a.unit_id < b.unit_id;
              });
    return out;
}

UnitHistogram merge(const UnitHistogram& h1, const UnitHistogram& h2) {
    if (h1.unit_id != h2.unit_id || h1.arm != h2.arm)
        throw std::invalid_argument("merge: mismatched unit identity");
    if (h1.n_bins != h2.n_bins)
        throw std::invalid_argument("merge: mismatched bin count");
    UnitHistogram out = h1;
    for (const auto& [bin, c] : h2.counts) out.counts[bin] += c;
    return out;
}

PooledCounts pooled_counts(std::span<const UnitHistogram> histograms, Arm arm,
                           std::size_t n_bins) {
    PooledCounts pooled;
    pooled.counts.assign(n_bins, 0.0);
    for (const auto& h : histograms) {
        if (h.arm != arm) continue;
        for (const auto& [bin, c] : h.counts) {
            if (bin >= n_bins)
                throw std::invalid_argument("pooled_counts: bin index out of range");
            pooled.counts[bin] += c;
            pooled.total += c;
        }
    }
    return pooled;
}

RankLocator locate_rank(std::span<const double> pooled, const BinSpec& spec,
                        double r) {
    if (pooled.size() != spec.bin_count())
        throw std::invalid_argument("locate_rank: pooled size does not match spec");
    double total = 0.0;
    for (double c : pooled) total += c;
    if (!(total >= 1.0)) throw std::invalid_argument("locate_rank: need n >= 1");
    const double eps = 1e-9 * std::max(1.0, total);
    if (r < 1.0 - eps || r > total + eps)
        throw std::invalid_argument("locate_rank: rank outside [1, n]");
    r = std::clamp(r, 1.0, total);

    double cum = 0.0;
    std::size_t last_nonempty = 0;
    for (std::size_t j = 0; j < pooled.size(); ++j) {
        if (pooled[j] > 0.0) last_nonempty = j;
        double next = cum + pooled[j];
        if (next >= r - eps && pooled[j] > 0.0) {
            RankLocator loc;
            loc.bin_index = j;
            loc.k = std::min(r - cum, pooled[j]);
            loc.m = pooled[j];
            loc.bin_lo = spec.boundaries[j];
            loc.bin_hi = spec.boundaries[j + 1];
            return loc;
        }
        cum = next;
    }
    // r == total up to roundoff: land in the last non-empty bin at k = m.
    RankLocator loc;
    loc.bin_index = last_nonempty;
    loc.k = pooled[last_nonempty];
    loc.m = pooled[last_nonempty];
    loc.bin_lo = spec.boundaries[last_nonempty];
    loc.bin_hi = spec.boundaries[last_nonempty + 1];
    return loc;
}

double value_at_rank(const RankLocator& loc) {
    if (!(loc.m > 0.0))
        throw std::invalid_argument("value_at_rank: empty bin");
    if (loc.bin_hi <= loc.bin_lo) return loc.bin_lo;  // degenerate bin
    if (loc.k >= loc.m) return loc.bin_hi;  // keep boundary ranks exact
    if (loc.k <= 0.0) return loc.bin_lo;
    return loc.bin_lo + (loc.bin_hi - loc.bin_lo) * loc.k / loc.m;
}

double interpolated_below(const UnitHistogram& hist, const BinSpec& spec,
                          double x) {
    if (x < spec.boundaries.front()) return 0.0;
    if (x >= spec.boundaries.back()) return hist.total();
    // containing bin j: b_j <= x < b_{j+1} (0-based bins)
    auto it = std::upper_bound(spec.boundaries.begin(), spec.boundaries.end(), x);
    std::size_t j = static_cast<std::size_t>(it - spec.boundaries.begin()) - 1;
    double lo = spec.boundaries[j];
    double hi = spec.boundaries[j + 1];
    double frac = hi > lo ? (x - lo) / (hi - lo) : 0.0;
    double s = 0.0;
    for (const auto& [bin, c] : hist.counts) {
        if (bin < j)
            s += c;
        else if (bin == j)
            s += c * frac;
    }
    return s;
}

}  // namespace qte
