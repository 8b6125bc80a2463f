#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "qte/estimator.hpp"
#include "qte/synth.hpp"

using namespace qte;

namespace {

SynthConfig base_config() {
    SynthConfig c;
    c.n_units = 2000;
    c.cluster_size_law = ClusterSizeLaw::poisson_plus_one;
    c.cluster_size_param = 3.0;
    c.value_law = ValueLaw::normal;
    c.value_param1 = 0.0;
    c.value_param2 = 1.0;
    c.treatment_fraction = 0.5;
    c.clip_lo = -6.0;
    c.clip_hi = 6.0;
    c.seed = 101;
    return c;
}

std::vector<std::vector<double>> arm_units(const std::vector<Observation>& obs, Arm arm) {
    std::map<std::string, std::vector<double>> per_unit;
    for (const auto& o : obs)
        if (o.arm == arm) per_unit[o.unit_id].push_back(o.value);
    std::vector<std::vector<double>> out;
    for (auto& [id, v] : per_unit) out.push_back(std::move(v));
    return out;
}

}  // namespace

TEST_CASE("generation is deterministic and respects clipping") {
    auto c = base_config();
    auto a = generate(c);
    auto b = generate(c);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].unit_id == b[i].unit_id);
        CHECK(a[i].arm == b[i].arm);
        CHECK(a[i].value == b[i].value);
        CHECK(a[i].value >= c.clip_lo);
        CHECK(a[i].value <= c.clip_hi);
    }
    c.seed = 102;
    auto other = generate(c);
    bool differs = other.size() != a.size();
    for (std::size_t i = 0; !differs && i < a.size(); ++i)
        differs = a[i].value != other[i].value;
    CHECK(differs);
}

TEST_CASE("arm assignment is unit-level") {
    auto obs = generate(base_config());
    std::map<std::string, Arm> arm_of;
    for (const auto& o : obs) {
        auto [it, inserted] = arm_of.try_emplace(o.unit_id, o.arm);
        if (!inserted) CHECK(it->second == o.arm);
    }
    std::size_t treated = std::count_if(arm_of.begin(), arm_of.end(),
                                        [](const auto& kv) { return kv.second == Arm::treatment; });
    CHECK(treated > arm_of.size() / 4);
    CHECK(treated < 3 * arm_of.size() / 4);
}

TEST_CASE("fixed cluster sizes") {
    auto c = base_config();
    c.cluster_size_law = ClusterSizeLaw::fixed;
    c.cluster_size_param = 3.0;
    auto obs = generate(c);
    std::map<std::string, int> sizes;
    for (const auto& o : obs) sizes[o.unit_id]++;
    for (const auto& [id, sz] : sizes) CHECK(sz == 3);
}

TEST_CASE("null effect leaves arm medians close") {
    auto c = base_config();
    c.n_units = 4000;
    auto obs = generate(c);
    auto t = arm_units(obs, Arm::treatment);
    auto ctl = arm_units(obs, Arm::control);
    auto q = make_query(0.5, 0.05);
    auto eff = qte_absolute(exact_quantile_ci(t, q), exact_quantile_ci(ctl, q), q);
    CHECK(std::abs(eff.tau) < 3.0 * eff.se);
}

TEST_CASE("additive effect recovered at the median") {
    auto c = base_config();
    c.n_units = 20000;
    c.cluster_size_law = ClusterSizeLaw::fixed;
    c.cluster_size_param = 1.0;
    c.effect = EffectLaw::additive;
    c.effect_param = 0.3;
    auto obs = generate(c);
    auto t = arm_units(obs, Arm::treatment);
    auto ctl = arm_units(obs, Arm::control);
    auto q = make_query(0.5, 0.05);
    auto eff = qte_absolute(exact_quantile_ci(t, q), exact_quantile_ci(ctl, q), q);
    CHECK(std::abs(eff.tau - 0.3) < 3.0 * eff.se);
}

TEST_CASE("empirical moments match the configured law") {
    auto c = base_config();
    c.value_param1 = 2.0;
    c.value_param2 = 0.5;
    c.clip_lo = -10.0;
    c.clip_hi = 14.0;
    auto sample = generate_historical(c, 100000);
    double mean = 0.0;
    for (double x : sample) mean += x;
    mean /= double(sample.size());
    CHECK(mean == doctest::Approx(2.0).epsilon(0.01));
    double var = 0.0;
    for (double x : sample) var += (x - mean) * (x - mean);
    var /= double(sample.size() - 1);
    CHECK(std::sqrt(var) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("historical draws sit near the experiment quantiles") {
    auto c = base_config();
    c.value_law = ValueLaw::lognormal;
    c.clip_lo = 0.0;
    c.clip_hi = 50.0;
    c.n_units = 20000;
    auto hist = generate_historical(c, 100000);
    auto obs = generate(c);
    std::vector<double> exp_values;
    for (const auto& o : obs) exp_values.push_back(o.value);
    std::sort(hist.begin(), hist.end());
    std::sort(exp_values.begin(), exp_values.end());
    for (double p = 0.05; p <= 0.95; p += 0.05) {
        double qh = hist[std::size_t(double(hist.size()) * p)];
        double qe = exp_values[std::size_t(double(exp_values.size()) * p)];
        CHECK(std::abs(qh - qe) / qe < 0.05);
    }
}

TEST_CASE("shifted historical law produces a systematic offset") {
    auto c = base_config();
    auto plain = generate_historical(c, 50000);
    auto shifted = generate_historical(c, 50000, 0.2);
    double m1 = 0, m2 = 0;
    for (double x : plain) m1 += x;
    for (double x : shifted) m2 += x;
    CHECK(m2 / 50000 - m1 / 50000 == doctest::Approx(0.2).epsilon(0.1));
}

TEST_CASE("pareto law draws respect x_m and heavy tail") {
    auto c = base_config();
    c.value_law = ValueLaw::pareto;
    c.value_param1 = 1.0;  // x_m
    c.value_param2 = 2.0;  // shape
    c.clip_lo = 0.0;
    c.clip_hi = 1000.0;
    auto sample = generate_historical(c, 50000);
    double below = 0;
    for (double x : sample) {
        CHECK(x >= 1.0);
        if (x <= 2.0) below += 1;
    }
    // P(X <= 2) = 1 - (1/2)^2 = 0.75
    CHECK(below / 50000 == doctest::Approx(0.75).epsilon(0.02));
}

TEST_CASE("invalid configs are rejected") {
    auto c = base_config();
    c.n_units = 0;
    CHECK_THROWS(generate(c));
    c = base_config();
    c.clip_lo = 5;
    c.clip_hi = 5;
    CHECK_THROWS(generate(c));
    c = base_config();
    CHECK_THROWS(generate_historical(c, 0));
}
