#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "qte/estimator.hpp"
#include "qte/math.hpp"

using namespace qte;

TEST_CASE("normal quantile / cdf round trip") {
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963985).epsilon(1e-8));
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
    for (double p : {0.001, 0.025, 0.3, 0.77, 0.995})
        CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
}

TEST_CASE("cluster_stats sample moments") {
    std::vector<double> s{1, 3}, n{1, 1};
    auto st = cluster_stats(s, n);
    CHECK(st.k == 2);
    CHECK(st.mean_s == 2.0);
    CHECK(st.mean_n == 1.0);
    CHECK(st.var_s == doctest::Approx(2.0));
    CHECK(st.var_n == 0.0);
    CHECK(st.cov_sn == 0.0);

    std::vector<double> s2{5, 5, 5}, n2{2, 2, 2};
    auto st2 = cluster_stats(s2, n2);
    CHECK(st2.var_s == 0.0);
    CHECK(st2.var_n == 0.0);
    CHECK(st2.cov_sn == 0.0);

    std::vector<double> s3{1, 2}, n3{2, 4};
    CHECK(cluster_stats(s3, n3).cov_sn == doctest::Approx(1.0));

    CHECK_THROWS(cluster_stats(std::vector<double>{1.0}, std::vector<double>{1.0}));
}

TEST_CASE("clustered_mean_variance") {
    // equal cluster sizes reduce to Var(S) / (K * Nbar^2)
    std::vector<double> s{1, 3}, n{1, 1};
    auto st = cluster_stats(s, n);
    CHECK(clustered_mean_variance(st) == doctest::Approx(1.0));

    ClusterStats manual;
    manual.k = 10;
    manual.mean_s = 4.0;
    manual.mean_n = 2.0;
    manual.var_s = 3.0;
    manual.var_n = 0.0;
    manual.cov_sn = 0.0;
    CHECK(clustered_mean_variance(manual) == doctest::Approx(3.0 / (10 * 4.0)));

    // extreme covariance can push the quadratic negative; result is floored
    ClusterStats neg = manual;
    neg.cov_sn = 100.0;
    CHECK(clustered_mean_variance(neg) == 0.0);

    ClusterStats zero_n = manual;
    zero_n.mean_n = 0.0;
    CHECK_THROWS(clustered_mean_variance(zero_n));
}

TEST_CASE("clustered variance tracks a cluster bootstrap") {
    std::mt19937_64 rng(41);
    std::poisson_distribution<int> pois(4);
    std::lognormal_distribution<double> lgn(0.0, 1.0);
    const std::size_t k = 2000;
    std::vector<std::vector<double>> units(k);
    std::vector<double> all;
    for (auto& u : units) {
        int sz = pois(rng) + 1;
        for (int j = 0; j < sz; ++j) {
            u.push_back(lgn(rng));
            all.push_back(u.back());
        }
    }
    std::nth_element(all.begin(), all.begin() + all.size() / 2, all.end());
    double median = all[all.size() / 2];

    std::vector<double> s(k), n(k);
    for (std::size_t i = 0; i < k; ++i) {
        n[i] = double(units[i].size());
        s[i] = double(std::count_if(units[i].begin(), units[i].end(),
                                    [&](double x) { return x <= median; }));
    }
    double v_delta = clustered_mean_variance(cluster_stats(s, n));

    // cluster bootstrap of the indicator mean
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    std::vector<double> means;
    for (int b = 0; b < 800; ++b) {
        double ss = 0, nn = 0;
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = pick(rng);
            ss += s[j];
            nn += n[j];
        }
        means.push_back(ss / nn);
    }
    double mu = 0;
    for (double m : means) mu += m;
    mu /= double(means.size());
    double v_boot = 0;
    for (double m : means) v_boot += (m - mu) * (m - mu);
    v_boot /= double(means.size() - 1);

    CHECK(v_delta == doctest::Approx(v_boot).epsilon(0.20));
}

TEST_CASE("rank_bounds arithmetic") {
    auto q = make_query(0.5, 0.05);
    auto b = rank_bounds(100, q);
    CHECK(b.r_mid == 50.0);
    CHECK(b.lower == 40.0);
    CHECK(b.upper == 60.0);
    CHECK_FALSE(b.clamped);

    // extreme quantile: upper bound clamps to n and is flagged
    auto qx = make_query(0.999, 0.05);
    auto bx = rank_bounds(100, qx);
    CHECK(bx.upper == 100.0);
    CHECK(bx.clamped);

    // z -> 0 degenerates to the point rank
    QuantileQuery qz{0.5, 1.0, 0.0};
    auto bz = rank_bounds(100, qz);
    CHECK(bz.lower == bz.r_mid);
    CHECK(bz.upper == bz.r_mid);

    CHECK_THROWS(rank_bounds(100, make_query(0.001, 0.05)));  // n*p < 1
    CHECK_THROWS(rank_bounds(1.5, q));
}

TEST_CASE("exact_quantile_ci on constant data") {
    std::vector<std::vector<double>> units(10, std::vector<double>{3.0, 3.0});
    auto est = exact_quantile_ci(units, make_query(0.5, 0.05));
    CHECK(est.q == 3.0);
    CHECK(est.x_upper - est.x_lower == 0.0);
    CHECK(est.se == 0.0);
}

TEST_CASE("exact point estimate equals the sort oracle") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> d(1.0, 2.0);
    for (int trial = 0; trial < 5; ++trial) {
        std::size_t n_units = 20 + rng() % 80;
        std::vector<std::vector<double>> units(n_units);
        std::vector<double> all;
        for (auto& u : units) {
            std::size_t sz = 1 + rng() % 10;
            for (std::size_t j = 0; j < sz; ++j) {
                u.push_back(d(rng));
                all.push_back(u.back());
            }
        }
        std::sort(all.begin(), all.end());
        for (double p : {0.25, 0.5, 0.9}) {
            auto est = exact_quantile_ci(units, make_query(p, 0.05));
            auto rank = static_cast<std::size_t>(
                std::clamp(std::floor(double(all.size()) * p), 1.0, double(all.size())));
            CHECK(est.q == all[rank - 1]);
        }
    }
}

TEST_CASE("correction factor near 1 for singleton clusters") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<std::vector<double>> units(10000);
    for (auto& u : units) u.push_back(d(rng));
    for (double p : {0.25, 0.5, 0.75}) {
        auto est = exact_quantile_ci(units, make_query(p, 0.05));
        CHECK(est.c > 0.9);
        CHECK(est.c < 1.1);
    }
}

namespace {

// Boundaries at the distinct data values (terminal boundary prepended),
// observations assigned to the bin whose right boundary they equal.
std::vector<UnitHistogram> exactness_histograms(
    const std::vector<std::vector<double>>& units, BinSpec& spec) {
    std::vector<double> sorted;
    for (const auto& u : units) sorted.insert(sorted.end(), u.begin(), u.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    spec.boundaries.clear();
    spec.boundaries.push_back(sorted.front() - 1.0);
    for (double v : sorted) spec.boundaries.push_back(v);
    spec.clip_lo = spec.boundaries.front();
    spec.clip_hi = spec.boundaries.back();
    spec.strategy = BinStrategy::historical;

    std::vector<UnitHistogram> out;
    for (std::size_t i = 0; i < units.size(); ++i) {
        UnitHistogram h;
        h.unit_id = "u" + std::to_string(i);
        h.arm = Arm::treatment;
        h.n_bins = spec.bin_count();
        for (double v : units[i]) {
            auto it = std::lower_bound(spec.boundaries.begin() + 1,
                                       spec.boundaries.end(), v);
            h.add(static_cast<std::uint32_t>(it - spec.boundaries.begin()) - 1);
        }
        out.push_back(std::move(h));
    }
    return out;
}

}  // namespace

TEST_CASE("histogram estimate matches exact when bins sit on the data") {
    std::mt19937_64 rng(13);
    std::lognormal_distribution<double> d(0.0, 0.7);
    std::vector<std::vector<double>> units(120);
    for (auto& u : units) {
        std::size_t sz = 1 + rng() % 7;
        for (std::size_t j = 0; j < sz; ++j) u.push_back(d(rng));
    }
    BinSpec spec;
    auto hists = exactness_histograms(units, spec);
    for (double p : {0.1, 0.5, 0.95}) {
        auto q = make_query(p, 0.05);
        auto exact = exact_quantile_ci(units, q);
        auto approx = histogram_quantile_ci(hists, spec, q);
        CHECK(approx.q == exact.q);
        CHECK(approx.x_lower == exact.x_lower);
        CHECK(approx.x_upper == exact.x_upper);
        CHECK(approx.c == doctest::Approx(exact.c).epsilon(1e-12));
        CHECK(approx.se == doctest::Approx(exact.se).epsilon(1e-12));
    }
}

TEST_CASE("histogram estimate rejects a single unit") {
    auto spec = linear_bins(0, 10, 5);
    std::vector<UnitHistogram> one{{"u1", Arm::treatment, 5, {{2, 4}}}};
    CHECK_THROWS(histogram_quantile_ci(one, spec, make_query(0.5, 0.05)));
}

TEST_CASE("single-bin mass sets the low-resolution flag") {
    auto spec = linear_bins(0, 10, 5);
    std::vector<UnitHistogram> hists{
        {"u1", Arm::treatment, 5, {{2, 6}}},
        {"u2", Arm::treatment, 5, {{2, 6}}},
    };
    auto est = histogram_quantile_ci(hists, spec, make_query(0.5, 0.05));
    CHECK(std::find(est.flags.begin(), est.flags.end(), "low_resolution") !=
          est.flags.end());
    CHECK(est.q > 4.0);
    CHECK(est.q < 6.0);
}

TEST_CASE("qte_absolute") {
    auto q = make_query(0.5, 0.05);
    QuantileEstimate t, c;
    t.q = 5.0;
    t.se = 0.1;
    c.q = 3.0;
    c.se = 0.1;
    auto eff = qte_absolute(t, c, q);
    CHECK(eff.tau == 2.0);
    CHECK(eff.se == doctest::Approx(std::sqrt(0.02)));
    CHECK(eff.ci_hi - eff.ci_lo == doctest::Approx(2.0 * q.z * eff.se));

    auto null_eff = qte_absolute(t, t, q);
    CHECK(null_eff.tau == 0.0);
    CHECK(null_eff.p_value == doctest::Approx(1.0));

    // symmetric in arms up to sign
    auto swapped = qte_absolute(c, t, q);
    CHECK(swapped.se == eff.se);
    CHECK(swapped.tau == -eff.tau);
}

TEST_CASE("qte_relative variance") {
    auto q = make_query(0.5, 0.05);
    QuantileEstimate t, c;
    t.q = 6.0;
    t.se = 0.2;  // Var = 0.04
    c.q = 5.0;
    c.se = 0.1;  // Var = 0.01
    auto eff = qte_relative(t, c, q);
    CHECK(eff.tau == doctest::Approx(0.2));
    CHECK(eff.se * eff.se == doctest::Approx(0.002176));

    // Var_c = 0 reduces to ratio scaling
    QuantileEstimate c0 = c;
    c0.se = 0.0;
    auto eff0 = qte_relative(t, c0, q);
    CHECK(eff0.se * eff0.se == doctest::Approx(0.04 / 25.0));

    // equal arms, equal variances
    QuantileEstimate a = c, b = c;
    auto effq = qte_relative(a, b, q);
    CHECK(effq.tau == 0.0);
    CHECK(effq.se * effq.se == doctest::Approx(2.0 * 0.01 / 25.0));

    // arm swap changes the se in the pattern the ratio variance predicts
    auto rev = qte_relative(c, t, q);
    double expect = (0.01 + (25.0 / 36.0) * 0.04) / 36.0;
    CHECK(rev.se * rev.se == doctest::Approx(expect));

    QuantileEstimate zeroc;
    zeroc.q = 0.0;
    CHECK_THROWS(qte_relative(t, zeroc, q));
}

TEST_CASE("relative effect is invariant under common rescaling") {
    std::mt19937_64 rng(77);
    std::lognormal_distribution<double> d(0.0, 0.5);
    std::vector<std::vector<double>> t(60), c(60);
    for (auto& u : t) u = {d(rng), d(rng)};
    for (auto& u : c) u = {d(rng), d(rng)};
    auto q = make_query(0.5, 0.05);

    auto eff1 = qte_relative(exact_quantile_ci(t, q), exact_quantile_ci(c, q), q);
    auto scale = [](std::vector<std::vector<double>> v) {
        for (auto& u : v)
            for (auto& x : u) x *= 7.5;
        return v;
    };
    auto eff2 = qte_relative(exact_quantile_ci(scale(t), q),
                             exact_quantile_ci(scale(c), q), q);
    CHECK(eff2.tau == doctest::Approx(eff1.tau).epsilon(1e-9));
    CHECK(eff2.se == doctest::Approx(eff1.se).epsilon(1e-9));
    CHECK(eff2.p_value == doctest::Approx(eff1.p_value).epsilon(1e-9));
}
