#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "trendboot/mcharness.hpp"
#include "trendboot/shapetests.hpp"

#include <algorithm>
#include <cmath>

using namespace trendboot;
using testsupport::Gen;

namespace {
AwbConfig boot(std::size_t B, std::uint64_t seed) {
    AwbConfig cfg;
    cfg.replicates = B;
    cfg.seed = seed;
    return cfg;
}

ObservedSeries v_shape(std::size_t T, std::size_t at, double slope, std::vector<std::uint8_t> mask = {}) {
    if (mask.empty()) mask.assign(T, 1);
    std::vector<double> v(T);
    for (std::size_t i = 0; i < T; ++i) v[i] = slope * std::abs(double(i) - double(at));
    return ObservedSeries(v, mask);
}

// bandwidth below one grid step: the smoother and its pilot reproduce the data
double no_smoothing(std::size_t T) { return 0.4 * std::pow(1.0 / double(T), 9.0 / 5.0); }
} // namespace

TEST_CASE("bandwidth for the U statistics") {
    CHECK(default_u_bandwidth(2935) == doctest::Approx(0.10126243891980927976).epsilon(1e-14));
    CHECK(default_u_bandwidth(814) == doctest::Approx(0.13087151301700859823).epsilon(1e-14));
    CHECK(default_u_bandwidth(1399) == doctest::Approx(0.11743740914045126869).epsilon(1e-14));
}

TEST_CASE("local extrema") {
    const std::vector<double> g{3, 1, 2, 0, 5};
    const std::vector<std::uint8_t> all(5, 1);
    CHECK(local_extrema(g, all, ExtremumKind::minimum) == std::vector<std::size_t>{1, 3});
    CHECK(local_extrema(g, all, ExtremumKind::maximum) == std::vector<std::size_t>{2});
    CHECK(nearest_local_extremum(g, all, ExtremumKind::minimum, 3) == std::optional<std::size_t>{3});
    CHECK(nearest_local_extremum(g, all, ExtremumKind::minimum, 0) == std::optional<std::size_t>{1});
    CHECK(nearest_local_extremum(g, all, ExtremumKind::minimum, 2) == std::optional<std::size_t>{1}); // tie
    CHECK(principal_extremum(g, all, ExtremumKind::minimum) == std::optional<std::size_t>{3});

    const std::vector<double> rising{1, 2, 3, 4};
    CHECK_FALSE(nearest_local_extremum(rising, std::vector<std::uint8_t>(4, 1), ExtremumKind::minimum, 1));
    // flat bottom counts once at its left end; undefined points are skipped
    const std::vector<double> flat{5, 2, 2, 2, 6, NAN, 1, 7};
    const std::vector<std::uint8_t> def{1, 1, 1, 1, 1, 0, 1, 1};
    CHECK(local_extrema(flat, def, ExtremumKind::minimum) == std::vector<std::size_t>{1, 6});
}

TEST_CASE("property: nearest local minimum agrees with an exhaustive scan") {
    Gen g(1);
    for (int rep = 0; rep < 300; ++rep) {
        const std::size_t n = 3 + g.below(30);
        std::vector<double> x(n);
        for (auto& v : x) v = double(g.below(6));
        const std::vector<std::uint8_t> def(n, 1);
        std::vector<std::size_t> minima;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (x[i] >= x[i - 1]) continue;
            std::size_t j = i;
            while (j + 1 < n && x[j + 1] == x[i]) ++j;
            if (j + 1 < n && x[j + 1] > x[i]) minima.push_back(i);
        }
        CHECK(local_extrema(x, def, ExtremumKind::minimum) == minima);
        const std::size_t target = g.below(n);
        std::optional<std::size_t> best;
        for (auto m : minima) {
            const auto d = [&](std::size_t a) { return a > target ? a - target : target - a; };
            if (!best || d(m) < d(*best)) best = m;
        }
        CHECK(nearest_local_extremum(x, def, ExtremumKind::minimum, target) == best);
    }
}

TEST_CASE("symmetric noiseless V: the extremum interval is a point") {
    const std::size_t T = 201;
    const auto s = v_shape(T, 100, 0.5);
    const auto fit = nw_estimate(s, no_smoothing(T));
    const auto r = extremum_ci(s, fit, boot(99, 3));
    CHECK(r.location == 100);
    CHECK(r.lower == 100);
    CHECK(r.upper == 100);
    CHECK(std::all_of(r.bootstrap_locations.begin(), r.bootstrap_locations.end(), [](auto t) { return t == 100; }));

    // sparse sampling: each pilot window holds a single observation, so residuals vanish
    std::vector<std::uint8_t> mask(T + 100, 0);
    for (std::size_t i = 6; i < mask.size(); i += 16) mask[i] = 1;
    const auto sparse = v_shape(T + 100, 150, 1.0, mask);
    const auto sfit = nw_estimate(sparse, 0.01);
    const auto sr = extremum_ci(sparse, sfit, boot(99, 4));
    CHECK(sr.lower == sr.location);
    CHECK(sr.upper == sr.location);

    CHECK_THROWS_AS(extremum_ci(s, fit, boot(9, 1), ExtremumKind::maximum), ValidationError);
}

TEST_CASE("extremum interval covers the true minimum") {
    mc::McDesign d;
    d.T = 400;
    d.phi = 0.5;
    d.sigma_eta = 0.35;
    d.trend = mc::SmoothTransition{2.0, -1.5, 2.0, 10.0, 0.2, 0.6};
    const auto truth = mc::gen_trend(d);
    const auto t_true = std::size_t(std::min_element(truth.begin(), truth.end()) - truth.begin());
    int covered = 0;
    const int R = 300;
    for (int r = 0; r < R; ++r) {
        const auto s = mc::simulate(d, 700 + r);
        const auto fit = nw_estimate(s, 0.1);
        const auto res = extremum_ci(s, fit, boot(199, r));
        covered += res.lower <= t_true && t_true <= res.upper;
    }
    const double rate = double(covered) / R;
    MESSAGE("minimum-location coverage " << rate);
    CHECK(rate >= 0.90);
}

TEST_CASE("pinned slope") {
    const std::vector<double> v{9, 9, 1, 3, 5, 8};
    const std::vector<std::uint8_t> m{1, 1, 1, 1, 1, 1};
    // x = 0..3 from the anchor at index 2, y - a = 0, 2, 4, 7
    const double slope = (0 * 0 + 1 * 2 + 2 * 4 + 3 * 7) / double(0 + 1 + 4 + 9);
    CHECK(pinned_slope(v, m, Anchor{2, 1.0}, 5) == doctest::Approx(slope));
    const std::vector<std::uint8_t> only_anchor{1, 1, 1, 0, 0, 0};
    CHECK_THROWS_AS(pinned_slope(v, only_anchor, Anchor{2, 1.0}, 5), SingularDesignError);

    Gen g(2);
    for (int rep = 0; rep < 20; ++rep) {
        const auto s = testsupport::random_series(g, 50 + g.below(100), 0.7);
        const std::size_t a = g.below(s.size() / 2);
        const double av = g.normal();
        double num = 0, den = 0;
        for (std::size_t t = a; t < s.size(); ++t)
            if (s.observed(t)) {
                num += double(t - a) * (s.value(t) - av);
                den += double(t - a) * double(t - a);
            }
        CHECK(pinned_slope(s.masked_values(), s.mask(), Anchor{a, av}, s.size() - 1) ==
              doctest::Approx(num / den).epsilon(1e-12));
    }
}

TEST_CASE("linear after the kink: the Q statistics vanish without smoothing") {
    const std::size_t T = 300, kink = 120;
    std::vector<double> v(T);
    for (std::size_t i = 0; i < T; ++i) v[i] = i < kink ? 5.0 - 0.02 * double(i) : 5.0 - 0.02 * kink + 0.03 * double(i - kink);
    const ObservedSeries s(v, std::vector<std::uint8_t>(T, 1));
    const auto fit = nw_estimate(s, no_smoothing(T));
    const auto r = linearity_test(s, fit, Anchor{kink, fit.g_hat[kink]}, boot(49, 1));
    CHECK(r.q_ave < 1e-20);
    CHECK(r.q_sup < 1e-20);
    CHECK(r.slope == doctest::Approx(0.03));

    double prev = INFINITY;
    for (double h : {0.2, 0.1, 0.05, 0.02}) {
        const auto f = nw_estimate(s, h);
        const auto q = linearity_statistics(f.g_hat, f.defined, Anchor{kink, f.g_hat[kink]},
                                            pinned_slope(s.masked_values(), s.mask(), Anchor{kink, f.g_hat[kink]}, T - 1),
                                            T - 1);
        CHECK(q.first < prev);
        prev = q.first;
    }
}

TEST_CASE("linearity test: statistics, errors and determinism") {
    Gen g(3);
    for (int rep = 0; rep < 5; ++rep) {
        const auto s = testsupport::random_series(g, 300, 0.6);
        const auto fit = nw_estimate(s, 0.08);
        const std::size_t a = 100 + g.below(100);
        if (!fit.defined[a]) continue;
        const auto r = linearity_test(s, fit, Anchor{a, fit.g_hat[a]}, boot(49, 10 + rep));
        CHECK(r.q_sup >= r.q_ave);
        CHECK(r.q_ave >= 0.0);
        CHECK(r.p_ave >= 1.0 / 50);
        CHECK(r.p_sup <= 1.0);
        CHECK(r.test_set.first == a);
        CHECK(r.test_set.last == s.size() - 1);
        for (std::size_t b = 0; b < r.bootstrap_ave.size(); ++b) CHECK(r.bootstrap_sup[b] >= r.bootstrap_ave[b]);
    }
    std::vector<std::uint8_t> mask(100, 1);
    for (std::size_t i = 97; i < 100; ++i) mask[i] = 0;
    const auto s = v_shape(100, 50, 1.0, mask);
    const auto fit = nw_estimate(s, 0.1);
    CHECK_THROWS_WITH_AS(linearity_test(s, fit, Anchor{95, fit.g_hat[95]}, boot(9, 1)),
                         "test set has fewer than 3 observed points", ValidationError);

    const auto r1 = [&] {
        set_worker_threads(1);
        return linearity_test(s, fit, Anchor{40, fit.g_hat[40]}, boot(64, 5));
    }();
    set_worker_threads(4);
    const auto r4 = linearity_test(s, fit, Anchor{40, fit.g_hat[40]}, boot(64, 5));
    set_worker_threads(0);
    CHECK(r1.bootstrap_ave == r4.bootstrap_ave);
    CHECK(r1.bootstrap_sup == r4.bootstrap_sup);
}

TEST_CASE("frozen U statistics") {
    const auto s = testsupport::frozen_instance();
    const IndexInterval iv{5, 34};
    const auto u1 = u1_statistics(s.masked_values(), s.mask(), iv, 0.2);
    const auto u2 = u2_statistics(s.masked_values(), s.mask(), iv, 0.2);
    CHECK(u1[0] == doctest::Approx(0.2410301795372596).epsilon(1e-12));
    CHECK(u1[15] == doctest::Approx(0.01998314490685096).epsilon(1e-12));
    CHECK(u1[29] == doctest::Approx(-0.4539034916804387).epsilon(1e-12));
    CHECK(u2[0] == doctest::Approx(0.21508180045177155).epsilon(1e-12));
    CHECK(u2[15] == doctest::Approx(-0.017050790675445526).epsilon(1e-12));
    CHECK(u2[29] == doctest::Approx(-0.5138745787702844).epsilon(1e-12));
}

TEST_CASE("U statistics equal the double-loop oracle") {
    Gen g(4);
    for (int rep = 0; rep < 25; ++rep) {
        const std::size_t T = 10 + g.below(191);
        auto s = testsupport::random_series(g, T, g.uniform(0.2, 1.0));
        if (rep % 3 == 0) { // ties
            std::vector<double> v(T);
            for (std::size_t i = 0; i < T; ++i) v[i] = std::round(s.value(i));
            s = s.with_values(v);
        }
        const double h = g.uniform(0.02, 0.5);
        const std::size_t a = g.below(T), b = a + g.below(T - a);
        const IndexInterval iv{a, b};
        const auto u1 = u1_statistics(s.masked_values(), s.mask(), iv, h);
        const auto u2 = u2_statistics(s.masked_values(), s.mask(), iv, h);
        for (std::size_t t = a; t <= b; ++t) {
            CHECK(testsupport::close_rel(u1[t - a], testsupport::naive_u(s, t, h, true), 1e-10));
            CHECK(testsupport::close_rel(u2[t - a], testsupport::naive_u(s, t, h, false), 1e-10));
        }
    }
}

TEST_CASE("property: U1 is invariant to increasing transforms, U2 is scale-equivariant and shift-invariant") {
    Gen g(5);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t T = 20 + g.below(200);
        const auto s = testsupport::random_series(g, T, g.uniform(0.3, 1.0));
        const IndexInterval iv{0, T - 1};
        const double h = g.uniform(0.05, 0.4), c = g.uniform(-10, 10), k = g.uniform(0.1, 10);
        std::vector<double> mono(T), shifted(T), scaled(T);
        for (std::size_t i = 0; i < T; ++i) {
            const double x = s.value(i);
            mono[i] = x * x * x + std::exp(x / 4);
            shifted[i] = x + c;
            scaled[i] = k * x;
        }
        const auto base1 = u1_statistics(s.masked_values(), s.mask(), iv, h);
        const auto base2 = u2_statistics(s.masked_values(), s.mask(), iv, h);
        const auto m1 = u1_statistics(s.with_values(mono).masked_values(), s.mask(), iv, h);
        const auto sh2 = u2_statistics(s.with_values(shifted).masked_values(), s.mask(), iv, h);
        const auto sc2 = u2_statistics(s.with_values(scaled).masked_values(), s.mask(), iv, h);
        for (std::size_t t = 0; t < T; ++t) {
            CHECK(m1[t] == doctest::Approx(base1[t]).epsilon(1e-12));
            CHECK(sh2[t] == doctest::Approx(base2[t]).epsilon(1e-9).scale(1.0));
            CHECK(sc2[t] == doctest::Approx(k * base2[t]).epsilon(1e-10).scale(1.0));
        }
    }
}

TEST_CASE("strictly increasing series: every U1 is negative") {
    const std::size_t T = 120;
    std::vector<double> v(T);
    for (std::size_t i = 0; i < T; ++i) v[i] = std::log(1.0 + double(i));
    Gen g(6);
    const ObservedSeries s(v, testsupport::random_mask(g, T, 0.6));
    const auto u1 = u1_statistics(s.masked_values(), s.mask(), IndexInterval{1, T - 2}, default_u_bandwidth(T));
    CHECK(*std::max_element(u1.begin(), u1.end()) < 0.0);
}

TEST_CASE("monotonicity tests: errors, defaults and determinism") {
    Gen g(7);
    const auto s = testsupport::random_series(g, 250, 0.5);
    CHECK_THROWS_AS(monotonicity_tests(s, IndexInterval{10, 250}, 0.08, boot(9, 1)), ValidationError);
    CHECK_THROWS_AS(monotonicity_tests(s, IndexInterval{20, 10}, 0.08, boot(9, 1)), ValidationError);
    set_worker_threads(1);
    const auto a = monotonicity_tests(s, IndexInterval{50, 249}, 0.08, boot(40, 2));
    set_worker_threads(3);
    const auto b = monotonicity_tests(s, IndexInterval{50, 249}, 0.08, boot(40, 2));
    set_worker_threads(0);
    CHECK(a.h_u == default_u_bandwidth(250));
    CHECK(a.bootstrap_u1 == b.bootstrap_u1);
    CHECK(a.bootstrap_u2 == b.bootstrap_u2);
    CHECK(a.p1 == b.p1);
    CHECK(a.p1 >= 1.0 / 41);
    const auto u1 = u1_statistics(s.masked_values(), s.mask(), IndexInterval{50, 249}, a.h_u);
    CHECK(a.u1 == *std::max_element(u1.begin(), u1.end()));
}
