#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "trendboot/awb.hpp"
#include "trendboot/error.hpp"
#include "trendboot/mcharness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace trendboot;
using namespace trendboot::mc;

namespace {
double mean_of(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / double(x.size());
}

double variance_of(const std::vector<double>& x) {
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / double(x.size());
}

double lag1_autocorrelation(const std::vector<double>& x) {
    const double m = mean_of(x);
    double num = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) num += (x[i] - m) * (x[i - 1] - m);
    return num / (double(x.size()) * variance_of(x));
}

struct ChainCounts {
    double observed_fraction;
    double p01, p11;
};

ChainCounts chain_counts(MissingMode mode, std::size_t T, std::uint64_t seed) {
    const auto m = gen_mask(mode, T, seed);
    double observed = 0, from0 = 0, from1 = 0, n01 = 0, n11 = 0;
    for (std::size_t t = 0; t < T; ++t) {
        observed += m[t];
        if (t == 0) continue;
        if (m[t - 1]) {
            ++from1;
            n11 += m[t];
        } else {
            ++from0;
            n01 += m[t];
        }
    }
    return {observed / double(T), n01 / from0, n11 / from1};
}
} // namespace

TEST_CASE("mask chains settle at their stationary observed share") {
    const auto a = chain_counts(MissingMode::missing30, 1000000, 3);
    CHECK(std::abs(a.observed_fraction - 9.0 / 13.0) < 0.01);
    CHECK(std::abs(a.p01 - 0.45) < 0.01);
    CHECK(std::abs(a.p11 - 0.8) < 0.01);

    const auto b = chain_counts(MissingMode::missing70, 1000000, 4);
    CHECK(std::abs(b.observed_fraction - 4.0 / 13.0) < 0.01);
    CHECK(std::abs(b.p01 - 0.2) < 0.01);
    CHECK(std::abs(b.p11 - 0.55) < 0.01);

    for (auto mode : {MissingMode::missing30, MissingMode::missing70}) {
        const auto P = transition_matrix(mode);
        CHECK(P.p00 + P.p01 == doctest::Approx(1.0));
        CHECK(P.p10 + P.p11 == doctest::Approx(1.0));
    }
    CHECK(transition_matrix(MissingMode::missing30).stationary_observed() == doctest::Approx(9.0 / 13.0));
}

TEST_CASE("white-noise errors have variance one half") {
    McDesign d;
    d.T = 1000000;
    const auto u = gen_errors(d, 11);
    CHECK(std::abs(variance_of(u) / 0.5 - 1.0) < 0.01);
    CHECK(std::abs(mean_of(u)) < 0.005);
}

TEST_CASE("AR(1) errors keep the variance and carry the lag-one correlation") {
    McDesign d;
    d.T = 1000000;
    d.phi = 0.5;
    const auto u = gen_errors(d, 12);
    CHECK(std::abs(variance_of(u) - 0.5) < 0.01);
    CHECK(std::abs(lag1_autocorrelation(u) - 0.5) < 0.01);

    // MA part: rho1 = (1 + phi psi)(phi + psi) / (1 + 2 phi psi + psi^2)
    d.psi = 0.5;
    const auto w = gen_errors(d, 13);
    CHECK(std::abs(variance_of(w) - 0.5) < 0.015);
    CHECK(std::abs(lag1_autocorrelation(w) - 1.25 / 1.75) < 0.01);

    d.phi = 0.0;
    d.psi = 0.0;
    d.sigma_eta = 4.0;
    CHECK(std::abs(variance_of(gen_errors(d, 14)) / 8.0 - 1.0) < 0.01);
}

TEST_CASE("volatility function") {
    const Heteroskedasticity v;
    CHECK(v(0.0) == doctest::Approx(1.5));
    CHECK(v(1.0) == doctest::Approx(2.5));
    CHECK(v(0.125) == doctest::Approx(1.125 - 0.5));

    McDesign d;
    d.T = 200000;
    d.hetero = true;
    const auto u = gen_errors(d, 5);
    // late errors are scaled up by about sigma(1) / sigma(0)
    std::vector<double> head(u.begin(), u.begin() + 2000), tail(u.end() - 2000, u.end());
    const double ratio = std::sqrt(variance_of(tail) / variance_of(head));
    CHECK(ratio > 1.45);
    CHECK(ratio < 1.9);
}

TEST_CASE("invalid designs are rejected") {
    McDesign d;
    d.phi = 1.0;
    CHECK_THROWS_AS(gen_errors(d, 1), ValidationError);
    d.phi = -1.2;
    CHECK_THROWS_AS(gen_errors(d, 1), ValidationError);
    McDesign e;
    e.trend = LinearTrend{0, 1, 0, 1.0};
    CHECK_THROWS_AS(e.validate(), ValidationError);
    McDesign f;
    f.sigma_eta = 0.0;
    CHECK_THROWS_AS(f.validate(), ValidationError);
}

TEST_CASE("logistic transition is one half at its centre") {
    for (double lambda : {0.5, 3.0, 10.0, 80.0})
        for (double c : {0.1, 0.5, 0.9}) CHECK(transition(c, lambda, c) == doctest::Approx(0.5));
    CHECK(transition(1.0, 10.0, 0.2) > 0.999);
    CHECK(transition(0.0, 10.0, 0.6) < 0.01);
}

TEST_CASE("trend shapes") {
    McDesign d;
    d.T = 100;
    const auto line = gen_trend(d);
    CHECK(line[0] == doctest::Approx(3999.5));
    for (std::size_t i = 1; i < line.size(); ++i) CHECK(line[i] - line[i - 1] == doctest::Approx(-0.5));

    d.trend = LinearTrend{4000.0, -0.5, 0.8, 0.6};
    const auto kink = gen_trend(d);
    CHECK(std::get<LinearTrend>(d.trend).break_index(100) == 60);
    CHECK(kink[59] == doctest::Approx(4000.0 - 30.0));
    CHECK(kink[70] - kink[69] == doctest::Approx(0.3));
    CHECK(kink[30] - kink[29] == doctest::Approx(-0.5));

    d.T = 1000;
    d.trend = SmoothTransition{};
    const auto g = gen_trend(d);
    CHECK(std::abs(g[0] - 1.0) < 0.15);
    std::size_t peak = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g[i] > g[peak]) peak = i;
    CHECK(peak > 200);
    CHECK(peak < 600);
    for (std::size_t i = 1; i <= peak; ++i) CHECK(g[i] >= g[i - 1]);
    CHECK(g.back() < g[peak] - 0.3);
    CHECK(g[599] < g[399]);
}

TEST_CASE("simulated series combine trend, errors and mask deterministically") {
    McDesign d;
    d.T = 300;
    const auto a = simulate(d, 77);
    const auto b = simulate(d, 77);
    const auto c = simulate(d, 78);
    CHECK(a.masked_values() == b.masked_values());
    CHECK(std::ranges::equal(a.mask(), b.mask()));
    CHECK(a.masked_values() != c.masked_values());
    const auto trend = gen_trend(d);
    const auto y = a.masked_values();
    double resid = 0.0, n = 0.0;
    for (std::size_t t = 0; t < d.T; ++t) {
        CHECK(std::isnan(a.values()[t]) == !a.mask()[t]);
        if (!a.mask()[t]) continue;
        resid += (y[t] - trend[t]) * (y[t] - trend[t]);
        ++n;
    }
    CHECK(resid / n < 1.0);
}

TEST_CASE("panel grids follow the table layout") {
    CHECK(panel_cells(Panel::A).size() == 54);
    CHECK(panel_cells(Panel::B).size() == 18);
    CHECK(panel_cells(Panel::C).size() == 18);
    CHECK(panel_cells(Panel::D).size() == 12);
    for (const auto& c : panel_cells(Panel::B)) CHECK(c.delta == 1.0);
    for (const auto& c : panel_cells(Panel::D)) CHECK((c.T != 285 || c.missing == MissingMode::missing30));
    CHECK(parse_panel("c") == Panel::C);
    CHECK_THROWS_AS(parse_panel("E"), ValidationError);

    // signal variants share their noise streams
    auto cells = panel_cells(Panel::A);
    CHECK(cells[0].stream_id() == cells[1].stream_id());
    CHECK(cells[0].label() != cells[1].label());
    CHECK(cells[0].stream_id() != cells[3].stream_id());
}

TEST_CASE("a single replication gives a frequency of zero or one") {
    RunOptions opt;
    opt.replications = 1;
    opt.replicates = 19;
    opt.seed = 9;
    for (auto panel : {Panel::A, Panel::C, Panel::D}) {
        const auto r = run_cell(panel_cells(panel).front(), opt);
        REQUIRE(r.failed == 0);
        for (const auto& e : r.estimates) CHECK((e.value == 0.0 || e.value == 1.0));
    }
    const auto b = run_cell(panel_cells(Panel::B).front(), opt);
    REQUIRE(b.estimates.size() == 2);
    CHECK((b.estimates[0].value == 0.0 || b.estimates[0].value == 1.0));
    CHECK(b.estimates[1].value >= 0.0);
    CHECK(b.estimates[1].se == 0.0);

    opt.replications = 0;
    CHECK_THROWS_AS(run_cell(panel_cells(Panel::A).front(), opt), ValidationError);
}

TEST_CASE("panel tables do not depend on the thread count") {
    RunOptions opt;
    opt.replications = 6;
    opt.replicates = 19;
    opt.seed = 4;
    auto cells = panel_cells(Panel::A);
    cells.resize(3);
    const auto render = [&] {
        std::ostringstream out;
        write_table_csv(out, run_panel(Panel::A, opt, cells));
        return out.str();
    };
    set_worker_threads(1);
    const auto one = render();
    set_worker_threads(3);
    const auto three = render();
    set_worker_threads(0);
    CHECK(one == three);
    CHECK(one.rfind("panel,T,missing", 0) == 0);
    std::size_t lines = 0;
    for (char ch : one) lines += ch == '\n';
    CHECK(lines == 4);
}
