#pragma once

// Shared fixtures for the test binaries: a small hand-rolled generator and
// brute-force reference implementations written straight from the formulas.

#include "trendboot/series.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace testsupport {

// xorshift64*, independent of the library's Philox streams.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : state_(seed * 0x9E3779B97F4A7C15ull + 0x2545F4914F6CDD1Dull) {
        if (state_ == 0) state_ = 1;
    }

    std::uint64_t next() {
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545F4914F6CDD1Dull;
    }

    double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
    bool coin(double p) { return uniform() < p; }

    double normal() {
        const double u1 = uniform(), u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t state_;
};

inline std::vector<std::uint8_t> random_mask(Gen& g, std::size_t T, double p_observed, std::size_t min_observed = 2) {
    std::vector<std::uint8_t> mask(T);
    std::size_t count = 0;
    do {
        count = 0;
        for (auto& m : mask) {
            m = g.coin(p_observed) ? 1 : 0;
            count += m;
        }
    } while (count < min_observed);
    return mask;
}

inline trendboot::ObservedSeries random_series(Gen& g, std::size_t T, double p_observed, double noise = 1.0) {
    auto mask = random_mask(g, T, p_observed, 3);
    std::vector<double> values(T);
    const double a = g.uniform(-2, 2), b = g.uniform(-0.05, 0.05), c = g.uniform(0, 3), f = g.uniform(0.02, 0.3);
    for (std::size_t i = 0; i < T; ++i) {
        const double t = static_cast<double>(i + 1);
        values[i] = mask[i] ? a + b * t + c * std::sin(f * t) + noise * g.normal() : std::nan("");
    }
    return trendboot::ObservedSeries(values, mask);
}

// Fixed 40-point instance whose reference values were computed offline in
// double precision with a direct implementation of each formula.
inline trendboot::ObservedSeries frozen_instance() {
    const std::size_t T = 40;
    std::vector<double> v(T);
    std::vector<std::uint8_t> m(T);
    for (std::size_t i = 0; i < T; ++i) {
        const double t = double(i + 1);
        m[i] = (i % 6 == 4 || i % 11 == 7) ? 0 : 1;
        v[i] = m[i] ? std::sin(0.37 * t) + 0.02 * t + 0.3 * std::cos(1.3 * t) : std::nan("");
    }
    return trendboot::ObservedSeries(v, m);
}

inline double epanechnikov(double x) { return std::abs(x) <= 1.0 ? 0.75 * (1.0 - x * x) : 0.0; }

// g(t/T) = sum_s K((s - t) / (T h)) M_s y_s / sum_s K M_s, NaN for empty windows.
inline std::vector<double> naive_nw(const trendboot::ObservedSeries& s, double h) {
    const std::size_t T = s.size();
    std::vector<double> g(T);
    for (std::size_t t = 0; t < T; ++t) {
        double num = 0, den = 0;
        for (std::size_t j = 0; j < T; ++j) {
            if (!s.observed(j)) continue;
            const double w = epanechnikov(((double(j) - double(t)) / double(T)) / h);
            num += w * s.value(j);
            den += w;
        }
        g[t] = den > 0 ? num / den : std::numeric_limits<double>::quiet_NaN();
    }
    return g;
}

inline double naive_mcv(const trendboot::ObservedSeries& s, double h, std::size_t k) {
    const std::size_t T = s.size();
    double total = 0;
    bool any = false;
    for (std::size_t t = 0; t < T; ++t) {
        if (!s.observed(t)) continue;
        double num = 0, den = 0;
        for (std::size_t j = 0; j < T; ++j) {
            const std::size_t d = j > t ? j - t : t - j;
            if (d <= k || !s.observed(j)) continue;
            const double w = epanechnikov(((double(j) - double(t)) / double(T)) / h);
            num += w * s.value(j);
            den += w;
        }
        if (den > 0) {
            total += (num / den - s.value(t)) * (num / den - s.value(t));
            any = true;
        }
    }
    return any ? total / double(T) : std::numeric_limits<double>::infinity();
}

// -2/(T(T-1)) sum_{i<j, observed} w_i w_j sign(y_j - y_i) (or y_j - y_i),
// w = (1/h) K((j - t)/(T h)) with an open support.
inline double naive_u(const trendboot::ObservedSeries& s, std::size_t t, double h, bool sign) {
    const std::size_t T = s.size();
    std::vector<double> w(T, 0.0);
    for (std::size_t j = 0; j < T; ++j) {
        const double x = std::abs(double(j) - double(t)) / (double(T) * h);
        if (s.observed(j) && x < 1.0) w[j] = 0.75 * (1 - x * x) / h;
    }
    double sum = 0;
    for (std::size_t i = 0; i < T; ++i)
        for (std::size_t j = i + 1; j < T; ++j) {
            if (w[i] == 0 || w[j] == 0) continue;
            const double d = s.value(j) - s.value(i);
            sum += w[i] * w[j] * (sign ? double((d > 0) - (d < 0)) : d);
        }
    return -2.0 / (double(T) * (double(T) - 1.0)) * sum;
}

// Columns 1, t, [max(0, t - Tc)], Fourier(S) on calendar time.
inline Eigen::MatrixXd naive_design(const trendboot::ObservedSeries& s, std::optional<std::size_t> Tc, int S) {
    const std::size_t T = s.size();
    const int p = 2 + (Tc ? 1 : 0) + 2 * S;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(T), p);
    for (std::size_t i = 0; i < T; ++i) {
        const double t = double(i + 1), tau = s.calendar_time(i);
        int c = 0;
        X(i, c++) = 1.0;
        X(i, c++) = t;
        if (Tc) X(i, c++) = std::max(0.0, t - double(*Tc));
        for (int j = 1; j <= S; ++j) {
            X(i, c++) = std::cos(2.0 * j * M_PI * tau);
            X(i, c++) = std::sin(2.0 * j * M_PI * tau);
        }
    }
    return X;
}

struct NaiveOls {
    Eigen::VectorXd coef;
    double ssr = 0;
    bool full_rank = true;
};

inline NaiveOls naive_ols(const trendboot::ObservedSeries& s, const Eigen::MatrixXd& X) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s.observed(i)) rows.push_back(static_cast<Eigen::Index>(i));
    Eigen::MatrixXd Xo(rows.size(), X.cols());
    Eigen::VectorXd yo(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        Xo.row(r) = X.row(rows[r]);
        yo(r) = s.value(static_cast<std::size_t>(rows[r]));
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xo);
    NaiveOls out;
    out.full_rank = qr.rank() == Xo.cols();
    out.coef = qr.solve(yo);
    out.ssr = (yo - Xo * out.coef).squaredNorm();
    return out;
}

struct NaiveScan {
    double statistic = 0;
    std::size_t break_t = 0;
    std::vector<double> profile;
};

inline NaiveScan naive_break_scan(const trendboot::ObservedSeries& s, std::size_t first, std::size_t last, int S) {
    const double ssr0 = naive_ols(s, naive_design(s, std::nullopt, S)).ssr;
    NaiveScan out;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = first; c <= last; ++c) {
        const auto fit = naive_ols(s, naive_design(s, c, S));
        out.profile.push_back(fit.full_rank ? fit.ssr : std::numeric_limits<double>::quiet_NaN());
        if (fit.full_rank && fit.ssr < best) {
            best = fit.ssr;
            out.break_t = c;
        }
    }
    out.statistic = ssr0 - best;
    return out;
}

inline bool close_rel(double a, double b, double tol) {
    if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
    if (std::isinf(a) || std::isinf(b)) return a == b;
    return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

} // namespace testsupport
