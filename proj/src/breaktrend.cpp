#include "trendboot/breaktrend.hpp"

#include "trendboot/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace trendboot {

namespace {

// Relative size below which F_T is indistinguishable from round-off.
constexpr double kStatisticZero = 1e-20;
// A candidate is skipped when its break column is this close to the span
// of the no-break design, relative to its own squared norm.
constexpr long double kCollinearTolerance = 1e-10L;

BrokenTrendFit fit_from_design(const ObservedSeries& s, const Eigen::MatrixXd& design, std::size_t break_t,
                               int harmonics) {
    const auto y = s.masked_values();
    const LeastSquaresFit ls = masked_least_squares(design, y, s.mask());
    const bool has_break = break_t > 0;
    const Eigen::Index trend_cols = has_break ? 3 : 2;

    BrokenTrendFit fit;
    fit.alpha = ls.coef(0);
    fit.beta = ls.coef(1);
    fit.delta = has_break ? ls.coef(2) : 0.0;
    fit.break_t = break_t;
    fit.ssr = ls.ssr;
    fit.trend.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        fit.trend[i] = design.row(static_cast<Eigen::Index>(i)).head(trend_cols).dot(ls.coef.head(trend_cols));
    }
    if (harmonics > 0) {
        fit.seasonal.harmonics = harmonics;
        for (int j = 0; j < harmonics; ++j) {
            fit.seasonal.cos_coef.push_back(ls.coef(trend_cols + 2 * j));
            fit.seasonal.sin_coef.push_back(ls.coef(trend_cols + 2 * j + 1));
        }
        const Eigen::VectorXd seasonal =
            design.rightCols(2 * harmonics) * ls.coef.tail(2 * harmonics);
        fit.seasonal.fitted.assign(seasonal.data(), seasonal.data() + seasonal.size());
    } else {
        fit.seasonal = SeasonalFit::none(s.size());
    }
    return fit;
}

std::vector<double> fitted_values(const BrokenTrendFit& fit) {
    std::vector<double> out(fit.trend.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fit.trend[i] + fit.seasonal.fitted[i];
    return out;
}

// y*_t = M_t (fitted_t + xi_t u_t)
std::vector<double> regenerate(std::span<const double> fitted, std::span<const double> residuals,
                               std::span<const std::uint8_t> mask, const MultiplierPath& path) {
    std::vector<double> y(fitted.size(), 0.0);
    for (std::size_t t = 0; t < y.size(); ++t)
        if (mask[t]) y[t] = fitted[t] + path.xi[t] * residuals[t];
    return y;
}

std::vector<double> residuals_of(const ObservedSeries& s, std::span<const double> fitted) {
    std::vector<double> u(s.size(), 0.0);
    for (std::size_t t = 0; t < s.size(); ++t)
        if (s.observed(t)) u[t] = s.value(t) - fitted[t];
    return u;
}

void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
}

} // namespace

TrimmingSet make_trimming_set(const ObservedSeries& s, double lambda, std::size_t parameters) {
    if (!(lambda > 0.0 && lambda < 0.5)) throw ValidationError("trimming lambda must lie in (0, 0.5)");
    const double T = static_cast<double>(s.size());
    TrimmingSet trim;
    trim.lambda = lambda;
    trim.first = static_cast<std::size_t>(std::max(1.0, std::ceil(lambda * T)));
    trim.last = static_cast<std::size_t>(std::floor((1.0 - lambda) * T));
    if (trim.last >= s.size()) trim.last = s.size() - 1;
    if (trim.first > trim.last) throw ValidationError("trimming set is empty");

    std::size_t before = 0, after = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!s.observed(i)) continue;
        const std::size_t t = i + 1;
        if (t <= trim.first) ++before;
        if (t > trim.last) ++after;
    }
    if (before < parameters + 1 || after < parameters + 1)
        throw ValidationError("trimming set leaves fewer than " + std::to_string(parameters + 1) +
                              " observed points at a sample end (" + std::to_string(before) + " before, " +
                              std::to_string(after) + " after)");
    return trim;
}

Eigen::MatrixXd broken_trend_design(const ObservedSeries& s, std::optional<std::size_t> break_t, int harmonics) {
    const auto n = static_cast<Eigen::Index>(s.size());
    const Eigen::Index trend_cols = break_t ? 3 : 2;
    Eigen::MatrixXd x(n, trend_cols + 2 * harmonics);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = static_cast<double>(i + 1);
        x(i, 0) = 1.0;
        x(i, 1) = t;
        if (break_t) x(i, 2) = std::max(0.0, t - static_cast<double>(*break_t));
    }
    if (harmonics > 0) x.rightCols(2 * harmonics) = fourier_design(s, harmonics);
    return x;
}

BrokenTrendFit fit_no_break(const ObservedSeries& s, int harmonics) {
    return fit_from_design(s, broken_trend_design(s, std::nullopt, harmonics), 0, harmonics);
}

BrokenTrendFit fit_given_break(const ObservedSeries& s, std::size_t break_t, int harmonics) {
    if (break_t < 1 || break_t >= s.size()) throw ValidationError("break date outside the sample");
    return fit_from_design(s, broken_trend_design(s, break_t, harmonics), break_t, harmonics);
}

BreakScanner::BreakScanner(const ObservedSeries& s, const TrimmingSet& trim, int harmonics)
    : trim_(trim), null_solver_(broken_trend_design(s, std::nullopt, harmonics), s.mask()) {
    if (trim.first < 1 || trim.last >= s.size() || trim.first > trim.last)
        throw ValidationError("invalid trimming set");
    q_ = null_solver_.thin_q();
    rows_ = null_solver_.rows();
    const Eigen::Index p = q_.cols();

    denominators_.assign(trim.size(), 0.0L);
    // Exact integer sums of 1, t, t^2 over observed t > c.
    long long s0 = 0, s1 = 0, s2 = 0;
    std::vector<long double> qt(static_cast<std::size_t>(p), 0.0L), q1(static_cast<std::size_t>(p), 0.0L);
    std::ptrdiff_t k = static_cast<std::ptrdiff_t>(rows_.size()) - 1;
    for (std::size_t c = trim.last; c + 1 > trim.first; --c) {
        while (k >= 0 && rows_[static_cast<std::size_t>(k)] + 1 > c) {
            const long long t = static_cast<long long>(rows_[static_cast<std::size_t>(k)] + 1);
            s0 += 1;
            s1 += t;
            s2 += t * t;
            for (Eigen::Index j = 0; j < p; ++j) {
                const long double q = q_(k, j);
                qt[static_cast<std::size_t>(j)] += q * static_cast<long double>(t);
                q1[static_cast<std::size_t>(j)] += q;
            }
            --k;
        }
        const long long cc = static_cast<long long>(c);
        const long long dd = s2 - 2 * cc * s1 + cc * cc * s0;
        long double projected = 0.0L;
        for (std::size_t j = 0; j < static_cast<std::size_t>(p); ++j) {
            const long double qd = qt[j] - static_cast<long double>(cc) * q1[j];
            projected += qd * qd;
        }
        const long double den = static_cast<long double>(dd) - projected;
        if (dd == 0 || den <= kCollinearTolerance * static_cast<long double>(dd)) {
            denominators_[c - trim.first] = 0.0L;
            skipped_.push_back(c);
        } else {
            denominators_[c - trim.first] = den;
        }
    }
    std::reverse(skipped_.begin(), skipped_.end());
    if (skipped_.size() == trim.size())
        throw NumericalError("every candidate break date gives a rank-deficient design");
}

std::vector<long double> BreakScanner::numerators(std::span<const double> y, double& ssr_null) const {
    const auto n = static_cast<Eigen::Index>(rows_.size());
    Eigen::VectorXd yo(n);
    for (Eigen::Index i = 0; i < n; ++i) yo(i) = y[rows_[static_cast<std::size_t>(i)]];
    const Eigen::VectorXd e = yo - q_ * (q_.transpose() * yo);
    ssr_null = e.squaredNorm();

    std::vector<long double> num(trim_.size(), 0.0L);
    long double e0 = 0.0L, e1 = 0.0L;
    std::ptrdiff_t k = static_cast<std::ptrdiff_t>(rows_.size()) - 1;
    for (std::size_t c = trim_.last; c + 1 > trim_.first; --c) {
        while (k >= 0 && rows_[static_cast<std::size_t>(k)] + 1 > c) {
            const long double t = static_cast<long double>(rows_[static_cast<std::size_t>(k)] + 1);
            e0 += e(k);
            e1 += e(k) * t;
            --k;
        }
        num[c - trim_.first] = e1 - static_cast<long double>(c) * e0;
    }
    return num;
}

BreakScanner::Result BreakScanner::scan(std::span<const double> y) const {
    Result r;
    const auto num = numerators(y, r.ssr_null);
    long double best = -1.0L;
    for (std::size_t i = 0; i < num.size(); ++i) {
        if (denominators_[i] <= 0.0L) continue;
        const long double ratio = num[i] * num[i] / denominators_[i];
        if (ratio > best) {
            best = ratio;
            r.break_t = trim_.first + i;
        }
    }
    double scale = 0.0;
    for (std::size_t t : rows_) scale += y[t] * y[t];
    r.statistic = static_cast<double>(best);
    if (r.statistic <= kStatisticZero * scale) r.statistic = 0.0;
    r.ssr_break = std::max(0.0, r.ssr_null - r.statistic);
    return r;
}

std::vector<double> BreakScanner::ssr_profile(std::span<const double> y) const {
    double ssr_null = 0.0;
    const auto num = numerators(y, ssr_null);
    std::vector<double> out(num.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < num.size(); ++i)
        if (denominators_[i] > 0.0L)
            out[i] = ssr_null - static_cast<double>(num[i] * num[i] / denominators_[i]);
    return out;
}

BrokenTrendFit estimate_break(const ObservedSeries& s, const TrimmingSet& trim, int harmonics) {
    const BreakScanner scanner(s, trim, harmonics);
    const auto best = scanner.scan(s.masked_values());
    return fit_given_break(s, best.break_t, harmonics);
}

BreakTestResult break_test(const ObservedSeries& s, const TrimmingSet& trim, const AwbConfig& cfg, int harmonics,
                           double alpha) {
    cfg.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("test level alpha must lie in (0, 1)");
    const BreakScanner scanner(s, trim, harmonics);
    const auto y = s.masked_values();
    const auto observed = scanner.scan(y);

    const auto& solver = scanner.null_solver();
    const Eigen::VectorXd f = solver.fitted(solver.solve(y));
    const std::vector<double> fitted(f.data(), f.data() + f.size());
    const auto residuals = residuals_of(s, fitted);

    BreakTestResult result;
    result.statistic = observed.statistic;
    result.break_t = observed.break_t;
    result.alpha = alpha;
    result.bootstrap_stats = run_replicates<double>(cfg.replicates, [&](std::size_t b) {
        const auto path = draw_multipliers(cfg, s.size(), b);
        return scanner.scan(regenerate(fitted, residuals, s.mask(), path)).statistic;
    });
    std::vector<double> sorted = result.bootstrap_stats;
    std::sort(sorted.begin(), sorted.end());
    result.critical_value = quantile_sorted(sorted, 1.0 - alpha);
    result.p_value = bootstrap_p_value(result.bootstrap_stats, result.statistic);
    result.reject = result.statistic > result.critical_value;
    return result;
}

BreakCi break_ci(const ObservedSeries& s, const BrokenTrendFit& fit, const TrimmingSet& trim, const AwbConfig& cfg,
                 double level) {
    cfg.validate();
    check_level(level);
    if (fit.break_t == 0) throw ValidationError("break_ci needs a fit with an estimated break");
    const int harmonics = fit.seasonal.harmonics;
    const BreakScanner scanner(s, trim, harmonics);
    const auto fitted = fitted_values(fit);
    const auto residuals = residuals_of(s, fitted);

    BreakCi ci;
    ci.level = level;
    ci.bootstrap_breaks = run_replicates<std::size_t>(cfg.replicates, [&](std::size_t b) {
        const auto path = draw_multipliers(cfg, s.size(), b);
        return scanner.scan(regenerate(fitted, residuals, s.mask(), path)).break_t;
    });
    std::vector<double> centered;
    centered.reserve(ci.bootstrap_breaks.size());
    for (std::size_t tb : ci.bootstrap_breaks)
        centered.push_back(static_cast<double>(tb) - static_cast<double>(fit.break_t));
    std::sort(centered.begin(), centered.end());
    const double a = 1.0 - level;
    const auto t1 = static_cast<long>(fit.break_t);
    ci.lower_t = t1 - std::lround(quantile_sorted(centered, 1.0 - a / 2.0));
    ci.upper_t = t1 - std::lround(quantile_sorted(centered, a / 2.0));
    return ci;
}

SlopeCis slope_cis(const ObservedSeries& s, const BrokenTrendFit& fit, const AwbConfig& cfg, double level) {
    cfg.validate();
    check_level(level);
    if (fit.break_t == 0) throw ValidationError("slope_cis needs a fit with an estimated break");
    const MaskedSolver solver(broken_trend_design(s, fit.break_t, fit.seasonal.harmonics), s.mask());
    const auto fitted = fitted_values(fit);
    const auto residuals = residuals_of(s, fitted);

    struct Draw {
        double alpha, beta, delta;
    };
    const auto draws = run_replicates<Draw>(cfg.replicates, [&](std::size_t b) {
        const auto path = draw_multipliers(cfg, s.size(), b);
        const Eigen::VectorXd coef = solver.solve(regenerate(fitted, residuals, s.mask(), path));
        return Draw{coef(0), coef(1), coef(2)};
    });

    const double a = 1.0 - level;
    auto interval = [&](double estimate, auto&& pick) {
        std::vector<double> centered;
        centered.reserve(draws.size());
        for (const auto& d : draws) centered.push_back(pick(d) - estimate);
        std::sort(centered.begin(), centered.end());
        return ParameterInterval{estimate, estimate - quantile_sorted(centered, 1.0 - a / 2.0),
                                 estimate - quantile_sorted(centered, a / 2.0)};
    };
    SlopeCis out;
    out.level = level;
    out.alpha = interval(fit.alpha, [](const Draw& d) { return d.alpha; });
    out.beta = interval(fit.beta, [](const Draw& d) { return d.beta; });
    out.delta = interval(fit.delta, [](const Draw& d) { return d.delta; });
    out.beta_plus_delta = interval(fit.beta + fit.delta, [](const Draw& d) { return d.beta + d.delta; });
    return out;
}

} // namespace trendboot
