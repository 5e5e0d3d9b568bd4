#pragma once

#include "trendboot/awb.hpp"
#include "trendboot/linalg.hpp"
#include "trendboot/seasonal.hpp"
#include "trendboot/series.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace trendboot {

/// Continuous broken linear trend d_t = alpha + beta t + delta D_{t,T1},
/// D_{t,T1} = max(0, t - T1), fitted jointly with Fourier seasonality.
/// All time arguments are 1-based grid positions t = 1..T.
struct BrokenTrendFit {
    double alpha = 0.0;
    double beta = 0.0;  // per grid step
    double delta = 0.0; // per grid step
    std::size_t break_t = 0; // 0 for the no-break model
    SeasonalFit seasonal;
    double ssr = 0.0;
    std::vector<double> trend; // alpha + beta t + delta D on the full grid

    double beta_per_year(double grid_step) const { return beta / grid_step; }
    double post_slope_per_year(double grid_step) const { return (beta + delta) / grid_step; }
};

/// Candidate break dates [ceil(lambda T), floor((1 - lambda) T)].
struct TrimmingSet {
    double lambda = 0.1;
    std::size_t first = 0;
    std::size_t last = 0;

    std::size_t size() const { return last - first + 1; }
};

/// Validates 0 < lambda < 1/2, a non-empty range, and at least
/// `parameters + 1` observed points before the first and after the last candidate.
TrimmingSet make_trimming_set(const ObservedSeries& s, double lambda, std::size_t parameters);

/// Number of regression parameters of the one-break model: 3 + 2S.
inline std::size_t broken_trend_parameters(int harmonics) { return 3 + 2 * static_cast<std::size_t>(harmonics); }

/// Columns 1, t, [D_{t,T1}], Fourier(S).
Eigen::MatrixXd broken_trend_design(const ObservedSeries& s, std::optional<std::size_t> break_t, int harmonics);

BrokenTrendFit fit_no_break(const ObservedSeries& s, int harmonics);
BrokenTrendFit fit_given_break(const ObservedSeries& s, std::size_t break_t, int harmonics);

/// Exhaustive break-date scan over a trimming set for a fixed mask.
///
/// By Frisch-Waugh, SSR(T_c) = SSR0 - (d'e)^2 / d'(I - P)d, where e are the
/// no-break residuals and d the masked break column. The denominators depend
/// on the mask only and are computed once; per response the numerators come
/// from suffix sums, so one scan costs O(n p + T).
class BreakScanner {
public:
    BreakScanner(const ObservedSeries& s, const TrimmingSet& trim, int harmonics);

    struct Result {
        std::size_t break_t = 0;
        double ssr_null = 0.0;
        double ssr_break = 0.0;
        double statistic = 0.0; // F_T = SSR0 - min SSR(T_c), snapped to 0 at round-off level
    };

    /// `y` is a full-grid array; entries at missing positions are ignored.
    Result scan(std::span<const double> y) const;

    /// SSR of the one-break model for every candidate; NaN for skipped ones.
    std::vector<double> ssr_profile(std::span<const double> y) const;

    const TrimmingSet& trimming() const { return trim_; }
    /// Candidates whose break column is collinear with the no-break design.
    const std::vector<std::size_t>& skipped() const { return skipped_; }
    const MaskedSolver& null_solver() const { return null_solver_; }

private:
    std::vector<long double> numerators(std::span<const double> y, double& ssr_null) const;

    TrimmingSet trim_;
    MaskedSolver null_solver_;
    Eigen::MatrixXd q_;
    std::vector<std::size_t> rows_; // observed positions, 0-based
    std::vector<long double> denominators_; // per candidate, <= 0 when skipped
    std::vector<std::size_t> skipped_;
};

BrokenTrendFit estimate_break(const ObservedSeries& s, const TrimmingSet& trim, int harmonics);

struct BreakTestResult {
    double statistic = 0.0;
    std::vector<double> bootstrap_stats;
    double critical_value = 0.0;
    double p_value = 1.0;
    double alpha = 0.05;
    bool reject = false;
    std::size_t break_t = 0;
};

/// Sup-F break test with AWB critical values; bootstrap samples are generated
/// from the no-break fit and each replicate repeats the full scan.
BreakTestResult break_test(const ObservedSeries& s, const TrimmingSet& trim, const AwbConfig& cfg, int harmonics,
                           double alpha = 0.05);

struct BreakCi {
    double level = 0.95;
    long lower_t = 0;
    long upper_t = 0;
    std::vector<std::size_t> bootstrap_breaks;

    long length() const { return upper_t - lower_t; }
};

/// Bootstrap interval [T1 - q(1 - a/2), T1 - q(a/2)] from re-estimated break
/// dates of samples regenerated with the break imposed.
BreakCi break_ci(const ObservedSeries& s, const BrokenTrendFit& fit, const TrimmingSet& trim, const AwbConfig& cfg,
                 double level = 0.95);

struct ParameterInterval {
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct SlopeCis {
    double level = 0.95;
    ParameterInterval alpha;
    ParameterInterval beta;            // per grid step
    ParameterInterval delta;           // per grid step
    ParameterInterval beta_plus_delta; // per grid step

    static ParameterInterval per_year(const ParameterInterval& p, double grid_step) {
        return {p.estimate / grid_step, p.lower / grid_step, p.upper / grid_step};
    }
};

/// Same resampling as break_ci, but each replicate re-estimates the
/// coefficients at the fixed original break date.
SlopeCis slope_cis(const ObservedSeries& s, const BrokenTrendFit& fit, const AwbConfig& cfg, double level = 0.95);

} // namespace trendboot
