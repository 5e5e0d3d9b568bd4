#pragma once

#include "trendboot/awb.hpp"
#include "trendboot/kerneltrend.hpp"
#include "trendboot/series.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace trendboot {

enum class ExtremumKind { minimum, maximum };

/// Interior local extrema of g over its defined points, in grid order. Flat
/// stretches count once, at their left end.
std::vector<std::size_t> local_extrema(std::span<const double> g, std::span<const std::uint8_t> defined,
                                       ExtremumKind kind);

/// The local extremum closest to target; ties go to the earlier index.
std::optional<std::size_t> nearest_local_extremum(std::span<const double> g, std::span<const std::uint8_t> defined,
                                                  ExtremumKind kind, std::size_t target);

/// The most extreme interior local extremum of g; ties go to the earlier index.
std::optional<std::size_t> principal_extremum(std::span<const double> g, std::span<const std::uint8_t> defined,
                                              ExtremumKind kind);

struct ExtremumResult {
    ExtremumKind kind = ExtremumKind::minimum;
    std::size_t location = 0; // 0-based grid index
    double value = 0.0;
    double level = 0.95;
    std::size_t lower = 0, upper = 0; // percentile interval of the bootstrap locations
    std::vector<std::size_t> bootstrap_locations;
};

/// Location of the most extreme interior local extremum of g-hat with a
/// bootstrap percentile interval. Each replicate takes the local extremum of
/// g* nearest to the original location, or the global one when g* has none.
ExtremumResult extremum_ci(const ObservedSeries& eps, const KernelTrendFit& fit, const AwbConfig& cfg,
                           ExtremumKind kind = ExtremumKind::minimum, double level = 0.95);

struct IndexInterval {
    std::size_t first = 0, last = 0; // inclusive, 0-based

    std::size_t size() const { return last - first + 1; }
};

/// Point (index, g-hat(index)) through which the null line is forced.
struct Anchor {
    std::size_t index = 0;
    double value = 0.0;
};

/// OLS slope of the line through the anchor, fitted to the observed values
/// on [anchor.index, last].
double pinned_slope(std::span<const double> values, std::span<const std::uint8_t> mask, const Anchor& anchor,
                    std::size_t last);

struct ShapeTestResult {
    double q_ave = 0.0, q_sup = 0.0;
    double cv_ave = 0.0, cv_sup = 0.0;
    double p_ave = 1.0, p_sup = 1.0;
    double alpha = 0.05;
    bool reject_ave = false, reject_sup = false;
    IndexInterval test_set;
    double slope = 0.0; // per grid step
    std::vector<double> bootstrap_ave, bootstrap_sup;
};

/// Q_t = (g-hat(t) - g0(t))^2 on the test set, g0 the pinned line.
/// Returns {Q_ave, Q_sup}; points where g-hat is undefined are skipped.
std::pair<double, double> linearity_statistics(std::span<const double> g_hat, std::span<const std::uint8_t> defined,
                                               const Anchor& anchor, double slope, std::size_t last);

/// Linearity of the trend on [anchor.index, T - 1], with the null line
/// pinned at the anchor. Replicates keep the bandwidth and the anchor index
/// and re-estimate the slope through (t_anchor, g*(t_anchor)).
ShapeTestResult linearity_test(const ObservedSeries& eps, const KernelTrendFit& fit, const Anchor& anchor,
                               const AwbConfig& cfg, double alpha = 0.05);

/// 0.5 T^(-1/5).
double default_u_bandwidth(std::size_t length);

/// U_{1,t} for every t in the interval, summing over observed pairs only.
std::vector<double> u1_statistics(std::span<const double> values, std::span<const std::uint8_t> mask,
                                  const IndexInterval& interval, double h_u);
/// U_{2,t}, the same with raw differences instead of signs.
std::vector<double> u2_statistics(std::span<const double> values, std::span<const std::uint8_t> mask,
                                  const IndexInterval& interval, double h_u);

struct MonotonicityResult {
    double u1 = 0.0, u2 = 0.0;
    double h_u = 0.0;
    double cv1 = 0.0, cv2 = 0.0;
    double p1 = 1.0, p2 = 1.0;
    double alpha = 0.05;
    bool reject1 = false, reject2 = false;
    IndexInterval interval;
    std::vector<double> bootstrap_u1, bootstrap_u2;
};

/// Tests that the trend is increasing on the interval. Bootstrap errors come
/// from residuals around the pilot fit for trend bandwidth h; the bootstrap
/// trend is zero.
MonotonicityResult monotonicity_tests(const ObservedSeries& eps, const IndexInterval& interval,
                                      double trend_bandwidth, const AwbConfig& cfg,
                                      std::optional<double> h_u = std::nullopt, double alpha = 0.05);

} // namespace trendboot
