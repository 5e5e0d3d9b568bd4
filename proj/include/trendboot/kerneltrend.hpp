#pragma once

#include "trendboot/awb.hpp"
#include "trendboot/series.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace trendboot {

enum class Kernel { epanechnikov };

/// K(x) = 3/4 (1 - x^2) on |x| <= 1.
double kernel_weight(Kernel kernel, double x);
std::string kernel_name(Kernel kernel);
Kernel parse_kernel(const std::string& name);

/// Local-constant (Nadaraya-Watson) smoother on the rescaled grid tau = t/T.
/// Kernel weights depend only on the offset s - t, so they are tabulated once.
class KernelSmoother {
public:
    KernelSmoother(std::size_t length, double bandwidth, Kernel kernel = Kernel::epanechnikov);

    struct Output {
        std::vector<double> value; // NaN where undefined
        std::vector<std::uint8_t> defined;
        std::vector<double> weight_sum;
    };

    /// g(tau_i) = sum_s K_s M_s y_s / sum_s K_s M_s for every grid point i.
    Output smooth(std::span<const double> values, std::span<const std::uint8_t> mask) const;

    /// Values only; undefined points are left as NaN.
    void smooth_into(std::span<const double> values, std::span<const std::uint8_t> mask,
                     std::vector<double>& out) const;

    double weight(std::ptrdiff_t offset) const;
    std::size_t radius() const { return radius_; }
    double bandwidth() const { return bandwidth_; }

private:
    std::size_t length_;
    double bandwidth_;
    std::size_t radius_;
    std::vector<double> table_; // weights for offsets 0..radius
};

struct KernelTrendFit {
    std::vector<double> g_hat;
    std::vector<std::uint8_t> defined;
    std::vector<double> weight_sum;
    double bandwidth = 0.0;
    Kernel kernel = Kernel::epanechnikov;

    std::size_t defined_count() const;
};

KernelTrendFit nw_estimate(const ObservedSeries& eps, double bandwidth, Kernel kernel = Kernel::epanechnikov);

/// Oversmoothed pilot bandwidth 0.5 h^(5/9).
double pilot_bandwidth(double bandwidth);

// Modified cross-validation

/// ceil(1.75 T^(1/3)).
std::size_t default_mcv_halfwidth(std::size_t length);

/// lo, lo + step, ... up to hi inclusive.
std::vector<double> bandwidth_grid(double lo, double hi, double step);

struct McvResult {
    std::vector<double> grid;
    std::vector<double> scores; // +inf where no point could be evaluated
    std::size_t k = 0;
    std::vector<std::size_t> local_minima; // interior local minima, indices into grid
    std::vector<std::string> warnings;
    std::optional<double> chosen;

    bool has_interior_minimum() const { return !local_minima.empty(); }
};

/// CV_k(h) = T^-1 sum_t M_t (g_{k,h}(t/T) - eps_t)^2, where g_{k,h} leaves out
/// every s with |s - t| <= k. Evaluation points with an empty leave-out window
/// are skipped.
double mcv_score(const ObservedSeries& eps, double bandwidth, std::size_t k, std::size_t* skipped = nullptr);

McvResult mcv_scan(const ObservedSeries& eps, std::span<const double> grid, std::size_t k);

/// Indices of interior local minima of a sequence (left edge of flat bottoms).
std::vector<std::size_t> interior_local_minima(std::span<const double> scores);

// Bootstrap bands

/// Residual trend r and regeneration trend m of one AWB resampling scheme:
/// u_t = M_t (eps_t - r_t), eps*_t = M_t (m_t + xi_t u_t).
struct ResamplingScheme {
    std::vector<double> residuals;
    std::vector<double> regeneration;
};

ResamplingScheme make_scheme(const ObservedSeries& eps, std::span<const double> residual_trend,
                             std::span<const double> regeneration_trend);

/// One bootstrap series eps* for replicate b (zero at missing points).
std::vector<double> resample(const ResamplingScheme& scheme, std::span<const std::uint8_t> mask,
                             const AwbConfig& cfg, std::size_t replicate);

/// Bootstrap deviations g*(tau) - g~(tau) for every replicate and grid point,
/// with g~ the pilot fit at bandwidth 0.5 h^(5/9).
struct TrendBootstrap {
    std::vector<double> pilot;
    double pilot_bandwidth = 0.0;
    std::size_t replicates = 0;
    std::size_t length = 0;
    std::vector<double> deviations;    // replicate-major, B x T
    std::vector<std::uint8_t> usable;  // both g-hat and the pilot defined

    double deviation(std::size_t b, std::size_t t) const { return deviations[b * length + t]; }
};

TrendBootstrap bootstrap_trend(const ObservedSeries& eps, const KernelTrendFit& fit, const AwbConfig& cfg);

struct BandResult {
    double level = 0.95;
    double alpha_s = 0.05;
    std::vector<double> lower, upper;                     // simultaneous
    std::vector<double> pointwise_lower, pointwise_upper; // NaN where not usable
    std::vector<std::uint8_t> defined;
    double bootstrap_coverage = 0.0; // fraction of paths inside the simultaneous band
    bool under_coverage = false;     // even alpha_p = 1/B covers less than the level
};

/// Pointwise intervals [g(tau) - q(1 - a/2), g(tau) - q(a/2)]. The
/// simultaneous fields are copies of the pointwise ones.
BandResult pointwise_bands(const KernelTrendFit& fit, const TrendBootstrap& boot, double level = 0.95);
BandResult pointwise_bands(const ObservedSeries& eps, const KernelTrendFit& fit, const AwbConfig& cfg,
                           double level = 0.95);

/// Calibrates the pointwise level alpha_s in [1/B, alpha] so that the share
/// of bootstrap paths lying inside the band at every usable point is closest
/// to 1 - alpha. Ties go to the smaller alpha_p (wider band).
BandResult simultaneous_bands(const KernelTrendFit& fit, const TrendBootstrap& boot, double level = 0.95);

} // namespace trendboot
