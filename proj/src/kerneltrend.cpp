#include "trendboot/kerneltrend.hpp"

#include "trendboot/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace trendboot {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_bandwidth(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("bandwidth must be positive");
}

void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
}

} // namespace

double kernel_weight(Kernel kernel, double x) {
    switch (kernel) {
    case Kernel::epanechnikov:
        return std::abs(x) <= 1.0 ? 0.75 * (1.0 - x * x) : 0.0;
    }
    return 0.0;
}

std::string kernel_name(Kernel kernel) {
    switch (kernel) {
    case Kernel::epanechnikov:
        return "epanechnikov";
    }
    return "unknown";
}

Kernel parse_kernel(const std::string& name) {
    if (name == "epanechnikov") return Kernel::epanechnikov;
    throw ValidationError("unknown kernel '" + name + "'");
}

KernelSmoother::KernelSmoother(std::size_t length, double bandwidth, Kernel kernel)
    : length_(length), bandwidth_(bandwidth) {
    check_bandwidth(bandwidth);
    if (length < 2) throw ValidationError("series length must be at least 2");
    const double reach = bandwidth * static_cast<double>(length);
    radius_ = reach >= static_cast<double>(length - 1) ? length - 1 : static_cast<std::size_t>(std::floor(reach));
    table_.resize(radius_ + 1);
    const double T = static_cast<double>(length);
    for (std::size_t d = 0; d <= radius_; ++d)
        table_[d] = kernel_weight(kernel, (static_cast<double>(d) / T) / bandwidth);
}

double KernelSmoother::weight(std::ptrdiff_t offset) const {
    const auto d = static_cast<std::size_t>(offset < 0 ? -offset : offset);
    return d <= radius_ ? table_[d] : 0.0;
}

KernelSmoother::Output KernelSmoother::smooth(std::span<const double> values,
                                              std::span<const std::uint8_t> mask) const {
    if (values.size() != length_ || mask.size() != length_) throw ValidationError("smoother length mismatch");
    Output out;
    out.value.assign(length_, kNaN);
    out.defined.assign(length_, 0);
    out.weight_sum.assign(length_, 0.0);
    for (std::size_t i = 0; i < length_; ++i) {
        const std::size_t lo = i > radius_ ? i - radius_ : 0;
        const std::size_t hi = std::min(length_ - 1, i + radius_);
        double num = 0.0, den = 0.0;
        for (std::size_t s = lo; s <= hi; ++s) {
            if (!mask[s]) continue;
            const double w = table_[s > i ? s - i : i - s];
            num += w * values[s];
            den += w;
        }
        out.weight_sum[i] = den;
        if (den > 0.0) {
            out.value[i] = num / den;
            out.defined[i] = 1;
        }
    }
    return out;
}

void KernelSmoother::smooth_into(std::span<const double> values, std::span<const std::uint8_t> mask,
                                 std::vector<double>& out) const {
    out.assign(length_, kNaN);
    for (std::size_t i = 0; i < length_; ++i) {
        const std::size_t lo = i > radius_ ? i - radius_ : 0;
        const std::size_t hi = std::min(length_ - 1, i + radius_);
        double num = 0.0, den = 0.0;
        for (std::size_t s = lo; s <= hi; ++s) {
            if (!mask[s]) continue;
            const double w = table_[s > i ? s - i : i - s];
            num += w * values[s];
            den += w;
        }
        if (den > 0.0) out[i] = num / den;
    }
}

std::size_t KernelTrendFit::defined_count() const {
    return static_cast<std::size_t>(std::count(defined.begin(), defined.end(), std::uint8_t{1}));
}

KernelTrendFit nw_estimate(const ObservedSeries& eps, double bandwidth, Kernel kernel) {
    const KernelSmoother smoother(eps.size(), bandwidth, kernel);
    auto out = smoother.smooth(eps.masked_values(), eps.mask());
    KernelTrendFit fit;
    fit.g_hat = std::move(out.value);
    fit.defined = std::move(out.defined);
    fit.weight_sum = std::move(out.weight_sum);
    fit.bandwidth = bandwidth;
    fit.kernel = kernel;
    return fit;
}

double pilot_bandwidth(double bandwidth) {
    check_bandwidth(bandwidth);
    return 0.5 * std::pow(bandwidth, 5.0 / 9.0);
}

std::size_t default_mcv_halfwidth(std::size_t length) {
    return static_cast<std::size_t>(std::ceil(dependence_length(length)));
}

std::vector<double> bandwidth_grid(double lo, double hi, double step) {
    if (!(lo > 0.0) || !(hi >= lo) || !(step > 0.0))
        throw ValidationError("bandwidth grid needs 0 < lo <= hi and step > 0");
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> grid(count);
    for (std::size_t j = 0; j < count; ++j) grid[j] = lo + static_cast<double>(j) * step;
    return grid;
}

double mcv_score(const ObservedSeries& eps, double bandwidth, std::size_t k, std::size_t* skipped) {
    const KernelSmoother smoother(eps.size(), bandwidth);
    const std::size_t T = eps.size();
    const std::size_t radius = smoother.radius();
    const auto values = eps.values();
    double total = 0.0;
    std::size_t evaluated = 0, missed = 0;
    for (std::size_t t = 0; t < T; ++t) {
        if (!eps.observed(t)) continue;
        const std::size_t lo = t > radius ? t - radius : 0;
        const std::size_t hi = std::min(T - 1, t + radius);
        double num = 0.0, den = 0.0;
        for (std::size_t s = lo; s <= hi; ++s) {
            const std::size_t d = s > t ? s - t : t - s;
            if (d <= k || !eps.observed(s)) continue;
            const double w = smoother.weight(static_cast<std::ptrdiff_t>(d));
            num += w * values[s];
            den += w;
        }
        if (den > 0.0) {
            const double r = num / den - values[t];
            total += r * r;
            ++evaluated;
        } else {
            ++missed;
        }
    }
    if (skipped) *skipped = missed;
    if (evaluated == 0) return std::numeric_limits<double>::infinity();
    return total / static_cast<double>(T);
}

std::vector<std::size_t> interior_local_minima(std::span<const double> scores) {
    std::vector<std::size_t> minima;
    for (std::size_t j = 1; j + 1 < scores.size(); ++j) {
        if (!std::isfinite(scores[j])) continue;
        if (scores[j] < scores[j - 1] && scores[j] <= scores[j + 1]) minima.push_back(j);
    }
    return minima;
}

McvResult mcv_scan(const ObservedSeries& eps, std::span<const double> grid, std::size_t k) {
    if (grid.empty()) throw ValidationError("bandwidth grid is empty");
    McvResult result;
    result.grid.assign(grid.begin(), grid.end());
    result.k = k;
    result.scores.resize(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        std::size_t skipped = 0;
        result.scores[j] = mcv_score(eps, grid[j], k, &skipped);
        if (skipped > 0) {
            std::ostringstream msg;
            msg << "bandwidth " << grid[j] << ": ";
            if (!std::isfinite(result.scores[j]))
                msg << "every evaluation point has an empty leave-out window";
            else
                msg << skipped << " evaluation points with an empty leave-out window skipped";
            result.warnings.push_back(msg.str());
        }
    }
    result.local_minima = interior_local_minima(result.scores);
    return result;
}

ResamplingScheme make_scheme(const ObservedSeries& eps, std::span<const double> residual_trend,
                             std::span<const double> regeneration_trend) {
    if (residual_trend.size() != eps.size() || regeneration_trend.size() != eps.size())
        throw ValidationError("resampling trend length mismatch");
    ResamplingScheme scheme;
    scheme.residuals.assign(eps.size(), 0.0);
    scheme.regeneration.assign(eps.size(), 0.0);
    for (std::size_t t = 0; t < eps.size(); ++t) {
        if (!eps.observed(t)) continue;
        if (!std::isfinite(residual_trend[t]) || !std::isfinite(regeneration_trend[t]))
            throw NumericalError("resampling trend undefined at an observed point");
        scheme.residuals[t] = eps.value(t) - residual_trend[t];
        scheme.regeneration[t] = regeneration_trend[t];
    }
    return scheme;
}

std::vector<double> resample(const ResamplingScheme& scheme, std::span<const std::uint8_t> mask,
                             const AwbConfig& cfg, std::size_t replicate) {
    const auto path = draw_multipliers(cfg, mask.size(), replicate);
    std::vector<double> out(mask.size(), 0.0);
    for (std::size_t t = 0; t < out.size(); ++t)
        if (mask[t]) out[t] = scheme.regeneration[t] + path.xi[t] * scheme.residuals[t];
    return out;
}

TrendBootstrap bootstrap_trend(const ObservedSeries& eps, const KernelTrendFit& fit, const AwbConfig& cfg) {
    cfg.validate();
    if (fit.g_hat.size() != eps.size()) throw ValidationError("kernel fit length mismatch");
    const std::size_t T = eps.size();
    TrendBootstrap boot;
    boot.pilot_bandwidth = pilot_bandwidth(fit.bandwidth);
    const KernelSmoother pilot_smoother(T, boot.pilot_bandwidth, fit.kernel);
    auto pilot = pilot_smoother.smooth(eps.masked_values(), eps.mask());
    boot.pilot = std::move(pilot.value);
    boot.length = T;
    boot.replicates = cfg.replicates;
    boot.usable.assign(T, 0);
    for (std::size_t t = 0; t < T; ++t) boot.usable[t] = fit.defined[t] && pilot.defined[t];

    const auto scheme = make_scheme(eps, boot.pilot, boot.pilot);
    const KernelSmoother smoother(T, fit.bandwidth, fit.kernel);
    boot.deviations.assign(cfg.replicates * T, kNaN);
    detail::parallel_for(cfg.replicates, [&](std::size_t b) {
        std::vector<double> g;
        smoother.smooth_into(resample(scheme, eps.mask(), cfg, b), eps.mask(), g);
        double* row = boot.deviations.data() + b * T;
        for (std::size_t t = 0; t < T; ++t)
            if (boot.usable[t]) row[t] = g[t] - boot.pilot[t];
    });
    return boot;
}

namespace {

// Per grid point, the bootstrap deviations in ascending order (T x B).
std::vector<double> sorted_columns(const TrendBootstrap& boot) {
    const std::size_t B = boot.replicates, T = boot.length;
    std::vector<double> cols(T * B, kNaN);
    for (std::size_t t = 0; t < T; ++t) {
        if (!boot.usable[t]) continue;
        double* col = cols.data() + t * B;
        for (std::size_t b = 0; b < B; ++b) col[b] = boot.deviation(b, t);
        std::sort(col, col + B);
    }
    return cols;
}

void make_band(const KernelTrendFit& fit, const TrendBootstrap& boot, const std::vector<double>& cols,
                     double alpha_p, std::vector<double>& lower, std::vector<double>& upper) {
    const std::size_t B = boot.replicates, T = boot.length;
    const std::size_t lo_k = quantile_rank(B, alpha_p / 2.0);
    const std::size_t hi_k = quantile_rank(B, 1.0 - alpha_p / 2.0);
    lower.assign(T, kNaN);
    upper.assign(T, kNaN);
    for (std::size_t t = 0; t < T; ++t) {
        if (!boot.usable[t]) continue;
        lower[t] = fit.g_hat[t] - cols[t * B + hi_k - 1];
        upper[t] = fit.g_hat[t] - cols[t * B + lo_k - 1];
    }
}

void check_bootstrap(const KernelTrendFit& fit, const TrendBootstrap& boot) {
    if (boot.length != fit.g_hat.size() || boot.replicates == 0)
        throw ValidationError("bootstrap does not match the kernel fit");
}

} // namespace

BandResult pointwise_bands(const KernelTrendFit& fit, const TrendBootstrap& boot, double level) {
    check_level(level);
    check_bootstrap(fit, boot);
    const auto cols = sorted_columns(boot);
    BandResult r;
    r.level = level;
    r.alpha_s = 1.0 - level;
    make_band(fit, boot, cols, 1.0 - level, r.pointwise_lower, r.pointwise_upper);
    r.lower = r.pointwise_lower;
    r.upper = r.pointwise_upper;
    r.defined = boot.usable;
    return r;
}

BandResult pointwise_bands(const ObservedSeries& eps, const KernelTrendFit& fit, const AwbConfig& cfg,
                           double level) {
    return pointwise_bands(fit, bootstrap_trend(eps, fit, cfg), level);
}

BandResult simultaneous_bands(const KernelTrendFit& fit, const TrendBootstrap& boot, double level) {
    check_level(level);
    check_bootstrap(fit, boot);
    const std::size_t B = boot.replicates, T = boot.length;
    const double alpha = 1.0 - level;
    const auto cols = sorted_columns(boot);

    const auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(alpha * static_cast<double>(B) + 1e-9)));
    double best_gap = std::numeric_limits<double>::infinity();
    double best_alpha = alpha, best_coverage = 0.0, first_coverage = 0.0;
    for (std::size_t j = 1; j <= steps; ++j) {
        const double alpha_p = std::min(static_cast<double>(j) / static_cast<double>(B), alpha);
        const std::size_t lo_k = quantile_rank(B, alpha_p / 2.0);
        const std::size_t hi_k = quantile_rank(B, 1.0 - alpha_p / 2.0);
        std::size_t inside = 0;
        for (std::size_t b = 0; b < B; ++b) {
            bool ok = true;
            for (std::size_t t = 0; t < T && ok; ++t) {
                if (!boot.usable[t]) continue;
                const double d = boot.deviation(b, t);
                ok = d >= cols[t * B + lo_k - 1] && d <= cols[t * B + hi_k - 1];
            }
            inside += ok ? 1 : 0;
        }
        const double coverage = static_cast<double>(inside) / static_cast<double>(B);
        if (j == 1) first_coverage = coverage;
        const double gap = std::abs(coverage - level);
        if (gap < best_gap) {
            best_gap = gap;
            best_alpha = alpha_p;
            best_coverage = coverage;
        }
    }

    BandResult r;
    r.level = level;
    r.alpha_s = best_alpha;
    r.bootstrap_coverage = best_coverage;
    r.under_coverage = first_coverage < level;
    r.defined = boot.usable;
    make_band(fit, boot, cols, alpha, r.pointwise_lower, r.pointwise_upper);
    make_band(fit, boot, cols, best_alpha, r.lower, r.upper);
    return r;
}

} // namespace trendboot
