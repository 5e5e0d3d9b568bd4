#pragma once

#include "trendboot/error.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace trendboot {

/// Autoregressive wild bootstrap settings.
struct AwbConfig {
    std::optional<double> gamma; // AR coefficient of the multipliers; tuned from theta when unset
    double theta = 0.1;
    std::size_t replicates = 999; // B
    std::uint64_t seed = 0;

    void validate() const;
    /// gamma if set, otherwise theta^(1/l) with l = 1.75 T^(1/3).
    double resolve_gamma(std::size_t length) const;
};

/// l = 1.75 T^(1/3), the dependence length used for gamma tuning and the
/// default MCV leave-out half-width.
double dependence_length(std::size_t length);

double default_gamma(std::size_t length, double theta);

/// Stationary AR(1) multipliers: xi_1 ~ N(0,1), xi_t = gamma xi_{t-1} + nu_t,
/// nu_t ~ N(0, 1 - gamma^2). Drawn from a counter-based stream keyed by
/// (seed, replicate, t).
struct MultiplierPath {
    std::vector<double> xi;
};

MultiplierPath draw_multipliers(const AwbConfig& cfg, std::size_t length, std::uint64_t replicate);

/// u*_t = M_t xi_t u_t.
std::vector<double> bootstrap_errors(std::span<const double> residuals, std::span<const std::uint8_t> mask,
                                     const MultiplierPath& path);

/// Caps the number of worker threads used by run_replicates (0 = hardware).
void set_worker_threads(std::size_t n);
std::size_t worker_threads();

namespace detail {
/// Runs body(0..count-1), possibly in parallel. Nested calls from inside a
/// worker run serially. The lowest failing index is rethrown as ReplicateError.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);
} // namespace detail

/// Evaluates kernel(b) for b = 0..B-1 and returns the results in replicate
/// order. Output does not depend on the thread schedule as long as the
/// kernel is a pure function of b.
template <class Result, class Kernel>
std::vector<Result> run_replicates(std::size_t replicates, Kernel&& kernel) {
    std::vector<Result> out(replicates);
    detail::parallel_for(replicates, [&](std::size_t b) { out[b] = kernel(b); });
    return out;
}

/// 1-based rank k of the type-1 empirical quantile: the smallest k with k/B >= p.
std::size_t quantile_rank(std::size_t count, double p);

/// inf{u : F_B(u) >= p} for an ascending sample.
double quantile_sorted(std::span<const double> sorted, double p);

/// Sorts a copy and returns the type-1 quantile.
double quantile(std::vector<double> sample, double p);

/// (1 + #{stat* >= stat}) / (B + 1).
double bootstrap_p_value(std::span<const double> bootstrap_stats, double statistic);

} // namespace trendboot
