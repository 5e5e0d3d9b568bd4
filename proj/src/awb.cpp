#include "trendboot/awb.hpp"

#include "trendboot/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace trendboot {

namespace {

std::atomic<std::size_t> g_worker_threads{0};
thread_local bool t_inside_worker = false;

} // namespace

void AwbConfig::validate() const {
    if (replicates < 1) throw ValidationError("number of bootstrap replicates must be at least 1");
    if (gamma && !(*gamma > 0.0 && *gamma < 1.0)) throw ValidationError("gamma must lie in (0, 1)");
    if (!gamma && !(theta > 0.0 && theta < 1.0)) throw ValidationError("theta must lie in (0, 1)");
}

double AwbConfig::resolve_gamma(std::size_t length) const {
    return gamma ? *gamma : default_gamma(length, theta);
}

double dependence_length(std::size_t length) {
    return 1.75 * std::cbrt(static_cast<double>(length));
}

double default_gamma(std::size_t length, double theta) {
    if (length < 2) throw ValidationError("series length must be at least 2");
    if (!(theta > 0.0 && theta < 1.0)) throw ValidationError("theta must lie in (0, 1)");
    return std::exp(std::log(theta) / dependence_length(length));
}

MultiplierPath draw_multipliers(const AwbConfig& cfg, std::size_t length, std::uint64_t replicate) {
    const double gamma = cfg.resolve_gamma(length);
    const double innovation_sd = std::sqrt(1.0 - gamma * gamma);
    const CounterStream stream(cfg.seed);
    MultiplierPath path;
    path.xi.resize(length);
    if (length == 0) return path;
    path.xi[0] = stream.normal(replicate, 0);
    for (std::size_t t = 1; t < length; ++t)
        path.xi[t] = gamma * path.xi[t - 1] + innovation_sd * stream.normal(replicate, t);
    return path;
}

std::vector<double> bootstrap_errors(std::span<const double> residuals, std::span<const std::uint8_t> mask,
                                     const MultiplierPath& path) {
    if (residuals.size() != mask.size() || residuals.size() != path.xi.size())
        throw ValidationError("bootstrap_errors: length mismatch");
    std::vector<double> out(residuals.size(), 0.0);
    for (std::size_t t = 0; t < out.size(); ++t)
        if (mask[t]) out[t] = path.xi[t] * residuals[t];
    return out;
}

void set_worker_threads(std::size_t n) { g_worker_threads = n; }

std::size_t worker_threads() {
    const std::size_t n = g_worker_threads.load();
    if (n > 0) return n;
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

namespace detail {

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    std::size_t failed = count;
    std::string message;
    std::mutex error_mutex;
    auto record = [&](std::size_t i, const char* what) {
        std::lock_guard lock(error_mutex);
        if (i < failed) {
            failed = i;
            message = what;
        }
    };
    auto guarded = [&](std::size_t i) {
        try {
            body(i);
        } catch (const std::exception& e) {
            record(i, e.what());
        } catch (...) {
            record(i, "unknown error");
        }
    };

    const std::size_t threads = std::min(worker_threads(), count);
    if (threads <= 1 || t_inside_worker) {
        for (std::size_t i = 0; i < count; ++i) guarded(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                t_inside_worker = true;
                for (std::size_t i = next++; i < count; i = next++) guarded(i);
            });
        }
        for (auto& th : pool) th.join();
    }
    if (failed < count) throw ReplicateError(failed, message);
}

} // namespace detail

std::size_t quantile_rank(std::size_t count, double p) {
    if (count == 0) throw ValidationError("quantile of an empty sample");
    const double b = static_cast<double>(count);
    // levels such as 1 - a/2 carry round-off; k/B within 1e-12 of p counts as reaching it
    const double target = p - 1e-12;
    auto k = static_cast<std::size_t>(std::clamp(std::ceil(target * b), 1.0, b));
    while (k > 1 && static_cast<double>(k - 1) / b >= target) --k;
    while (k < count && static_cast<double>(k) / b < target) ++k;
    return k;
}

double quantile_sorted(std::span<const double> sorted, double p) {
    return sorted[quantile_rank(sorted.size(), p) - 1];
}

double quantile(std::vector<double> sample, double p) {
    std::sort(sample.begin(), sample.end());
    return quantile_sorted(sample, p);
}

double bootstrap_p_value(std::span<const double> bootstrap_stats, double statistic) {
    const auto exceed = std::count_if(bootstrap_stats.begin(), bootstrap_stats.end(),
                                      [&](double s) { return s >= statistic; });
    return (1.0 + static_cast<double>(exceed)) / (static_cast<double>(bootstrap_stats.size()) + 1.0);
}

} // namespace trendboot
