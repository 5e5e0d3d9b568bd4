#include "trendboot/shapetests.hpp"

#include "trendboot/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace trendboot {

namespace {

bool better(ExtremumKind kind, double a, double b) { return kind == ExtremumKind::minimum ? a < b : a > b; }

void check_interval(const IndexInterval& interval, std::size_t length) {
    if (interval.first > interval.last || interval.last >= length)
        throw ValidationError("interval is empty or lies outside the sample");
}

std::size_t global_extremum(std::span<const double> g, std::span<const std::uint8_t> defined, ExtremumKind kind) {
    std::optional<std::size_t> best;
    for (std::size_t t = 0; t < g.size(); ++t)
        if (defined[t] && (!best || better(kind, g[t], g[*best]))) best = t;
    if (!best) throw NumericalError("trend estimate is undefined everywhere");
    return *best;
}

} // namespace

std::vector<std::size_t> local_extrema(std::span<const double> g, std::span<const std::uint8_t> defined,
                                       ExtremumKind kind) {
    std::vector<std::size_t> points;
    for (std::size_t t = 0; t < g.size(); ++t)
        if (defined[t]) points.push_back(t);
    std::vector<std::size_t> out;
    // a plateau counts once, at its left end, and only if the curve turns back after it
    for (std::size_t j = 1; j + 1 < points.size(); ++j) {
        const double cur = g[points[j]];
        if (!better(kind, cur, g[points[j - 1]])) continue;
        std::size_t k = j + 1;
        while (k + 1 < points.size() && g[points[k]] == cur) ++k;
        if (better(kind, cur, g[points[k]])) out.push_back(points[j]);
    }
    return out;
}

std::optional<std::size_t> nearest_local_extremum(std::span<const double> g, std::span<const std::uint8_t> defined,
                                                  ExtremumKind kind, std::size_t target) {
    std::optional<std::size_t> best;
    std::size_t best_distance = 0;
    for (const std::size_t t : local_extrema(g, defined, kind)) {
        const std::size_t d = t > target ? t - target : target - t;
        if (!best || d < best_distance) {
            best = t;
            best_distance = d;
        }
    }
    return best;
}

std::optional<std::size_t> principal_extremum(std::span<const double> g, std::span<const std::uint8_t> defined,
                                              ExtremumKind kind) {
    std::optional<std::size_t> best;
    for (const std::size_t t : local_extrema(g, defined, kind))
        if (!best || better(kind, g[t], g[*best])) best = t;
    return best;
}

ExtremumResult extremum_ci(const ObservedSeries& eps, const KernelTrendFit& fit, const AwbConfig& cfg,
                           ExtremumKind kind, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
    const auto location = principal_extremum(fit.g_hat, fit.defined, kind);
    if (!location)
        throw ValidationError(kind == ExtremumKind::minimum ? "trend estimate has no interior local minimum"
                                                            : "trend estimate has no interior local maximum");
    ExtremumResult r;
    r.kind = kind;
    r.level = level;
    r.location = *location;
    r.value = fit.g_hat[r.location];

    cfg.validate();
    const KernelSmoother pilot(eps.size(), pilot_bandwidth(fit.bandwidth), fit.kernel);
    const auto g_tilde = pilot.smooth(eps.masked_values(), eps.mask());
    const auto scheme = make_scheme(eps, g_tilde.value, g_tilde.value);
    const KernelSmoother smoother(eps.size(), fit.bandwidth, fit.kernel);
    r.bootstrap_locations = run_replicates<std::size_t>(cfg.replicates, [&](std::size_t b) {
        auto g = smoother.smooth(resample(scheme, eps.mask(), cfg, b), eps.mask());
        if (auto t = nearest_local_extremum(g.value, g.defined, kind, r.location)) return *t;
        return global_extremum(g.value, g.defined, kind);
    });

    std::vector<double> locations(r.bootstrap_locations.begin(), r.bootstrap_locations.end());
    std::sort(locations.begin(), locations.end());
    const double a = 1.0 - level;
    r.lower = static_cast<std::size_t>(quantile_sorted(locations, a / 2.0));
    r.upper = static_cast<std::size_t>(quantile_sorted(locations, 1.0 - a / 2.0));
    return r;
}

double pinned_slope(std::span<const double> values, std::span<const std::uint8_t> mask, const Anchor& anchor,
                    std::size_t last) {
    double num = 0.0, den = 0.0;
    for (std::size_t t = anchor.index; t <= last; ++t) {
        if (!mask[t]) continue;
        const double x = static_cast<double>(t) - static_cast<double>(anchor.index);
        num += x * (values[t] - anchor.value);
        den += x * x;
    }
    if (!(den > 0.0)) throw SingularDesignError("no observed point after the anchor to fit a slope");
    return num / den;
}

std::pair<double, double> linearity_statistics(std::span<const double> g_hat, std::span<const std::uint8_t> defined,
                                               const Anchor& anchor, double slope, std::size_t last) {
    double sum = 0.0, sup = 0.0;
    std::size_t m = 0;
    for (std::size_t t = anchor.index; t <= last; ++t) {
        if (!defined[t]) continue;
        const double line = anchor.value + slope * (static_cast<double>(t) - static_cast<double>(anchor.index));
        const double q = (g_hat[t] - line) * (g_hat[t] - line);
        sum += q;
        sup = std::max(sup, q);
        ++m;
    }
    if (m == 0) throw NumericalError("trend estimate is undefined on the whole test set");
    return {sum / static_cast<double>(m), sup};
}

ShapeTestResult linearity_test(const ObservedSeries& eps, const KernelTrendFit& fit, const Anchor& anchor,
                               const AwbConfig& cfg, double alpha) {
    cfg.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    const std::size_t T = eps.size();
    if (fit.g_hat.size() != T) throw ValidationError("kernel fit length mismatch");
    ShapeTestResult r;
    r.alpha = alpha;
    r.test_set = {anchor.index, T - 1};
    check_interval(r.test_set, T);
    std::size_t observed = 0;
    for (std::size_t t = r.test_set.first; t <= r.test_set.last; ++t) observed += eps.observed(t) ? 1 : 0;
    if (observed < 3) throw ValidationError("test set has fewer than 3 observed points");

    const auto values = eps.values();
    r.slope = pinned_slope(values, eps.mask(), anchor, T - 1);
    std::tie(r.q_ave, r.q_sup) = linearity_statistics(fit.g_hat, fit.defined, anchor, r.slope, T - 1);

    std::vector<double> composite(fit.g_hat);
    for (std::size_t t = anchor.index; t < T; ++t)
        composite[t] = anchor.value + r.slope * (static_cast<double>(t) - static_cast<double>(anchor.index));
    const auto scheme = make_scheme(eps, composite, composite);
    const KernelSmoother smoother(T, fit.bandwidth, fit.kernel);

    const auto stats = run_replicates<std::pair<double, double>>(cfg.replicates, [&](std::size_t b) {
        const auto star = resample(scheme, eps.mask(), cfg, b);
        const auto g = smoother.smooth(star, eps.mask());
        if (!g.defined[anchor.index]) throw NumericalError("bootstrap trend undefined at the anchor");
        const Anchor pin{anchor.index, g.value[anchor.index]};
        const double slope = pinned_slope(star, eps.mask(), pin, T - 1);
        return linearity_statistics(g.value, g.defined, pin, slope, T - 1);
    });
    r.bootstrap_ave.reserve(stats.size());
    r.bootstrap_sup.reserve(stats.size());
    for (const auto& [ave, sup] : stats) {
        r.bootstrap_ave.push_back(ave);
        r.bootstrap_sup.push_back(sup);
    }
    r.cv_ave = quantile(r.bootstrap_ave, 1.0 - alpha);
    r.cv_sup = quantile(r.bootstrap_sup, 1.0 - alpha);
    r.p_ave = bootstrap_p_value(r.bootstrap_ave, r.q_ave);
    r.p_sup = bootstrap_p_value(r.bootstrap_sup, r.q_sup);
    r.reject_ave = r.q_ave > r.cv_ave;
    r.reject_sup = r.q_sup > r.cv_sup;
    return r;
}

double default_u_bandwidth(std::size_t length) {
    if (length < 2) throw ValidationError("series length must be at least 2");
    return 0.5 * std::pow(static_cast<double>(length), -0.2);
}

namespace {

struct UWindow {
    std::size_t radius;
    std::vector<double> weight; // (1/h) K(d / (T h)) for offsets 0..radius
    double scale;               // -2 / (T (T - 1))
};

UWindow make_window(std::size_t T, double h_u) {
    if (!(h_u > 0.0) || !std::isfinite(h_u)) throw ValidationError("U bandwidth must be positive");
    UWindow w;
    const double reach = h_u * static_cast<double>(T);
    w.radius = reach >= static_cast<double>(T - 1) ? T - 1 : static_cast<std::size_t>(std::floor(reach));
    w.weight.resize(w.radius + 1);
    for (std::size_t d = 0; d <= w.radius; ++d) {
        const double x = static_cast<double>(d) / reach;
        w.weight[d] = x < 1.0 ? 0.75 * (1.0 - x * x) / h_u : 0.0;
    }
    const double Td = static_cast<double>(T);
    w.scale = -2.0 / (Td * (Td - 1.0));
    return w;
}

void check_inputs(std::span<const double> values, std::span<const std::uint8_t> mask, const IndexInterval& interval) {
    if (values.size() != mask.size()) throw ValidationError("values and mask differ in length");
    if (values.size() < 2) throw ValidationError("series length must be at least 2");
    check_interval(interval, values.size());
}

// Fenwick tree over value ranks; nodes touched by one window are reset afterwards.
class RankTree {
public:
    explicit RankTree(std::size_t n) : tree_(n + 1, 0.0) {}

    void add(std::size_t rank, double w) {
        for (std::size_t i = rank + 1; i < tree_.size(); i += i & (~i + 1)) {
            if (tree_[i] == 0.0) touched_.push_back(i);
            tree_[i] += w;
        }
    }
    // Sum of weights with rank < r.
    double below(std::size_t rank) const {
        double s = 0.0;
        for (std::size_t i = rank; i > 0; i -= i & (~i + 1)) s += tree_[i];
        return s;
    }
    void clear() {
        for (const std::size_t i : touched_) tree_[i] = 0.0;
        touched_.clear();
    }

private:
    std::vector<double> tree_;
    std::vector<std::size_t> touched_;
};

} // namespace

std::vector<double> u1_statistics(std::span<const double> values, std::span<const std::uint8_t> mask,
                                  const IndexInterval& interval, double h_u) {
    check_inputs(values, mask, interval);
    const std::size_t T = values.size();
    const auto win = make_window(T, h_u);

    std::vector<double> sorted;
    for (std::size_t t = 0; t < T; ++t)
        if (mask[t]) sorted.push_back(values[t]);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<std::size_t> rank(T, 0);
    for (std::size_t t = 0; t < T; ++t)
        if (mask[t])
            rank[t] = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), values[t]) - sorted.begin());

    RankTree tree(sorted.size());
    std::vector<double> out(interval.size(), 0.0);
    for (std::size_t t = interval.first; t <= interval.last; ++t) {
        const std::size_t lo = t > win.radius ? t - win.radius : 0;
        const std::size_t hi = std::min(T - 1, t + win.radius);
        double total = 0.0, sum = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) {
            if (!mask[j]) continue;
            const double w = win.weight[j > t ? j - t : t - j];
            if (w == 0.0) continue;
            const double less = tree.below(rank[j]);
            const double greater = total - tree.below(rank[j] + 1);
            sum += w * (less - greater);
            tree.add(rank[j], w);
            total += w;
        }
        tree.clear();
        out[t - interval.first] = win.scale * sum;
    }
    return out;
}

std::vector<double> u2_statistics(std::span<const double> values, std::span<const std::uint8_t> mask,
                                  const IndexInterval& interval, double h_u) {
    check_inputs(values, mask, interval);
    const std::size_t T = values.size();
    const auto win = make_window(T, h_u);
    std::vector<double> out(interval.size(), 0.0);
    for (std::size_t t = interval.first; t <= interval.last; ++t) {
        const std::size_t lo = t > win.radius ? t - win.radius : 0;
        const std::size_t hi = std::min(T - 1, t + win.radius);
        // sum_{i<j} (y_j - y_i) w_i w_j = sum_j w_j (y_j W_{<j} - (wy)_{<j})
        double w_before = 0.0, wy_before = 0.0, sum = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) {
            if (!mask[j]) continue;
            const double w = win.weight[j > t ? j - t : t - j];
            sum += w * (values[j] * w_before - wy_before);
            w_before += w;
            wy_before += w * values[j];
        }
        out[t - interval.first] = win.scale * sum;
    }
    return out;
}

MonotonicityResult monotonicity_tests(const ObservedSeries& eps, const IndexInterval& interval,
                                      double trend_bandwidth, const AwbConfig& cfg, std::optional<double> h_u,
                                      double alpha) {
    cfg.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    const std::size_t T = eps.size();
    check_interval(interval, T);
    MonotonicityResult r;
    r.alpha = alpha;
    r.interval = interval;
    r.h_u = h_u ? *h_u : default_u_bandwidth(T);

    const auto values = eps.masked_values();
    const auto sup = [](const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); };
    r.u1 = sup(u1_statistics(values, eps.mask(), interval, r.h_u));
    r.u2 = sup(u2_statistics(values, eps.mask(), interval, r.h_u));

    const KernelSmoother pilot(T, pilot_bandwidth(trend_bandwidth));
    const auto g_tilde = pilot.smooth(values, eps.mask());
    const std::vector<double> zero(T, 0.0);
    const auto scheme = make_scheme(eps, g_tilde.value, zero);

    const auto stats = run_replicates<std::pair<double, double>>(cfg.replicates, [&](std::size_t b) {
        const auto star = resample(scheme, eps.mask(), cfg, b);
        return std::pair{sup(u1_statistics(star, eps.mask(), interval, r.h_u)),
                         sup(u2_statistics(star, eps.mask(), interval, r.h_u))};
    });
    for (const auto& [a, b] : stats) {
        r.bootstrap_u1.push_back(a);
        r.bootstrap_u2.push_back(b);
    }
    r.cv1 = quantile(r.bootstrap_u1, 1.0 - alpha);
    r.cv2 = quantile(r.bootstrap_u2, 1.0 - alpha);
    r.p1 = bootstrap_p_value(r.bootstrap_u1, r.u1);
    r.p2 = bootstrap_p_value(r.bootstrap_u2, r.u2);
    r.reject1 = r.u1 > r.cv1;
    r.reject2 = r.u2 > r.cv2;
    return r;
}

} // namespace trendboot
