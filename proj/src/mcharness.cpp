#include "trendboot/mcharness.hpp"

#include "trendboot/breaktrend.hpp"
#include "trendboot/error.hpp"
#include "trendboot/kerneltrend.hpp"
#include "trendboot/rng.hpp"
#include "trendboot/shapetests.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

namespace trendboot::mc {

namespace {

// Error scale of the break panels. It is not given in the source; this value
// reproduces the reported Panel A power and Panel B interval lengths.
constexpr double kBreakPanelSigma = 20.0;
// Same for the shape-test panels, matched to the T = 285 monotonicity power.
constexpr double kShapePanelSigma = 0.35;

constexpr std::uint64_t kErrorStream = 1;
constexpr std::uint64_t kMaskStream = 2;
constexpr std::uint64_t kMaskTag = 0x6d61736b;
constexpr std::uint64_t kErrorTag = 0x6572726f;
constexpr std::uint64_t kBootstrapTag = 0x61776221;

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

Transition transition_matrix(MissingMode mode) {
    if (mode == MissingMode::missing30) return {0.55, 0.45, 0.2, 0.8};
    return {0.8, 0.2, 0.45, 0.55};
}

std::string missing_label(MissingMode mode) { return mode == MissingMode::missing30 ? "30%" : "70%"; }

double Heteroskedasticity::operator()(double tau) const {
    return sigma0 + (sigma_star - sigma0) * tau + a * std::cos(2.0 * std::numbers::pi * k * tau);
}

std::size_t LinearTrend::break_index(std::size_t T) const {
    return static_cast<std::size_t>(std::llround(break_frac * static_cast<double>(T)));
}

double transition(double tau, double lambda, double c) { return 1.0 / (1.0 + std::exp(-lambda * (tau - c))); }

void McDesign::validate() const {
    if (T < 2) throw ValidationError("T must be at least 2");
    if (!(std::abs(phi) < 1.0)) throw ValidationError("|phi| must be below 1");
    if (!(sigma_eta > 0.0)) throw ValidationError("sigma_eta must be positive");
    if (const auto* lin = std::get_if<LinearTrend>(&trend))
        if (!(lin->break_frac > 0.0 && lin->break_frac < 1.0)) throw ValidationError("break fraction must lie in (0, 1)");
    if (const auto* st = std::get_if<SmoothTransition>(&trend))
        if (!(st->lambda > 0.0)) throw ValidationError("transition smoothness must be positive");
}

std::vector<double> gen_errors(const McDesign& design, std::uint64_t seed) {
    design.validate();
    const CounterStream rng(seed);
    const double phi = design.phi, psi = design.psi;
    const double var = (1.0 - phi * phi) * design.sigma_eta * design.sigma_eta /
                       (2.0 * (1.0 + psi * psi + 2.0 * phi * psi));
    const double sd = std::sqrt(var);
    std::vector<double> u(design.T);
    double eta = 0.0;
    double prev = sd * rng.normal(kErrorStream, 0);
    const std::size_t total = design.burn_in + design.T;
    for (std::size_t i = 0; i < total; ++i) {
        const double e = sd * rng.normal(kErrorStream, i + 1);
        eta = phi * eta + psi * prev + e;
        prev = e;
        if (i >= design.burn_in) {
            const std::size_t t = i - design.burn_in;
            const double tau = static_cast<double>(t + 1) / static_cast<double>(design.T);
            u[t] = (design.hetero ? design.volatility(tau) : 1.0) * eta;
        }
    }
    return u;
}

std::vector<std::uint8_t> gen_mask(MissingMode mode, std::size_t T, std::uint64_t seed) {
    const auto P = transition_matrix(mode);
    const CounterStream rng(seed);
    std::vector<std::uint8_t> mask(T);
    bool state = rng.uniform(kMaskStream, 0) < P.stationary_observed();
    for (std::size_t t = 0; t < T; ++t) {
        if (t > 0) state = rng.uniform(kMaskStream, t) < (state ? P.p11 : P.p01);
        mask[t] = state ? 1 : 0;
    }
    return mask;
}

std::vector<double> gen_trend(const McDesign& design) {
    std::vector<double> g(design.T);
    const double T = static_cast<double>(design.T);
    if (const auto* lin = std::get_if<LinearTrend>(&design.trend)) {
        const double tb = static_cast<double>(lin->break_index(design.T));
        for (std::size_t i = 0; i < design.T; ++i) {
            const double t = static_cast<double>(i + 1);
            g[i] = lin->intercept + lin->slope * t + lin->delta * std::max(0.0, t - tb);
        }
    } else {
        const auto& st = std::get<SmoothTransition>(design.trend);
        for (std::size_t i = 0; i < design.T; ++i) {
            const double tau = static_cast<double>(i + 1) / T;
            g[i] = st.g1 + st.g2 * transition(tau, st.lambda, st.c1) + st.g3 * transition(tau, st.lambda, st.c2);
        }
    }
    return g;
}

ObservedSeries simulate(const McDesign& design, std::uint64_t seed) {
    const auto u = gen_errors(design, derive_seed(seed, {kErrorTag}));
    auto mask = gen_mask(design.missing, design.T, derive_seed(seed, {kMaskTag}));
    auto y = gen_trend(design);
    for (std::size_t t = 0; t < design.T; ++t) y[t] += u[t];
    return ObservedSeries(std::move(y), std::move(mask));
}

Panel parse_panel(const std::string& name) {
    if (name == "A" || name == "a") return Panel::A;
    if (name == "B" || name == "b") return Panel::B;
    if (name == "C" || name == "c") return Panel::C;
    if (name == "D" || name == "d") return Panel::D;
    throw ValidationError("unknown panel '" + name + "' (expected A, B, C or D)");
}

std::string panel_name(Panel panel) {
    switch (panel) {
    case Panel::A: return "A";
    case Panel::B: return "B";
    case Panel::C: return "C";
    case Panel::D: return "D";
    }
    return "?";
}

std::string Cell::stream_id() const {
    std::string id = panel_name(panel) + "/T=" + std::to_string(T) + "/" + missing_label(missing);
    if (panel == Panel::A || panel == Panel::B)
        id += "/phi=" + format_double(phi) + "/psi=" + format_double(psi) + (hetero ? "/hetero" : "/homo");
    else
        id += "/h=" + format_double(bandwidth);
    return id;
}

std::string Cell::label() const {
    std::string s = stream_id();
    if (panel == Panel::A || panel == Panel::B) return s + "/delta=" + format_double(delta);
    return s + (power ? "/power" : "/size");
}

namespace {

struct SampleShape {
    std::size_t T;
    MissingMode missing;
};

constexpr SampleShape kShapes[] = {
    {285, MissingMode::missing30}, {666, MissingMode::missing70}, {666, MissingMode::missing30}};

} // namespace

std::vector<Cell> panel_cells(Panel panel) {
    std::vector<Cell> cells;
    if (panel == Panel::A || panel == Panel::B) {
        const double dependence[3][2] = {{0.0, 0.0}, {0.5, 0.0}, {0.0, 0.5}};
        const std::vector<double> deltas = panel == Panel::A ? std::vector<double>{0.0, 0.05, 0.1}
                                                             : std::vector<double>{1.0};
        for (const auto& d : dependence)
            for (const auto& shape : kShapes)
                for (const bool hetero : {false, true})
                    for (const double delta : deltas) {
                        Cell c;
                        c.panel = panel;
                        c.T = shape.T;
                        c.missing = shape.missing;
                        c.phi = d[0];
                        c.psi = d[1];
                        c.hetero = hetero;
                        c.delta = delta;
                        cells.push_back(c);
                    }
        return cells;
    }
    const std::size_t shapes = panel == Panel::C ? 3 : 2;
    for (const double h : {0.04, 0.06, 0.08})
        for (std::size_t j = 0; j < shapes; ++j)
            for (const bool power : {false, true}) {
                Cell c;
                c.panel = panel;
                c.T = kShapes[j].T;
                c.missing = kShapes[j].missing;
                c.phi = 0.1;
                c.bandwidth = h;
                c.power = power;
                cells.push_back(c);
            }
    return cells;
}

McDesign cell_design(const Cell& cell) {
    McDesign d;
    d.T = cell.T;
    d.missing = cell.missing;
    d.phi = cell.phi;
    d.psi = cell.psi;
    d.hetero = cell.hetero;
    if (cell.panel == Panel::A || cell.panel == Panel::B) {
        d.sigma_eta = kBreakPanelSigma;
        d.trend = LinearTrend{4000.0, -0.5, cell.delta, 0.6};
        return d;
    }
    d.sigma_eta = kShapePanelSigma;
    if (cell.power) {
        d.trend = SmoothTransition{};
    } else {
        // 4000 - 0.5 T: a flat trend, the boundary case of both null hypotheses.
        d.trend = LinearTrend{4000.0 - 0.5 * static_cast<double>(cell.T), 0.0, 0.0, 0.6};
    }
    return d;
}

namespace {

std::vector<double> run_replication(const Cell& cell, const McDesign& design, const RunOptions& opt,
                                    std::uint64_t seed) {
    const auto s = simulate(design, seed);
    AwbConfig cfg;
    cfg.replicates = opt.replicates;
    cfg.theta = opt.theta;
    cfg.gamma = opt.gamma;
    cfg.seed = derive_seed(seed, {kBootstrapTag});

    switch (cell.panel) {
    case Panel::A: {
        const auto trim = make_trimming_set(s, opt.lambda, broken_trend_parameters(0));
        return {break_test(s, trim, cfg, 0, opt.alpha).reject ? 1.0 : 0.0};
    }
    case Panel::B: {
        const auto trim = make_trimming_set(s, opt.lambda, broken_trend_parameters(0));
        const auto fit = estimate_break(s, trim, 0);
        const auto ci = break_ci(s, fit, trim, cfg, 1.0 - opt.alpha);
        const auto truth = static_cast<long>(std::get<LinearTrend>(design.trend).break_index(design.T));
        return {ci.lower_t <= truth && truth <= ci.upper_t ? 1.0 : 0.0, static_cast<double>(ci.length())};
    }
    case Panel::C:
    case Panel::D: {
        const auto fit = nw_estimate(s, cell.bandwidth);
        std::optional<std::size_t> t_min;
        for (std::size_t t = 0; t < s.size(); ++t)
            if (fit.defined[t] && (!t_min || fit.g_hat[t] < fit.g_hat[*t_min])) t_min = t;
        if (!t_min) throw NumericalError("trend estimate undefined everywhere");
        if (cell.panel == Panel::C) {
            const auto r = linearity_test(s, fit, Anchor{*t_min, fit.g_hat[*t_min]}, cfg, opt.alpha);
            return {r.reject_ave ? 1.0 : 0.0, r.reject_sup ? 1.0 : 0.0};
        }
        const auto r = monotonicity_tests(s, IndexInterval{*t_min, s.size() - 1}, cell.bandwidth, cfg,
                                          std::nullopt, opt.alpha);
        return {r.reject1 ? 1.0 : 0.0, r.reject2 ? 1.0 : 0.0};
    }
    }
    return {};
}

std::vector<std::string> estimate_names(Panel panel) {
    switch (panel) {
    case Panel::A: return {"rejection"};
    case Panel::B: return {"coverage", "mean_length"};
    case Panel::C: return {"Q_ave", "Q_sup"};
    case Panel::D: return {"U1", "U2"};
    }
    return {};
}

} // namespace

CellResult run_cell(const Cell& cell, const RunOptions& options) {
    if (options.replications == 0) throw ValidationError("replications must be positive");
    if (options.replicates == 0) throw ValidationError("B must be positive");
    auto design = cell_design(cell);
    if (options.sigma_eta) design.sigma_eta = *options.sigma_eta;
    design.validate();
    const std::uint64_t stream = fnv1a(cell.stream_id());

    std::vector<std::optional<std::vector<double>>> outcomes(options.replications);
    std::vector<std::string> errors(options.replications);
    detail::parallel_for(options.replications, [&](std::size_t r) {
        const std::uint64_t seed = derive_seed(options.seed, {stream, r});
        try {
            outcomes[r] = run_replication(cell, design, options, seed);
        } catch (const ValidationError& e) {
            errors[r] = e.what();
        } catch (const NumericalError& e) {
            errors[r] = e.what();
        }
    });

    CellResult result;
    result.cell = cell;
    result.replications = options.replications;
    const auto names = estimate_names(cell.panel);
    std::vector<double> sum(names.size(), 0.0), sum_sq(names.size(), 0.0);
    std::size_t n = 0;
    for (const auto& o : outcomes) {
        if (!o) {
            ++result.failed;
            const auto& msg = errors[static_cast<std::size_t>(&o - outcomes.data())];
            if (std::find(result.failure_reasons.begin(), result.failure_reasons.end(), msg) ==
                result.failure_reasons.end())
                result.failure_reasons.push_back(msg);
            continue;
        }
        ++n;
        for (std::size_t j = 0; j < names.size(); ++j) {
            sum[j] += (*o)[j];
            sum_sq[j] += (*o)[j] * (*o)[j];
        }
    }
    for (std::size_t j = 0; j < names.size(); ++j) {
        Estimate e;
        e.name = names[j];
        if (n == 0) {
            e.value = e.se = std::numeric_limits<double>::quiet_NaN();
        } else {
            const double nd = static_cast<double>(n);
            e.value = sum[j] / nd;
            if (names[j] == "mean_length") {
                const double var = n > 1 ? (sum_sq[j] - nd * e.value * e.value) / (nd - 1.0) : 0.0;
                e.se = std::sqrt(std::max(0.0, var) / nd);
            } else {
                e.se = std::sqrt(e.value * (1.0 - e.value) / nd);
            }
        }
        result.estimates.push_back(e);
    }
    return result;
}

PanelTable run_panel(Panel panel, const RunOptions& options, const std::vector<Cell>& cells) {
    PanelTable table;
    table.panel = panel;
    table.options = options;
    for (const auto& cell : cells) {
        if (cell.panel != panel) throw ValidationError("cell belongs to another panel");
        table.rows.push_back(run_cell(cell, options));
    }
    return table;
}

PanelTable run_panel(Panel panel, const RunOptions& options) {
    return run_panel(panel, options, panel_cells(panel));
}

void write_table_csv(std::ostream& out, const PanelTable& table) {
    out << "panel,T,missing,phi,psi,volatility,delta,h,trend,estimate,value,se,replications,failed\n";
    for (const auto& row : table.rows) {
        const auto& c = row.cell;
        const bool break_panel = c.panel == Panel::A || c.panel == Panel::B;
        for (const auto& e : row.estimates) {
            out << panel_name(c.panel) << ',' << c.T << ',' << missing_label(c.missing) << ','
                << format_double(c.phi) << ',' << format_double(c.psi) << ','
                << (c.hetero ? "sigma(t/T)" : "1") << ',' << (break_panel ? format_double(c.delta) : "") << ','
                << (break_panel ? "" : format_double(c.bandwidth)) << ','
                << (break_panel ? "linear" : (c.power ? "smooth_transition" : "linear")) << ',' << e.name << ','
                << format_double(e.value) << ',' << format_double(e.se) << ',' << row.replications << ','
                << row.failed << '\n';
        }
    }
}

} // namespace trendboot::mc
