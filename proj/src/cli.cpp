#include "trendboot/cli.hpp"

#include "trendboot/awb.hpp"
#include "trendboot/breaktrend.hpp"
#include "trendboot/error.hpp"
#include "trendboot/kerneltrend.hpp"
#include "trendboot/mcharness.hpp"
#include "trendboot/plot.hpp"
#include "trendboot/seasonal.hpp"
#include "trendboot/series.hpp"
#include "trendboot/shapetests.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace trendboot::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

struct Global {
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    std::string out;
    std::string config;
};

struct Input {
    std::string path;
    std::string date_col = "date";
    std::string value_col = "value";
};

struct Bootstrap {
    std::size_t B = 999;
    double theta = 0.1;
    std::optional<double> gamma;

    AwbConfig config(std::uint64_t seed) const {
        AwbConfig cfg;
        cfg.replicates = B;
        cfg.theta = theta;
        cfg.gamma = gamma;
        cfg.seed = seed;
        cfg.validate();
        return cfg;
    }
};

struct BreakParams {
    Input input;
    Bootstrap boot;
    int harmonics = kDefaultHarmonics;
    double lambda = 0.1;
    double alpha = 0.05;
    double level = 0.95;
};

struct SmoothParams {
    Input input;
    Bootstrap boot;
    int harmonics = kDefaultHarmonics;
    std::optional<double> bandwidth;
    std::optional<std::size_t> pick_minimum;
    std::string mcv_grid = "0.01:0.25:0.005";
    std::optional<std::size_t> mcv_k;
    double level = 0.95;
    std::string kernel = "epanechnikov";
};

struct ShapeParams {
    std::string fit;
    Bootstrap boot;
    std::string kind = "min";
    std::string interval;
    double level = 0.95;
    double alpha = 0.05;
    std::optional<double> h_u;
    bool raw = false;
};

struct McParams {
    std::string panel = "A";
    std::size_t replications = 1000;
    std::size_t B = 999;
    double scale = 1.0;
    double alpha = 0.05;
    double theta = 0.1;
    std::optional<double> sigma_eta;
    std::optional<std::size_t> T;
    std::string missing;
    std::optional<double> h;
};

// ---------------------------------------------------------------------------
// Small helpers

fs::path output_dir(const Global& g) {
    fs::path dir = g.out;
    if (dir.empty()) {
        if (const char* env = std::getenv("TRENDBOOT_OUT"); env && *env) dir = env;
        else dir = ".";
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ValidationError("cannot create output directory '" + dir.string() + "'");
    return dir;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    return out;
}

void write_json(const fs::path& path, const json& j) {
    auto out = open_output(path);
    out << j.dump(2) << '\n';
}

std::string csv_number(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json number_array(const std::vector<double>& v) {
    json a = json::array();
    for (const double x : v) a.push_back(number_or_null(x));
    return a;
}

json date_point(const ObservedSeries& s, std::size_t i) {
    return {{"index", i + 1}, {"date", format_iso_date(s.date_at(i))}, {"year", s.calendar_time(i)}};
}

// Grid position for a possibly out-of-range signed offset, as a date.
json date_offset(const ObservedSeries& s, long t) {
    const Date d = s.t0() + std::chrono::days(t - 1);
    return {{"index", t}, {"date", format_iso_date(d)}, {"year", s.calendar_time(0) + (t - 1) * s.grid_step()}};
}

json report_header(const std::string& command, const Global& g) {
    return {{"command", command}, {"version", kVersion}, {"seed", g.seed}};
}

json bootstrap_json(const Bootstrap& b, std::size_t length) {
    AwbConfig cfg;
    cfg.theta = b.theta;
    cfg.gamma = b.gamma;
    return {{"B", b.B}, {"theta", b.theta}, {"gamma", cfg.resolve_gamma(length)}, {"gamma_user", b.gamma.has_value()}};
}

json series_json(const ObservedSeries& s) {
    return {{"start", format_iso_date(s.t0())},
            {"end", format_iso_date(s.date_at(s.size() - 1))},
            {"length", s.size()},
            {"observed", s.observed_count()},
            {"grid_step", s.grid_step()}};
}

json seasonal_json(const SeasonalFit& f) {
    return {{"harmonics", f.harmonics}, {"cos", f.cos_coef}, {"sin", f.sin_coef}};
}

IngestResult load(const Input& in) {
    if (in.path.empty()) throw ValidationError("missing --input");
    return ingest_csv(fs::path(in.path), in.date_col, in.value_col);
}

std::vector<double> parse_grid(const std::string& spec) {
    std::vector<double> parts;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ':')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValidationError("bad --mcv-grid '" + spec + "' (expected lo:hi:step)");
        }
    }
    if (parts.size() != 3) throw ValidationError("bad --mcv-grid '" + spec + "' (expected lo:hi:step)");
    return bandwidth_grid(parts[0], parts[1], parts[2]);
}

std::size_t index_of(const ObservedSeries& s, const std::string& text) {
    const long offset = (parse_iso_date(text) - s.t0()).count();
    if (offset < 0 || offset >= static_cast<long>(s.size()))
        throw ValidationError("date " + text + " lies outside the sample");
    return static_cast<std::size_t>(offset);
}

std::optional<IndexInterval> parse_interval(const ObservedSeries& s, const std::string& spec) {
    if (spec.empty()) return std::nullopt;
    const auto colon = spec.find(':');
    const std::string from = spec.substr(0, colon);
    const std::string to = colon == std::string::npos ? std::string() : spec.substr(colon + 1);
    IndexInterval iv;
    iv.first = from.empty() ? 0 : index_of(s, from);
    iv.last = to.empty() ? s.size() - 1 : index_of(s, to);
    if (iv.first > iv.last) throw ValidationError("interval '" + spec + "' is empty");
    return iv;
}

// ---------------------------------------------------------------------------
// Kernel fit artifact shared by smooth and the shape subcommands

json fit_artifact(const ObservedSeries& raw, const ObservedSeries& eps, const KernelTrendFit& fit, int harmonics,
                  const std::string& source) {
    json values = json::array(), raw_values = json::array(), mask = json::array();
    for (std::size_t i = 0; i < eps.size(); ++i) {
        values.push_back(eps.observed(i) ? json(eps.value(i)) : json(nullptr));
        raw_values.push_back(raw.observed(i) ? json(raw.value(i)) : json(nullptr));
        mask.push_back(eps.observed(i) ? 1 : 0);
    }
    return {{"artifact", "kernel_fit"},
            {"version", kVersion},
            {"source", source},
            {"t0", format_iso_date(eps.t0())},
            {"grid_step", eps.grid_step()},
            {"harmonics", harmonics},
            {"bandwidth", fit.bandwidth},
            {"kernel", kernel_name(fit.kernel)},
            {"mask", mask},
            {"eps", values},
            {"raw", raw_values},
            {"g_hat", number_array(fit.g_hat)}};
}

struct LoadedFit {
    ObservedSeries eps;
    ObservedSeries raw;
    KernelTrendFit fit;
    std::string path;
};

LoadedFit load_fit(const std::string& path) {
    if (path.empty()) throw ValidationError("missing --fit");
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open fit artifact '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("fit artifact '" + path + "' is not valid JSON");
    }
    try {
        if (j.at("artifact") != "kernel_fit") throw ValidationError("'" + path + "' is not a kernel fit artifact");
        const auto& mask_j = j.at("mask");
        std::vector<std::uint8_t> mask;
        std::vector<double> eps, raw;
        for (std::size_t i = 0; i < mask_j.size(); ++i) {
            const int m = mask_j[i].get<int>();
            mask.push_back(static_cast<std::uint8_t>(m));
            const auto& e = j.at("eps")[i];
            const auto& r = j.at("raw")[i];
            eps.push_back(e.is_null() ? std::nan("") : e.get<double>());
            raw.push_back(r.is_null() ? std::nan("") : r.get<double>());
        }
        const Date t0 = parse_iso_date(j.at("t0").get<std::string>());
        const double step = j.at("grid_step").get<double>();
        ObservedSeries eps_s(eps, mask, t0, step);
        ObservedSeries raw_s(raw, mask, t0, step);
        auto fit = nw_estimate(eps_s, j.at("bandwidth").get<double>(), parse_kernel(j.at("kernel").get<std::string>()));
        return {std::move(eps_s), std::move(raw_s), std::move(fit), path};
    } catch (const json::exception& e) {
        throw ValidationError("malformed fit artifact '" + path + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_ingest(const Global& g, const Input& in) {
    const auto dir = output_dir(g);
    const auto r = load(in);
    {
        auto out = open_output(dir / "series.csv");
        write_canonical_csv(out, r.series);
    }
    json j = report_header("ingest", g);
    j["input"] = {{"path", in.path}, {"date_column", in.date_col}, {"value_column", in.value_col}};
    j["results"] = series_json(r.series);
    j["results"]["observed_fraction"] = r.summary.observed_fraction;
    write_json(dir / "ingest.json", j);
    std::cout << "ingested " << r.summary.observed << " observed days on a grid of " << r.summary.length << '\n';
    return 0;
}

int cmd_break(const Global& g, const BreakParams& p) {
    const auto dir = output_dir(g);
    const auto s = load(p.input).series;
    const auto cfg = p.boot.config(g.seed);
    const auto trim = make_trimming_set(s, p.lambda, broken_trend_parameters(p.harmonics));

    const auto test = break_test(s, trim, cfg, p.harmonics, p.alpha);
    const auto fit = estimate_break(s, trim, p.harmonics);
    const auto ci = break_ci(s, fit, trim, cfg, p.level);
    const auto slopes = slope_cis(s, fit, cfg, p.level);
    const double step = s.grid_step();

    const auto interval = [&](const ParameterInterval& v) {
        return json{{"estimate", v.estimate}, {"lower", v.lower}, {"upper", v.upper}};
    };
    json j = report_header("break", g);
    j["input"] = {{"path", p.input.path}, {"date_column", p.input.date_col}, {"value_column", p.input.value_col}};
    j["parameters"] = {{"harmonics", p.harmonics},
                       {"lambda", p.lambda},
                       {"alpha", p.alpha},
                       {"level", p.level},
                       {"bootstrap", bootstrap_json(p.boot, s.size())}};
    j["series"] = series_json(s);
    j["results"] = {
        {"test",
         {{"statistic", test.statistic},
          {"critical_value", test.critical_value},
          {"p_value", test.p_value},
          {"reject", test.reject}}},
        {"trimming", {{"first", date_point(s, trim.first - 1)}, {"last", date_point(s, trim.last - 1)}}},
        {"break", date_point(s, fit.break_t - 1)},
        {"break_ci", {{"level", ci.level}, {"lower", date_offset(s, ci.lower_t)}, {"upper", date_offset(s, ci.upper_t)},
                      {"length_days", ci.length()}}},
        {"coefficients_per_step",
         {{"alpha", interval(slopes.alpha)},
          {"beta", interval(slopes.beta)},
          {"delta", interval(slopes.delta)},
          {"beta_plus_delta", interval(slopes.beta_plus_delta)}}},
        {"slopes_per_year",
         {{"beta", interval(SlopeCis::per_year(slopes.beta, step))},
          {"delta", interval(SlopeCis::per_year(slopes.delta, step))},
          {"beta_plus_delta", interval(SlopeCis::per_year(slopes.beta_plus_delta, step))}}},
        {"seasonal", seasonal_json(fit.seasonal)},
        {"ssr", fit.ssr}};
    write_json(dir / "break.json", j);

    std::vector<double> years(s.size()), obs(s.size()), trend(fit.trend), full(s.size());
    {
        auto out = open_output(dir / "break_trend.csv");
        out << "date,year,value,observed,trend,trend_plus_seasonal\n";
        for (std::size_t i = 0; i < s.size(); ++i) {
            years[i] = s.calendar_time(i);
            obs[i] = s.observed(i) ? s.value(i) : std::nan("");
            full[i] = fit.trend[i] + fit.seasonal.fitted[i];
            out << format_iso_date(s.date_at(i)) << ',' << format_double(years[i]) << ',' << csv_number(obs[i]) << ','
                << (s.observed(i) ? 1 : 0) << ',' << format_double(trend[i]) << ',' << format_double(full[i]) << '\n';
        }
    }
    {
        auto out = open_output(dir / "break_trend.svg");
        write_svg_plot(out, "Broken linear trend", "year", years,
                       {Curve{"observed", obs, "#999999", false, true}, Curve{"trend", trend, "#d62728"}});
    }
    std::cout << "F = " << format_double(test.statistic) << ", p = " << format_double(test.p_value) << ", break at "
              << format_iso_date(s.date_at(fit.break_t - 1)) << '\n';
    return 0;
}

int cmd_smooth(const Global& g, const SmoothParams& p) {
    const auto dir = output_dir(g);
    const auto raw = load(p.input).series;
    const Eigen::MatrixXd intercept = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(raw.size()), 1);
    const auto seasonal = fit_seasonal(raw, p.harmonics, intercept);
    const auto eps = deseasonalize(raw, seasonal);
    const auto kernel = parse_kernel(p.kernel);

    const auto grid = parse_grid(p.mcv_grid);
    const std::size_t k = p.mcv_k ? *p.mcv_k : default_mcv_halfwidth(eps.size());
    auto mcv = mcv_scan(eps, grid, k);
    for (const auto& w : mcv.warnings) std::cerr << "warning: " << w << '\n';
    {
        auto out = open_output(dir / "mcv.csv");
        out << "bandwidth,score,local_minimum\n";
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const bool is_min = std::find(mcv.local_minima.begin(), mcv.local_minima.end(), j) != mcv.local_minima.end();
            out << format_double(grid[j]) << ',' << csv_number(mcv.scores[j]) << ',' << (is_min ? 1 : 0) << '\n';
        }
        auto svg = open_output(dir / "mcv.svg");
        write_svg_plot(svg, "MCV criterion (k = " + std::to_string(k) + ")", "bandwidth", grid,
                       {Curve{"CV_k(h)", mcv.scores, "#1f77b4"}});
    }

    if (p.bandwidth) {
        mcv.chosen = *p.bandwidth;
    } else if (p.pick_minimum) {
        if (*p.pick_minimum == 0 || *p.pick_minimum > mcv.local_minima.size())
            throw ValidationError("--pick-minimum " + std::to_string(*p.pick_minimum) + " but the MCV curve has " +
                                  std::to_string(mcv.local_minima.size()) + " interior local minima");
        mcv.chosen = grid[mcv.local_minima[*p.pick_minimum - 1]];
    } else {
        std::ostringstream msg;
        msg << "bandwidth choice required: MCV curve written to " << (dir / "mcv.csv").string() << "; ";
        if (mcv.local_minima.empty()) {
            msg << "the criterion has no interior local minimum";
        } else {
            msg << "interior local minima at h =";
            for (const auto j : mcv.local_minima) msg << ' ' << format_double(grid[j]);
        }
        msg << ". Rerun with --bandwidth or --pick-minimum.";
        throw ValidationError(msg.str());
    }

    const auto fit = nw_estimate(eps, *mcv.chosen, kernel);
    const auto cfg = p.boot.config(g.seed);
    const auto boot = bootstrap_trend(eps, fit, cfg);
    const auto bands = simultaneous_bands(fit, boot, p.level);
    if (bands.under_coverage)
        std::cerr << "warning: even the widest pointwise band covers fewer than " << p.level
                  << " of the bootstrap paths; reporting the widest band\n";

    const std::size_t T = eps.size();
    std::vector<double> years(T), obs(T);
    for (std::size_t i = 0; i < T; ++i) {
        years[i] = eps.calendar_time(i);
        obs[i] = eps.observed(i) ? eps.value(i) : std::nan("");
    }
    {
        auto out = open_output(dir / "trend.csv");
        out << "date,year,eps,observed,g_hat,pointwise_lower,pointwise_upper,lower,upper\n";
        for (std::size_t i = 0; i < T; ++i)
            out << format_iso_date(eps.date_at(i)) << ',' << format_double(years[i]) << ',' << csv_number(obs[i]) << ','
                << (eps.observed(i) ? 1 : 0) << ',' << csv_number(fit.g_hat[i]) << ','
                << csv_number(bands.pointwise_lower[i]) << ',' << csv_number(bands.pointwise_upper[i]) << ','
                << csv_number(bands.lower[i]) << ',' << csv_number(bands.upper[i]) << '\n';
        auto svg = open_output(dir / "trend.svg");
        write_svg_plot(svg, "Nonparametric trend, h = " + format_double(fit.bandwidth), "year", years,
                       {Curve{"deseasonalized", obs, "#bbbbbb", false, true}, Curve{"trend", fit.g_hat, "#d62728"},
                        Curve{"pointwise", bands.pointwise_lower, "#1f77b4", true},
                        Curve{"", bands.pointwise_upper, "#1f77b4", true},
                        Curve{"simultaneous", bands.lower, "#2ca02c"}, Curve{"", bands.upper, "#2ca02c"}});
    }
    write_json(dir / "fit.json", fit_artifact(raw, eps, fit, p.harmonics, p.input.path));

    std::size_t undefined = T - fit.defined_count();
    json minima = json::array();
    for (const auto j : mcv.local_minima) minima.push_back(grid[j]);
    json j = report_header("smooth", g);
    j["input"] = {{"path", p.input.path}, {"date_column", p.input.date_col}, {"value_column", p.input.value_col}};
    j["parameters"] = {{"harmonics", p.harmonics},
                       {"kernel", kernel_name(kernel)},
                       {"mcv_grid", p.mcv_grid},
                       {"mcv_k", k},
                       {"bandwidth_source", p.bandwidth ? "user" : "pick-minimum"},
                       {"level", p.level},
                       {"bootstrap", bootstrap_json(p.boot, T)}};
    j["series"] = series_json(raw);
    j["results"] = {{"seasonal", seasonal_json(seasonal)},
                    {"level_coefficient", seasonal.regressor_coef.empty() ? 0.0 : seasonal.regressor_coef[0]},
                    {"mcv", {{"candidates", grid.size()}, {"local_minima", minima}, {"warnings", mcv.warnings}}},
                    {"bandwidth", fit.bandwidth},
                    {"pilot_bandwidth", boot.pilot_bandwidth},
                    {"undefined_points", undefined},
                    {"alpha_s", bands.alpha_s},
                    {"bootstrap_coverage", bands.bootstrap_coverage},
                    {"under_coverage", bands.under_coverage}};
    write_json(dir / "smooth.json", j);
    std::cout << "h = " << format_double(fit.bandwidth) << ", alpha_s = " << format_double(bands.alpha_s) << '\n';
    return 0;
}

ExtremumKind parse_kind(const std::string& kind) {
    if (kind == "min" || kind == "minimum") return ExtremumKind::minimum;
    if (kind == "max" || kind == "maximum") return ExtremumKind::maximum;
    throw ValidationError("--kind must be min or max");
}

json fit_input_json(const LoadedFit& f) {
    return {{"fit", f.path}, {"bandwidth", f.fit.bandwidth}, {"kernel", kernel_name(f.fit.kernel)}};
}

std::size_t default_anchor(const LoadedFit& f) {
    const auto t = principal_extremum(f.fit.g_hat, f.fit.defined, ExtremumKind::minimum);
    if (!t) throw ValidationError("trend estimate has no interior local minimum; pass --interval");
    return *t;
}

int cmd_extremum(const Global& g, const ShapeParams& p) {
    const auto dir = output_dir(g);
    const auto f = load_fit(p.fit);
    const auto kind = parse_kind(p.kind);
    const auto r = extremum_ci(f.eps, f.fit, p.boot.config(g.seed), kind, p.level);
    json j = report_header("extremum", g);
    j["input"] = fit_input_json(f);
    j["parameters"] = {{"kind", kind == ExtremumKind::minimum ? "min" : "max"},
                       {"level", p.level},
                       {"bootstrap", bootstrap_json(p.boot, f.eps.size())}};
    j["results"] = {{"location", date_point(f.eps, r.location)},
                    {"value", r.value},
                    {"ci", {{"lower", date_point(f.eps, r.lower)}, {"upper", date_point(f.eps, r.upper)}}}};
    write_json(dir / "extremum.json", j);
    std::cout << "extremum at " << format_iso_date(f.eps.date_at(r.location)) << ", CI "
              << format_iso_date(f.eps.date_at(r.lower)) << " to " << format_iso_date(f.eps.date_at(r.upper)) << '\n';
    return 0;
}

int cmd_lintest(const Global& g, const ShapeParams& p) {
    const auto dir = output_dir(g);
    const auto f = load_fit(p.fit);
    const auto iv = parse_interval(f.eps, p.interval);
    if (iv && iv->last != f.eps.size() - 1) throw ValidationError("the linearity test set must end at the sample end");
    const std::size_t t0 = iv ? iv->first : default_anchor(f);
    if (!f.fit.defined[t0]) throw ValidationError("trend estimate is undefined at the anchor date");
    const Anchor anchor{t0, f.fit.g_hat[t0]};
    const auto r = linearity_test(f.eps, f.fit, anchor, p.boot.config(g.seed), p.alpha);

    const std::size_t T = f.eps.size();
    {
        auto out = open_output(dir / "lintest.csv");
        out << "date,year,g_hat,null_line,Q\n";
        for (std::size_t t = t0; t < T; ++t) {
            const double line = anchor.value + r.slope * (static_cast<double>(t) - static_cast<double>(t0));
            const double q = f.fit.defined[t] ? (f.fit.g_hat[t] - line) * (f.fit.g_hat[t] - line) : std::nan("");
            out << format_iso_date(f.eps.date_at(t)) << ',' << format_double(f.eps.calendar_time(t)) << ','
                << csv_number(f.fit.g_hat[t]) << ',' << format_double(line) << ',' << csv_number(q) << '\n';
        }
    }
    json j = report_header("lintest", g);
    j["input"] = fit_input_json(f);
    j["parameters"] = {{"alpha", p.alpha}, {"anchor_source", iv ? "interval" : "global minimum"},
                       {"bootstrap", bootstrap_json(p.boot, T)}};
    j["results"] = {{"test_set", {{"first", date_point(f.eps, r.test_set.first)}, {"last", date_point(f.eps, r.test_set.last)}}},
                    {"anchor_value", anchor.value},
                    {"slope_per_step", r.slope},
                    {"slope_per_year", r.slope / f.eps.grid_step()},
                    {"Q_ave", {{"statistic", r.q_ave}, {"critical_value", r.cv_ave}, {"p_value", r.p_ave}, {"reject", r.reject_ave}}},
                    {"Q_sup", {{"statistic", r.q_sup}, {"critical_value", r.cv_sup}, {"p_value", r.p_sup}, {"reject", r.reject_sup}}}};
    write_json(dir / "lintest.json", j);
    std::cout << "Q_ave p = " << format_double(r.p_ave) << ", Q_sup p = " << format_double(r.p_sup) << '\n';
    return 0;
}

int cmd_monotest(const Global& g, const ShapeParams& p) {
    const auto dir = output_dir(g);
    const auto f = load_fit(p.fit);
    const auto given = parse_interval(f.eps, p.interval);
    const IndexInterval iv = given ? *given : IndexInterval{default_anchor(f), f.eps.size() - 1};
    const auto& series = p.raw ? f.raw : f.eps;
    const auto r = monotonicity_tests(series, iv, f.fit.bandwidth, p.boot.config(g.seed), p.h_u, p.alpha);
    {
        const auto values = series.masked_values();
        const auto u1 = u1_statistics(values, series.mask(), iv, r.h_u);
        const auto u2 = u2_statistics(values, series.mask(), iv, r.h_u);
        auto out = open_output(dir / "monotest.csv");
        out << "date,year,U1,U2\n";
        for (std::size_t t = iv.first; t <= iv.last; ++t)
            out << format_iso_date(series.date_at(t)) << ',' << format_double(series.calendar_time(t)) << ','
                << format_double(u1[t - iv.first]) << ',' << format_double(u2[t - iv.first]) << '\n';
    }
    json j = report_header("monotest", g);
    j["input"] = fit_input_json(f);
    j["parameters"] = {{"alpha", p.alpha},
                       {"values", p.raw ? "raw" : "deseasonalized"},
                       {"h_u_source", p.h_u ? "user" : "0.5 T^(-1/5)"},
                       {"interval_source", given ? "interval" : "global minimum to end"},
                       {"bootstrap", bootstrap_json(p.boot, series.size())}};
    j["results"] = {{"interval", {{"first", date_point(series, iv.first)}, {"last", date_point(series, iv.last)}}},
                    {"h_u", r.h_u},
                    {"U1", {{"statistic", r.u1}, {"critical_value", r.cv1}, {"p_value", r.p1}, {"reject", r.reject1}}},
                    {"U2", {{"statistic", r.u2}, {"critical_value", r.cv2}, {"p_value", r.p2}, {"reject", r.reject2}}}};
    write_json(dir / "monotest.json", j);
    std::cout << "U1 p = " << format_double(r.p1) << ", U2 p = " << format_double(r.p2) << '\n';
    return 0;
}

json design_json(const mc::McDesign& d) {
    json trend;
    if (const auto* lin = std::get_if<mc::LinearTrend>(&d.trend))
        trend = {{"type", "linear"}, {"intercept", lin->intercept}, {"slope", lin->slope}, {"delta", lin->delta},
                 {"break_frac", lin->break_frac}, {"break_index", lin->break_index(d.T)}};
    else {
        const auto& st = std::get<mc::SmoothTransition>(d.trend);
        trend = {{"type", "smooth_transition"}, {"g1", st.g1}, {"g2", st.g2}, {"g3", st.g3},
                 {"lambda", st.lambda}, {"c1", st.c1}, {"c2", st.c2}};
    }
    return {{"T", d.T},
            {"missing", mc::missing_label(d.missing)},
            {"phi", d.phi},
            {"psi", d.psi},
            {"sigma_eta", d.sigma_eta},
            {"hetero", d.hetero},
            {"burn_in", d.burn_in},
            {"trend", trend}};
}

int cmd_mc(const Global& g, const McParams& p) {
    const auto dir = output_dir(g);
    if (!(p.scale > 0.0)) throw ValidationError("--scale must be positive");
    const auto panel = mc::parse_panel(p.panel);
    mc::RunOptions opt;
    opt.replications = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(p.replications * p.scale)));
    opt.replicates = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(p.B * p.scale)));
    opt.seed = g.seed;
    opt.alpha = p.alpha;
    opt.theta = p.theta;
    opt.sigma_eta = p.sigma_eta;

    std::vector<mc::Cell> cells;
    for (const auto& c : mc::panel_cells(panel)) {
        if (p.T && c.T != *p.T) continue;
        if (!p.missing.empty() && mc::missing_label(c.missing) != p.missing && mc::missing_label(c.missing) != p.missing + "%")
            continue;
        if (p.h && std::abs(c.bandwidth - *p.h) > 1e-12) continue;
        cells.push_back(c);
    }
    if (cells.empty()) throw ValidationError("no design cell matches the filters");

    const auto start = std::chrono::steady_clock::now();
    const auto table = mc::run_panel(panel, opt, cells);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::string stem = "mc_panel_" + mc::panel_name(panel);
    {
        auto out = open_output(dir / (stem + ".csv"));
        mc::write_table_csv(out, table);
    }
    json rows = json::array();
    for (const auto& row : table.rows) {
        auto design = mc::cell_design(row.cell);
        if (p.sigma_eta) design.sigma_eta = *p.sigma_eta;
        json est = json::object();
        for (const auto& e : row.estimates) est[e.name] = {{"value", number_or_null(e.value)}, {"se", number_or_null(e.se)}};
        rows.push_back({{"cell", row.cell.label()},
                        {"stream", row.cell.stream_id()},
                        {"bandwidth", row.cell.bandwidth},
                        {"design", design_json(design)},
                        {"replications", row.replications},
                        {"failed", row.failed},
                        {"failure_reasons", row.failure_reasons},
                        {"estimates", est}});
    }
    json j = report_header("mc", g);
    j["parameters"] = {{"panel", mc::panel_name(panel)},
                       {"replications", opt.replications},
                       {"B", opt.replicates},
                       {"scale", p.scale},
                       {"alpha", opt.alpha},
                       {"theta", opt.theta},
                       {"lambda", opt.lambda}};
    j["results"] = rows;
    write_json(dir / (stem + ".json"), j);
    std::cerr << "mc panel " << mc::panel_name(panel) << ": " << cells.size() << " cells in " << seconds << " s\n";
    for (const auto& row : table.rows) {
        std::cout << row.cell.label();
        for (const auto& e : row.estimates) std::cout << ' ' << e.name << '=' << format_double(e.value);
        std::cout << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Config file: flat `key = value` lines; flags given on the command line win.

std::vector<std::string> apply_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    const auto given = [&](const std::string& flag) {
        return std::any_of(args.begin(), args.end(),
                           [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
    };
    const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::vector<std::string> extra;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        const std::string flag = "--" + key;
        if (key.empty() || given(flag)) continue;
        if (value == "true") extra.push_back(flag);
        else if (value != "false") {
            extra.push_back(flag);
            extra.push_back(value);
        }
    }
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
}

void add_input(CLI::App* app, Input& in) {
    app->add_option("--input", in.path, "CSV file with a date column and a value column")->required();
    app->add_option("--date-col", in.date_col, "Name of the date column")->capture_default_str();
    app->add_option("--value-col", in.value_col, "Name of the value column")->capture_default_str();
}

void add_bootstrap(CLI::App* app, Bootstrap& b) {
    app->add_option("--B", b.B, "Bootstrap replicates")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--theta", b.theta, "AWB tuning: gamma = theta^(1/l)")->capture_default_str();
    app->add_option("--gamma", b.gamma, "AWB autoregressive coefficient (overrides --theta)");
}

} // namespace

int run(const std::vector<std::string>& raw_args) {
    Global g;
    Input ingest_in;
    BreakParams bp;
    SmoothParams sp;
    ShapeParams ep, lp, mp;
    McParams mcp;

    CLI::App app{"Bootstrap trend inference for gappy seasonal daily series"};
    app.fallthrough();
    app.require_subcommand(1);
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();
    app.add_option("--out", g.out, "Output directory (default: $TRENDBOOT_OUT or .)");
    app.add_option("--config", g.config, "Flat key = value file; command-line flags take precedence");

    auto* ingest = app.add_subcommand("ingest", "Normalize a CSV onto a daily grid");
    add_input(ingest, ingest_in);

    auto* brk = app.add_subcommand("break", "Broken linear trend: break test, break date and slope intervals");
    add_input(brk, bp.input);
    add_bootstrap(brk, bp.boot);
    brk->add_option("--harmonics,--fourier", bp.harmonics, "Fourier harmonics S")->capture_default_str();
    brk->add_option("--lambda", bp.lambda, "Trimming fraction")->capture_default_str();
    brk->add_option("--alpha", bp.alpha, "Test level")->capture_default_str();
    brk->add_option("--level", bp.level, "Confidence level")->capture_default_str();

    auto* smooth = app.add_subcommand("smooth", "Nonparametric trend with MCV bandwidth curve and bootstrap bands");
    add_input(smooth, sp.input);
    add_bootstrap(smooth, sp.boot);
    smooth->add_option("--harmonics,--fourier", sp.harmonics, "Fourier harmonics S")->capture_default_str();
    smooth->add_option("--bandwidth", sp.bandwidth, "Bandwidth in rescaled time");
    smooth->add_option("--pick-minimum", sp.pick_minimum, "Use the n-th interior local minimum of the MCV curve");
    smooth->add_option("--mcv-grid", sp.mcv_grid, "Candidate bandwidths lo:hi:step")->capture_default_str();
    smooth->add_option("--mcv-k", sp.mcv_k, "MCV leave-out half-width (default ceil(1.75 T^(1/3)))");
    smooth->add_option("--level", sp.level, "Band level")->capture_default_str();
    smooth->add_option("--kernel", sp.kernel, "Kernel")->capture_default_str();

    const auto add_fit = [](CLI::App* a, ShapeParams& p) {
        a->add_option("--fit", p.fit, "Kernel fit artifact written by smooth (fit.json)")->required();
        add_bootstrap(a, p.boot);
    };
    auto* extremum = app.add_subcommand("extremum", "Location of the trend extremum with a bootstrap interval");
    add_fit(extremum, ep);
    extremum->add_option("--kind", ep.kind, "min or max")->capture_default_str();
    extremum->add_option("--level", ep.level, "Confidence level")->capture_default_str();

    auto* lintest = app.add_subcommand("lintest", "Test that the trend is linear from an anchor to the sample end");
    add_fit(lintest, lp);
    lintest->add_option("--interval", lp.interval, "from[:to] dates (default: from the trend minimum)");
    lintest->add_option("--alpha", lp.alpha, "Test level")->capture_default_str();

    auto* monotest = app.add_subcommand("monotest", "Test that the trend is increasing on an interval");
    add_fit(monotest, mp);
    monotest->add_option("--interval", mp.interval, "from:to dates (default: trend minimum to sample end)");
    monotest->add_option("--alpha", mp.alpha, "Test level")->capture_default_str();
    monotest->add_option("--h-u", mp.h_u, "U-statistic bandwidth (default 0.5 T^(-1/5))");
    monotest->add_flag("--raw", mp.raw, "Use the raw rather than the deseasonalized values");

    auto* mcc = app.add_subcommand("mc", "Monte Carlo panels of the simulation study");
    mcc->add_option("--panel", mcp.panel, "A, B, C or D")->capture_default_str();
    mcc->add_option("--replications", mcp.replications, "Monte Carlo replications per cell")->capture_default_str();
    mcc->add_option("--B", mcp.B, "Bootstrap replicates")->capture_default_str();
    mcc->add_option("--scale", mcp.scale, "Multiplies replications and B")->capture_default_str();
    mcc->add_option("--alpha", mcp.alpha, "Nominal level")->capture_default_str();
    mcc->add_option("--theta", mcp.theta, "AWB tuning")->capture_default_str();
    mcc->add_option("--sigma-eta", mcp.sigma_eta, "Override the error scale of every cell");
    mcc->add_option("--T", mcp.T, "Only cells with this sample size");
    mcc->add_option("--missing", mcp.missing, "Only cells with this missing share (30 or 70)");
    mcc->add_option("--bandwidth", mcp.h, "Only cells with this bandwidth");

    try {
        const auto args = apply_config(raw_args);
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        set_worker_threads(g.threads);
        if (ingest->parsed()) return cmd_ingest(g, ingest_in);
        if (brk->parsed()) return cmd_break(g, bp);
        if (smooth->parsed()) return cmd_smooth(g, sp);
        if (extremum->parsed()) return cmd_extremum(g, ep);
        if (lintest->parsed()) return cmd_lintest(g, lp);
        if (monotest->parsed()) return cmd_monotest(g, mp);
        if (mcc->parsed()) return cmd_mc(g, mcp);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run(args);
}

} // namespace trendboot::cli
