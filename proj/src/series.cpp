#include "trendboot/series.hpp"

#include "trendboot/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>

namespace trendboot {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back(trim(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.emplace_back(trim(current));
    return fields;
}

int parse_int(std::string_view s, std::string_view what) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ValidationError("unparseable date '" + std::string(what) + "'");
    return v;
}

std::size_t find_column(const std::vector<std::string>& header, std::string_view name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ValidationError("missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
}

} // namespace

Date parse_iso_date(std::string_view text) {
    text = trim(text);
    if (text.size() > 10 && (text[10] == 'T' || text[10] == ' ')) text = text.substr(0, 10);
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        throw ValidationError("unparseable date '" + std::string(text) + "'");
    const int y = parse_int(text.substr(0, 4), text);
    const int m = parse_int(text.substr(5, 2), text);
    const int d = parse_int(text.substr(8, 2), text);
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw ValidationError("unparseable date '" + std::string(text) + "'");
    return Date{ymd};
}

std::string format_iso_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

double fractional_year(Date d) {
    const std::chrono::year_month_day ymd{d};
    const Date jan1{ymd.year() / 1 / 1};
    return static_cast<double>(static_cast<int>(ymd.year())) +
           static_cast<double>((d - jan1).count()) / kDaysPerYear;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

ObservedSeries::ObservedSeries(std::vector<double> values, std::vector<std::uint8_t> mask, Date t0,
                               double grid_step)
    : values_(std::move(values)), mask_(std::move(mask)), t0_(t0), grid_step_(grid_step) {
    if (values_.size() != mask_.size()) throw ValidationError("values and mask differ in length");
    if (values_.size() < 2) throw ValidationError("series needs at least 2 grid points");
    if (!(grid_step_ > 0.0)) throw ValidationError("grid step must be positive");
    for (std::size_t i = 0; i < mask_.size(); ++i) {
        if (mask_[i] > 1) throw ValidationError("mask entries must be 0 or 1");
        if (mask_[i]) {
            if (!std::isfinite(values_[i])) throw ValidationError("observed values must be finite");
            ++observed_count_;
        } else {
            values_[i] = kMissing;
        }
    }
    if (observed_count_ < 2) throw ValidationError("fewer than 2 observed days");
}

Date ObservedSeries::date_at(std::size_t i) const noexcept {
    return t0_ + std::chrono::days{static_cast<long>(i)};
}

double ObservedSeries::calendar_time(std::size_t i) const noexcept {
    return fractional_year(t0_) + static_cast<double>(i) * grid_step_;
}

double ObservedSeries::rescaled_time(std::size_t i) const noexcept {
    return static_cast<double>(i + 1) / static_cast<double>(size());
}

ObservedSeries ObservedSeries::with_values(std::vector<double> values) const {
    if (values.size() != size()) throw ValidationError("length mismatch");
    return ObservedSeries(std::move(values), mask_, t0_, grid_step_);
}

std::vector<double> ObservedSeries::masked_values() const {
    std::vector<double> out(size(), 0.0);
    for (std::size_t i = 0; i < size(); ++i)
        if (mask_[i]) out[i] = values_[i];
    return out;
}

bool operator==(const ObservedSeries& a, const ObservedSeries& b) {
    if (a.t0_ != b.t0_ || a.grid_step_ != b.grid_step_ || a.mask_ != b.mask_) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.mask_[i] && a.values_[i] != b.values_[i]) return false;
    return true;
}

TimeIndex time_index(const ObservedSeries& s) {
    TimeIndex ti;
    ti.rescaled.resize(s.size());
    ti.calendar.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        ti.rescaled[i] = s.rescaled_time(i);
        ti.calendar[i] = s.calendar_time(i);
    }
    return ti;
}

ObservedSubset observed_subset(const ObservedSeries& s) {
    ObservedSubset out;
    out.indices.reserve(s.observed_count());
    out.values.reserve(s.observed_count());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.observed(i)) {
            out.indices.push_back(i);
            out.values.push_back(s.value(i));
        }
    }
    return out;
}

SeriesSummary summarize(const ObservedSeries& s) {
    return {s.size(), s.observed_count(),
            static_cast<double>(s.observed_count()) / static_cast<double>(s.size())};
}

IngestResult ingest_csv(std::istream& in, std::string_view date_column, std::string_view value_column) {
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) throw ValidationError("empty file");
    const auto header = split_csv_line(line);
    const std::size_t date_idx = find_column(header, date_column);
    const std::size_t value_idx = find_column(header, value_column);
    const auto observed_it = std::find(header.begin(), header.end(), "observed");
    const bool has_observed = observed_it != header.end();
    const std::size_t observed_idx = static_cast<std::size_t>(observed_it - header.begin());

    struct Accumulator {
        double sum = 0.0;
        std::size_t count = 0;
    };
    std::map<Date, Accumulator> days;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        const std::size_t needed = std::max({date_idx, value_idx, has_observed ? observed_idx : 0});
        if (fields.size() <= needed)
            throw ValidationError("line " + std::to_string(line_no) + ": too few fields");
        if (has_observed && fields[observed_idx] == "0") continue;
        const Date d = parse_iso_date(fields[date_idx]);
        const std::string& vtext = fields[value_idx];
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(vtext.data(), vtext.data() + vtext.size(), v);
        if (vtext.empty() || ec != std::errc{} || ptr != vtext.data() + vtext.size() || !std::isfinite(v))
            throw ValidationError("line " + std::to_string(line_no) + ": unparseable value '" + vtext + "'");
        auto& acc = days[d];
        acc.sum += v;
        ++acc.count;
    }
    if (days.empty()) throw ValidationError("empty file");
    if (days.size() < 2) throw ValidationError("fewer than 2 observed days");

    const Date first = days.begin()->first;
    const Date last = days.rbegin()->first;
    const auto length = static_cast<std::size_t>((last - first).count() + 1);
    std::vector<double> values(length, kMissing);
    std::vector<std::uint8_t> mask(length, 0);
    for (const auto& [d, acc] : days) {
        const auto i = static_cast<std::size_t>((d - first).count());
        values[i] = acc.sum / static_cast<double>(acc.count);
        mask[i] = 1;
    }
    ObservedSeries series(std::move(values), std::move(mask), first, kDailyStep);
    const SeriesSummary summary = summarize(series);
    return {std::move(series), summary};
}

IngestResult ingest_csv(const std::filesystem::path& path, std::string_view date_column,
                        std::string_view value_column) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open input file '" + path.string() + "'");
    return ingest_csv(in, date_column, value_column);
}

void write_canonical_csv(std::ostream& out, const ObservedSeries& s) {
    out << "date,value,observed\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out << format_iso_date(s.date_at(i)) << ',';
        if (s.observed(i)) out << format_double(s.value(i));
        out << ',' << (s.observed(i) ? 1 : 0) << '\n';
    }
}

} // namespace trendboot
