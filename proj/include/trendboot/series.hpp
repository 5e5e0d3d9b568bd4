#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trendboot {

using Date = std::chrono::sys_days;

inline constexpr double kDaysPerYear = 365.25;
inline constexpr double kDailyStep = 1.0 / kDaysPerYear;

Date parse_iso_date(std::string_view text);
std::string format_iso_date(Date d);

/// year + (day_of_year - 1) / 365.25
double fractional_year(Date d);

/// A daily grid of values with an observed/missing mask.
///
/// Grid position i (0-based) corresponds to t = i + 1 in the model and to the
/// date t0 + i days. Values at missing positions hold a quiet NaN and must
/// never be read; every routine branches on the mask.
class ObservedSeries {
public:
    ObservedSeries(std::vector<double> values, std::vector<std::uint8_t> mask,
                   Date t0 = Date{std::chrono::year{2000} / 1 / 1}, double grid_step = kDailyStep);

    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    std::span<const std::uint8_t> mask() const noexcept { return mask_; }
    bool observed(std::size_t i) const noexcept { return mask_[i] != 0; }
    double value(std::size_t i) const noexcept { return values_[i]; }
    std::size_t observed_count() const noexcept { return observed_count_; }

    Date t0() const noexcept { return t0_; }
    double grid_step() const noexcept { return grid_step_; }

    Date date_at(std::size_t i) const noexcept;
    /// Fractional calendar year of position i: frac(t0) + i * grid_step.
    double calendar_time(std::size_t i) const noexcept;
    /// t / T with t = i + 1.
    double rescaled_time(std::size_t i) const noexcept;

    /// Same grid and mask, new values (entries at missing positions ignored).
    ObservedSeries with_values(std::vector<double> values) const;

    /// Values with missing positions replaced by 0, for arithmetic kernels.
    std::vector<double> masked_values() const;

    friend bool operator==(const ObservedSeries& a, const ObservedSeries& b);

private:
    std::vector<double> values_;
    std::vector<std::uint8_t> mask_;
    Date t0_;
    double grid_step_;
    std::size_t observed_count_ = 0;
};

struct TimeIndex {
    std::vector<double> rescaled;
    std::vector<double> calendar;
};

TimeIndex time_index(const ObservedSeries& s);

struct ObservedSubset {
    std::vector<std::size_t> indices;
    std::vector<double> values;
};

ObservedSubset observed_subset(const ObservedSeries& s);

struct SeriesSummary {
    std::size_t length = 0;
    std::size_t observed = 0;
    double observed_fraction = 0.0;
};

SeriesSummary summarize(const ObservedSeries& s);

struct IngestResult {
    ObservedSeries series;
    SeriesSummary summary;
};

/// Builds the complete daily grid spanning the first to the last date.
/// Duplicate dates are averaged; timestamps are truncated to their date.
/// If the file has an `observed` column, rows with observed == 0 are skipped,
/// which makes the canonical output re-ingestible.
IngestResult ingest_csv(std::istream& in, std::string_view date_column, std::string_view value_column);
IngestResult ingest_csv(const std::filesystem::path& path, std::string_view date_column,
                        std::string_view value_column);

/// Canonical form: `date,value,observed`, one row per grid day, missing values empty.
void write_canonical_csv(std::ostream& out, const ObservedSeries& s);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

} // namespace trendboot
