#pragma once

#include "trendboot/awb.hpp"
#include "trendboot/series.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace trendboot::mc {

/// Share of missing days produced by the Markov mask chain.
enum class MissingMode { missing30, missing70 };

struct Transition {
    double p00, p01, p10, p11; // P(M_t = j | M_{t-1} = i)

    double stationary_observed() const { return p01 / (p01 + p10); }
};

Transition transition_matrix(MissingMode mode);
std::string missing_label(MissingMode mode);

/// sigma(tau) = sigma0 + (sigma_star - sigma0) tau + a cos(2 pi k tau).
struct Heteroskedasticity {
    double sigma0 = 1.0;
    double sigma_star = 2.0;
    double a = 0.5;
    double k = 4.0;

    double operator()(double tau) const;
};

/// intercept + slope t + delta max(0, t - T1), T1 = round(break_frac T), t = 1..T.
struct LinearTrend {
    double intercept = 4000.0;
    double slope = -0.5;
    double delta = 0.0;
    double break_frac = 0.6;

    std::size_t break_index(std::size_t T) const;
};

/// g(tau) = g1 + g2 G(tau, lambda, c1) + g3 G(tau, lambda, c2).
struct SmoothTransition {
    double g1 = 1.0, g2 = 1.0, g3 = -0.5;
    double lambda = 10.0;
    double c1 = 0.2, c2 = 0.6;
};

/// Logistic transition (1 + exp(-lambda (tau - c)))^-1.
double transition(double tau, double lambda, double c);

using TrendSpec = std::variant<LinearTrend, SmoothTransition>;

struct McDesign {
    std::size_t T = 666;
    MissingMode missing = MissingMode::missing30;
    double phi = 0.0;
    double psi = 0.0;
    double sigma_eta = 1.0;
    bool hetero = false;
    Heteroskedasticity volatility;
    TrendSpec trend = LinearTrend{};
    std::size_t burn_in = 200;

    void validate() const;
};

/// u_t = sigma_t eta_t with ARMA(1,1) eta of unconditional variance sigma_eta^2 / 2.
std::vector<double> gen_errors(const McDesign& design, std::uint64_t seed);

/// Markov chain mask started from its stationary distribution.
std::vector<std::uint8_t> gen_mask(MissingMode mode, std::size_t T, std::uint64_t seed);

std::vector<double> gen_trend(const McDesign& design);

/// Trend + errors on a Markov mask; both streams are derived from `seed`.
ObservedSeries simulate(const McDesign& design, std::uint64_t seed);

enum class Panel { A, B, C, D };

Panel parse_panel(const std::string& name);
std::string panel_name(Panel panel);

/// One column of a Table-4 panel for one row of the design grid.
struct Cell {
    Panel panel = Panel::A;
    std::size_t T = 666;
    MissingMode missing = MissingMode::missing30;
    double phi = 0.0, psi = 0.0;
    bool hetero = false;
    double delta = 0.0;     // panels A and B
    double bandwidth = 0.0; // panels C and D
    bool power = false;     // panels C and D: smooth-transition trend instead of the linear one

    /// Identifies the random streams of the cell. Cells that differ only in
    /// the signal (delta, size vs power) share their errors and masks.
    std::string stream_id() const;
    std::string label() const;
};

/// The full grid of a panel in table order.
std::vector<Cell> panel_cells(Panel panel);

/// Data-generating design of a cell.
McDesign cell_design(const Cell& cell);

struct RunOptions {
    std::size_t replications = 1000;
    std::size_t replicates = 999; // B
    std::uint64_t seed = 0;
    double alpha = 0.05;
    double lambda = 0.1;
    double theta = 0.1;
    std::optional<double> gamma; // overrides the theta-based tuning
    std::optional<double> sigma_eta; // overrides the panel's error scale
};

struct Estimate {
    std::string name;
    double value = 0.0;
    double se = 0.0;
};

struct CellResult {
    Cell cell;
    std::size_t replications = 0;
    std::size_t failed = 0;
    std::vector<std::string> failure_reasons; // distinct messages, in replicate order
    std::vector<Estimate> estimates; // rejection rates, or coverage and mean length
};

/// Runs every replication of one cell. Replicate r uses data seeded by
/// (seed, stream id, r) and bootstrap multipliers keyed by a seed derived from it.
CellResult run_cell(const Cell& cell, const RunOptions& options);

struct PanelTable {
    Panel panel = Panel::A;
    RunOptions options;
    std::vector<CellResult> rows;
};

PanelTable run_panel(Panel panel, const RunOptions& options, const std::vector<Cell>& cells);
PanelTable run_panel(Panel panel, const RunOptions& options);

/// One line per cell and estimate, with Monte Carlo standard errors.
void write_table_csv(std::ostream& out, const PanelTable& table);

} // namespace trendboot::mc
