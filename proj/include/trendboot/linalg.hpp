#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace trendboot {

/// Least squares on the observed rows of a fixed design. The QR factorization
/// is computed once, so repeated solves (bootstrap replicates) are cheap.
///
/// Columns are scaled to unit norm before a column-pivoting Householder QR.
/// A pivot counts as zero below eps * max(n, p) relative to the largest one,
/// which on the scaled design is eps * max column norm * dimension.
class MaskedSolver {
public:
    /// `design` has one row per grid point; rows with mask 0 are ignored.
    /// Throws SingularDesignError when the observed rows are rank deficient.
    MaskedSolver(const Eigen::MatrixXd& design, std::span<const std::uint8_t> mask);

    Eigen::VectorXd solve(std::span<const double> y) const;

    /// Fitted values X * coef on the full grid (masked rows included).
    Eigen::VectorXd fitted(const Eigen::VectorXd& coef) const;

    /// Sum of squared residuals over observed rows.
    double ssr(std::span<const double> y, const Eigen::VectorXd& coef) const;

    /// Orthonormal basis of the observed design's column space, one row per
    /// observed point (n x p).
    Eigen::MatrixXd thin_q() const;

    const std::vector<std::size_t>& rows() const { return rows_; }
    Eigen::Index parameters() const { return design_.cols(); }

private:
    Eigen::MatrixXd design_;
    std::vector<std::size_t> rows_;
    Eigen::VectorXd scale_;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

struct LeastSquaresFit {
    Eigen::VectorXd coef;
    std::vector<double> fitted;    // full grid
    std::vector<double> residuals; // M_t (y_t - fitted_t)
    double ssr = 0.0;
};

LeastSquaresFit masked_least_squares(const Eigen::MatrixXd& design, std::span<const double> y,
                                     std::span<const std::uint8_t> mask);

} // namespace trendboot
