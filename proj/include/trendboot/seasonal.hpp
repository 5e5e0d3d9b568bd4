#pragma once

#include "trendboot/series.hpp"

#include <Eigen/Dense>

#include <vector>

namespace trendboot {

inline constexpr int kDefaultHarmonics = 3;

/// Deterministic intra-annual pattern
///   s_t = sum_j a_j cos(2 j pi tau_t) + b_j sin(2 j pi tau_t),
/// with tau_t the calendar time in fractional years.
struct SeasonalFit {
    int harmonics = 0;
    std::vector<double> cos_coef;       // a_j
    std::vector<double> sin_coef;       // b_j
    std::vector<double> regressor_coef; // coefficients of jointly fitted extra columns
    std::vector<double> fitted;         // s_t on the full grid

    static SeasonalFit none(std::size_t length);
};

/// Columns cos(2 pi tau), sin(2 pi tau), cos(4 pi tau), ... for every grid point.
Eigen::MatrixXd fourier_design(const ObservedSeries& s, int harmonics);

/// Mask-weighted least squares of y on the Fourier terms, jointly with the
/// optional extra columns (intercept, trend). Only the Fourier part enters
/// `fitted`. Throws SingularDesignError on a rank-deficient design.
SeasonalFit fit_seasonal(const ObservedSeries& s, int harmonics = kDefaultHarmonics,
                         const Eigen::MatrixXd& regressors = Eigen::MatrixXd());

/// y_t - s_t at observed points; mask unchanged.
ObservedSeries deseasonalize(const ObservedSeries& s, const SeasonalFit& fit);

} // namespace trendboot
