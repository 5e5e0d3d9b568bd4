#include "trendboot/seasonal.hpp"

#include "trendboot/error.hpp"
#include "trendboot/linalg.hpp"

#include <cmath>
#include <numbers>

namespace trendboot {

SeasonalFit SeasonalFit::none(std::size_t length) {
    SeasonalFit f;
    f.fitted.assign(length, 0.0);
    return f;
}

Eigen::MatrixXd fourier_design(const ObservedSeries& s, int harmonics) {
    const auto n = static_cast<Eigen::Index>(s.size());
    Eigen::MatrixXd x(n, 2 * harmonics);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double tau = s.calendar_time(static_cast<std::size_t>(i));
        const double phase = tau - std::floor(tau);
        for (int j = 1; j <= harmonics; ++j) {
            const double arg = 2.0 * j * std::numbers::pi * phase;
            x(i, 2 * (j - 1)) = std::cos(arg);
            x(i, 2 * (j - 1) + 1) = std::sin(arg);
        }
    }
    return x;
}

SeasonalFit fit_seasonal(const ObservedSeries& s, int harmonics, const Eigen::MatrixXd& regressors) {
    if (harmonics < 1) throw ValidationError("number of harmonics must be at least 1");
    const Eigen::Index extra = regressors.size() == 0 ? 0 : regressors.cols();
    if (extra > 0 && regressors.rows() != static_cast<Eigen::Index>(s.size()))
        throw ValidationError("regressor rows do not match series length");

    const Eigen::MatrixXd fourier = fourier_design(s, harmonics);
    Eigen::MatrixXd design(fourier.rows(), fourier.cols() + extra);
    design << fourier, (extra > 0 ? regressors : Eigen::MatrixXd(fourier.rows(), 0));

    const auto values = s.masked_values();
    const MaskedSolver solver(design, s.mask());
    const Eigen::VectorXd coef = solver.solve(values);

    SeasonalFit fit;
    fit.harmonics = harmonics;
    for (int j = 0; j < harmonics; ++j) {
        fit.cos_coef.push_back(coef(2 * j));
        fit.sin_coef.push_back(coef(2 * j + 1));
    }
    for (Eigen::Index j = 0; j < extra; ++j) fit.regressor_coef.push_back(coef(fourier.cols() + j));
    const Eigen::VectorXd seasonal = fourier * coef.head(fourier.cols());
    fit.fitted.assign(seasonal.data(), seasonal.data() + seasonal.size());
    return fit;
}

ObservedSeries deseasonalize(const ObservedSeries& s, const SeasonalFit& fit) {
    if (fit.fitted.size() != s.size()) throw ValidationError("seasonal fit length mismatch");
    std::vector<double> out(s.size(), 0.0);
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s.observed(i)) out[i] = s.value(i) - fit.fitted[i];
    return s.with_values(std::move(out));
}

} // namespace trendboot
