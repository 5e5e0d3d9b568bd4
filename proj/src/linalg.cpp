#include "trendboot/linalg.hpp"

#include "trendboot/error.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace trendboot {

MaskedSolver::MaskedSolver(const Eigen::MatrixXd& design, std::span<const std::uint8_t> mask)
    : design_(design) {
    if (static_cast<std::size_t>(design.rows()) != mask.size())
        throw ValidationError("design rows do not match series length");
    for (std::size_t t = 0; t < mask.size(); ++t)
        if (mask[t]) rows_.push_back(t);

    const Eigen::Index n = static_cast<Eigen::Index>(rows_.size());
    const Eigen::Index p = design.cols();
    if (n <= p)
        throw SingularDesignError("least squares needs more observed points (" + std::to_string(n) +
                                  ") than parameters (" + std::to_string(p) + ")");

    Eigen::MatrixXd x(n, p);
    for (Eigen::Index i = 0; i < n; ++i) x.row(i) = design.row(static_cast<Eigen::Index>(rows_[i]));
    scale_ = x.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < p; ++j) {
        if (scale_(j) == 0.0)
            throw SingularDesignError("design column " + std::to_string(j) +
                                      " is zero on all observed points");
        x.col(j) /= scale_(j);
    }
    qr_.setThreshold(std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(n, p)));
    qr_.compute(x);
    if (qr_.rank() < p)
        throw SingularDesignError("design is rank deficient on the observed points (rank " +
                                  std::to_string(qr_.rank()) + " < " + std::to_string(p) + ")");
}

Eigen::VectorXd MaskedSolver::solve(std::span<const double> y) const {
    Eigen::VectorXd yo(static_cast<Eigen::Index>(rows_.size()));
    for (std::size_t i = 0; i < rows_.size(); ++i) yo(static_cast<Eigen::Index>(i)) = y[rows_[i]];
    Eigen::VectorXd coef = qr_.solve(yo);
    return coef.cwiseQuotient(scale_);
}

Eigen::VectorXd MaskedSolver::fitted(const Eigen::VectorXd& coef) const { return design_ * coef; }

double MaskedSolver::ssr(std::span<const double> y, const Eigen::VectorXd& coef) const {
    double sum = 0.0;
    for (std::size_t t : rows_) {
        const double r = y[t] - design_.row(static_cast<Eigen::Index>(t)).dot(coef);
        sum += r * r;
    }
    return sum;
}

Eigen::MatrixXd MaskedSolver::thin_q() const {
    const Eigen::Index n = static_cast<Eigen::Index>(rows_.size());
    Eigen::MatrixXd q = Eigen::MatrixXd::Identity(n, design_.cols());
    return qr_.householderQ() * q;
}

LeastSquaresFit masked_least_squares(const Eigen::MatrixXd& design, std::span<const double> y,
                                     std::span<const std::uint8_t> mask) {
    const MaskedSolver solver(design, mask);
    LeastSquaresFit fit;
    fit.coef = solver.solve(y);
    const Eigen::VectorXd f = solver.fitted(fit.coef);
    fit.fitted.assign(f.data(), f.data() + f.size());
    fit.residuals.assign(y.size(), 0.0);
    for (std::size_t t : solver.rows()) {
        fit.residuals[t] = y[t] - fit.fitted[t];
        fit.ssr += fit.residuals[t] * fit.residuals[t];
    }
    return fit;
}

} // namespace trendboot
