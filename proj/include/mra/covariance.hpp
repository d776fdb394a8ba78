#pragma once

// Parametric covariance functions C0(theta) and dense matrix assembly.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>

#include "mra/geometry.hpp"

namespace mra {

// Matern correlation with smoothness 1.5, unit scale.
inline double matern15(double h) {
    if (h < 0) throw std::domain_error("matern15: negative distance");
    const double a = h * std::sqrt(3.0);
    return (1.0 + a) * std::exp(-a);
}

inline double exponential(double h) {
    if (h < 0) throw std::domain_error("exponential: negative distance");
    return std::exp(-h);
}

struct CovarianceModel {
    enum class Family { Exponential, Matern15, Plugin };

    Family family = Family::Matern15;
    double variance = 1.0;  // sigma^2
    double range = 1.0;     // kappa, same units as distance
    double nugget = 0.0;    // sigma^2_eps, applied at matrix assembly only
    // full kernel C0(s1,s2) excluding the nugget; used verbatim when family == Plugin
    std::function<double(const Point&, const Point&)> plugin;

    void validate() const {
        if (family != Family::Plugin && (!(variance > 0) || !(range > 0)))
            throw std::invalid_argument("covariance model: variance and range must be positive");
        if (nugget < 0) throw std::invalid_argument("covariance model: nugget must be nonnegative");
        if (family == Family::Plugin && !plugin)
            throw std::invalid_argument("covariance model: plugin kernel missing");
    }
};

// C0(s1,s2) without nugget; Euclidean distance.
inline double kernel(const CovarianceModel& model, const Point& s1, const Point& s2) {
    if (model.family == CovarianceModel::Family::Plugin) return model.plugin(s1, s2);
    const double h = (s1 - s2).norm() / model.range;
    const double rho = model.family == CovarianceModel::Family::Matern15 ? matern15(h)
                                                                         : exponential(h);
    return model.variance * rho;
}

// Entry (i,j) = C0(a_i,b_j) + nugget * 1[a_i == b_j], the indicator applying
// only when add_nugget is set (i.e. A and B reference the same ordered list).
inline Matrix cov_matrix(const CovarianceModel& model, const Matrix& A, const Matrix& B,
                         bool add_nugget = false) {
    if (A.rows() > 0 && B.rows() > 0 && A.cols() != B.cols())
        throw std::invalid_argument("cov_matrix: point sets have different dimension");
    Matrix out(A.rows(), B.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < B.rows(); ++j) {
            double c = kernel(model, A.row(i), B.row(j));
            if (add_nugget && A.row(i) == B.row(j)) c += model.nugget;
            out(i, j) = c;
        }
    return out;
}

}  // namespace mra
