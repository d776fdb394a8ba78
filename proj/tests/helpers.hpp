#pragma once

// Independent reference computations used by the tests: dense Gaussian
// conditioning, log-densities from an explicit covariance matrix, a direct
// (definition-level) evaluation of the hierarchical basis functions, and a
// quadrature CRPS.

#include <cmath>
#include <random>
#include <utility>

#include "mra/covariance.hpp"
#include "mra/geometry.hpp"
#include "mra/prior.hpp"

namespace testref {

using mra::Matrix;
using mra::Point;
using mra::Vector;

inline mra::Domain unit_domain(int d) {
    mra::Domain dom;
    dom.lower = Vector::Zero(d);
    dom.upper = Vector::Ones(d);
    return dom;
}

// log N(y | 0, C) via full LDLT (no jitter; the test data must be well posed)
inline double gauss_logpdf(const Vector& y, const Matrix& C) {
    Eigen::LDLT<Matrix> ldlt(C);
    const Vector alpha = ldlt.solve(y);
    const double logdet = ldlt.vectorD().array().log().sum();
    return -0.5 * (logdet + y.dot(alpha) +
                   static_cast<double>(y.size()) * std::log(2.0 * M_PI));
}

// Conditional mean and covariance of block 2 given block 1 of N(0, C) with
// C = [[C11, C12], [C21, C22]].
inline std::pair<Vector, Matrix> condition(const Matrix& C11, const Matrix& C12, const Matrix& C22,
                                           const Vector& y1) {
    Eigen::LDLT<Matrix> ldlt(C11);
    Vector mean = C12.transpose() * ldlt.solve(y1);
    Matrix cov = C22 - C12.transpose() * ldlt.solve(C12);
    return {std::move(mean), std::move(cov)};
}

// v_l evaluated from its definition: v_0 = C0 and
// v_{l+1}(a,b) = v_l(a,b) - v_l(a,Q_l) v_l(Q_l,Q_l)^{-1} v_l(Q_l,b),
// where Q_l runs over the knots of the ancestor at resolution l on the branch
// containing both a and b. Works for any pair inside one level-l region.
inline double v_direct(const mra::PartitionTree& tree, const mra::CovarianceModel& model, int level,
                       const Point& a, const Point& b) {
    if (level == 0) return mra::kernel(model, a, b);
    // ancestors of the region containing a (assumed to also contain b)
    const int leaf = tree.locate_leaf(a);
    auto anc = tree.ancestors(leaf);

    // recursive evaluation via dense function-space operations on the fly
    struct Eval {
        const mra::PartitionTree& tree;
        const mra::CovarianceModel& model;
        const std::vector<int>& anc;
        double operator()(int l, const Point& x, const Point& y) const {
            if (l == 0) return mra::kernel(model, x, y);
            const Matrix& Q = tree.knots[static_cast<std::size_t>(anc[static_cast<std::size_t>(l - 1)])];
            const double base = (*this)(l - 1, x, y);
            if (Q.rows() == 0) return base;
            Matrix Vqq(Q.rows(), Q.rows());
            Vector vxq(Q.rows()), vqy(Q.rows());
            for (Eigen::Index i = 0; i < Q.rows(); ++i) {
                vxq[i] = (*this)(l - 1, x, Q.row(i));
                vqy[i] = (*this)(l - 1, Q.row(i), y);
                for (Eigen::Index j = 0; j < Q.rows(); ++j)
                    Vqq(i, j) = (*this)(l - 1, Q.row(i), Q.row(j));
            }
            return base - vxq.dot(Eigen::LDLT<Matrix>(Vqq).solve(vqy));
        }
    };
    return Eval{tree, model, anc}(level, a, b);
}

// CRPS by trapezoid quadrature of integral (F(x) - 1[x >= y])^2 dx, split at
// the discontinuity x = y so each piece is smooth.
inline double crps_quadrature(double y, double mean, double sd, int steps = 100000) {
    const double lo = std::min(y, mean - 10.0 * sd) - 2.0 * sd - 1.0;
    const double hi = std::max(y, mean + 10.0 * sd) + 2.0 * sd + 1.0;
    auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0))); };
    auto piece = [&](double a, double b, double H) {
        const double h = (b - a) / steps;
        auto g = [&](double x) {
            const double e = cdf(x) - H;
            return e * e;
        };
        double s = 0.5 * (g(a) + g(b));
        for (int i = 1; i < steps; ++i) s += g(a + i * h);
        return s * h;
    };
    return piece(lo, y, 0.0) + piece(y, hi, 1.0);
}

// Uniform random locations in the unit cube.
inline Matrix random_locations(int n, int d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Matrix S(n, d);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k) S(i, k) = unif(rng);
    return S;
}

}  // namespace testref
