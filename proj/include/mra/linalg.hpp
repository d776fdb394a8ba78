#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

#include "mra/geometry.hpp"

namespace mra {

struct CholFactor {
    Eigen::LLT<Matrix> llt;
    double logdet = 0.0;  // log-determinant of the factored matrix
    Eigen::Index dim() const { return llt.matrixLLT().rows(); }

    Matrix solve(const Matrix& rhs) const {
        if (dim() == 0) return Matrix(0, rhs.cols());
        return llt.solve(rhs);
    }
    Vector solve(const Vector& rhs) const {
        if (dim() == 0) return Vector(0);
        return llt.solve(rhs);
    }
};

// Cholesky with a jitter ladder 1e-10*scale .. 1e-6*scale (decade steps).
// Throws naming `what` if the matrix stays indefinite.
inline CholFactor chol_with_jitter(const Matrix& A, double scale, const std::string& what) {
    if (A.rows() != A.cols()) throw std::invalid_argument("chol_with_jitter: matrix not square");
    CholFactor f;
    if (A.rows() == 0) {
        f.llt.compute(Matrix(0, 0));
        return f;
    }
    double jitter = 0.0;
    for (int attempt = 0; attempt <= 5; ++attempt) {
        Matrix B = A;
        if (attempt > 0) {
            jitter = scale * 1e-10 * std::pow(10.0, attempt - 1);
            B.diagonal().array() += jitter;
        }
        f.llt.compute(B);
        if (f.llt.info() == Eigen::Success) {
            f.logdet = 2.0 * f.llt.matrixLLT().diagonal().array().log().sum();
            if (f.logdet == f.logdet)  // reject NaN from nonpositive pivots
                return f;
        }
    }
    throw std::runtime_error("Cholesky factorization failed for " + what +
                             " (singular knot or observation configuration)");
}

}  // namespace mra
