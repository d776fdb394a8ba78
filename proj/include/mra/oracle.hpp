#pragma once

// Exact reference implementations used for validation and baselines:
// dense Gaussian-process likelihood and kriging, the Durbin-Levinson
// likelihood on regular 1-D grids, circulant-embedding simulation, and
// local kriging.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mra/covariance.hpp"
#include "mra/linalg.hpp"

namespace mra {

inline constexpr double kLog2Pi = 1.8378770664093454836;

// Dense GP with factored data covariance C0(S,S) + nugget I.
struct DenseGP {
    Matrix S;
    CholFactor chol;

    DenseGP(const CovarianceModel& model, const Matrix& locations) : S(locations) {
        Matrix C = cov_matrix(model, S, S, true);
        chol = chol_with_jitter(C, model.variance, "dense data covariance");
    }
};

inline double exact_loglik(const CovarianceModel& model, const Matrix& S, const Vector& y) {
    if (S.rows() != y.size()) throw std::invalid_argument("exact_loglik: size mismatch");
    const DenseGP gp(model, S);
    const Vector alpha = gp.chol.solve(y);
    return -0.5 * (gp.chol.logdet + y.dot(alpha) + static_cast<double>(y.size()) * kLog2Pi);
}

// Conditional-Gaussian prediction of the process (nugget on the data side only).
inline std::pair<Vector, Vector> exact_krige(const CovarianceModel& model, const Matrix& S,
                                             const Vector& y, const Matrix& SP) {
    const Eigen::Index np = SP.rows();
    Vector mean = Vector::Zero(np), var(np);
    for (Eigen::Index i = 0; i < np; ++i) var[i] = kernel(model, SP.row(i), SP.row(i));
    if (S.rows() == 0) return {std::move(mean), std::move(var)};

    const DenseGP gp(model, S);
    const Matrix Cps = cov_matrix(model, SP, S);
    mean = Cps * gp.chol.solve(y);
    const Matrix X = gp.chol.llt.matrixL().solve(Matrix(Cps.transpose()));
    var -= X.colwise().squaredNorm().transpose();
    return {std::move(mean), std::move(var)};
}

// Exact log-density of a stationary series on a regular grid via the
// Durbin-Levinson innovations recursion; O(n^2) time, O(n) memory.
// acvf[k] is the autocovariance at lag k (nugget included at lag 0).
inline double durbin_levinson_loglik(const std::vector<double>& acvf, const Vector& y) {
    const int n = static_cast<int>(y.size());
    if (static_cast<int>(acvf.size()) < n)
        throw std::invalid_argument("durbin_levinson_loglik: need acvf up to lag n-1");
    if (n == 0) return 0.0;

    double v = acvf[0];
    if (!(v > 0)) throw std::invalid_argument("durbin_levinson_loglik: acvf not positive definite");
    double ll = -0.5 * (std::log(v) + y[0] * y[0] / v + kLog2Pi);

    std::vector<double> phi, phi_prev;
    for (int t = 1; t < n; ++t) {
        double num = acvf[static_cast<std::size_t>(t)];
        for (int j = 1; j < t; ++j)
            num -= phi_prev[static_cast<std::size_t>(j - 1)] * acvf[static_cast<std::size_t>(t - j)];
        const double refl = num / v;
        phi.assign(static_cast<std::size_t>(t), 0.0);
        phi[static_cast<std::size_t>(t - 1)] = refl;
        for (int j = 1; j < t; ++j)
            phi[static_cast<std::size_t>(j - 1)] = phi_prev[static_cast<std::size_t>(j - 1)] -
                                                   refl * phi_prev[static_cast<std::size_t>(t - 1 - j)];
        v *= (1.0 - refl * refl);
        if (!(v > 0))
            throw std::invalid_argument("durbin_levinson_loglik: acvf not positive definite");

        double pred = 0.0;
        for (int j = 1; j <= t; ++j) pred += phi[static_cast<std::size_t>(j - 1)] * y[t - j];
        const double e = y[t] - pred;
        ll -= 0.5 * (std::log(v) + e * e / v + kLog2Pi);
        phi_prev = phi;
    }
    return ll;
}

// Autocovariance sequence of the model on a grid with the given spacing;
// nugget included at lag 0.
inline std::vector<double> model_acvf(const CovarianceModel& model, int lags, double spacing) {
    std::vector<double> c(static_cast<std::size_t>(lags));
    Point a(1), b(1);
    a[0] = 0.0;
    for (int k = 0; k < lags; ++k) {
        b[0] = k * spacing;
        c[static_cast<std::size_t>(k)] = kernel(model, a, b);
    }
    if (lags > 0) c[0] += model.nugget;
    return c;
}

// Equidistant grid of n points (i + 0.5) * (hi - lo) / n inside [lo, hi].
inline Matrix regular_grid_1d(int n, double lo = 0.0, double hi = 1.0) {
    Matrix S(n, 1);
    const double h = (hi - lo) / n;
    for (int i = 0; i < n; ++i) S(i, 0) = lo + (i + 0.5) * h;
    return S;
}

namespace detail {

// In-place iterative radix-2 FFT; size must be a power of two.
inline void fft_pow2(std::vector<std::complex<double>>& a, bool inverse = false) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft: size must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= static_cast<double>(n);
}

}  // namespace detail

// Exact stationary draw on a regular 1-D grid via circulant embedding
// (Davies-Harte); nugget added as independent normals. The embedding length
// starts at the smallest power of two >= 2n and is doubled up to 4x if the
// embedding is indefinite.
inline Vector simulate_1d_circulant(const CovarianceModel& model, int n, std::uint64_t seed,
                                    double spacing = -1.0) {
    if (n < 1) throw std::invalid_argument("simulate_1d_circulant: n must be >= 1");
    if (spacing <= 0) spacing = 1.0 / n;

    CovarianceModel smooth = model;
    smooth.nugget = 0.0;

    std::size_t g = 1;
    while (g < 2 * static_cast<std::size_t>(n)) g <<= 1;
    const std::size_t g_max = g * 4;

    std::vector<double> lambda;
    for (;; g <<= 1) {
        Point a(1), b(1);
        a[0] = 0.0;
        std::vector<std::complex<double>> c(g);
        for (std::size_t j = 0; j < g; ++j) {
            const std::size_t lag = std::min(j, g - j);
            b[0] = static_cast<double>(lag) * spacing;
            c[j] = kernel(smooth, a, b);
        }
        detail::fft_pow2(c);
        double lo = 0.0, hi = 0.0;
        lambda.resize(g);
        for (std::size_t j = 0; j < g; ++j) {
            lambda[j] = c[j].real();
            lo = std::min(lo, lambda[j]);
            hi = std::max(hi, lambda[j]);
        }
        if (lo >= -1e-9 * hi) {
            for (auto& l : lambda) l = std::max(l, 0.0);
            break;
        }
        if (g * 2 > g_max)
            throw std::runtime_error(
                "simulate_1d_circulant: circulant embedding stays indefinite; "
                "a larger padding bound would be required");
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::complex<double>> a(g);
    a[0] = std::sqrt(lambda[0]) * normal(rng);
    a[g / 2] = std::sqrt(lambda[g / 2]) * normal(rng);
    for (std::size_t k = 1; k < g / 2; ++k) {
        const double s = std::sqrt(lambda[k] / 2.0);
        const double re = normal(rng), im = normal(rng);
        a[k] = std::complex<double>(s * re, s * im);
        a[g - k] = std::conj(a[k]);
    }
    detail::fft_pow2(a);

    Vector y(n);
    const double norm = 1.0 / std::sqrt(static_cast<double>(g));
    for (int i = 0; i < n; ++i) y[i] = a[static_cast<std::size_t>(i)].real() * norm;
    if (model.nugget > 0) {
        const double sd = std::sqrt(model.nugget);
        for (int i = 0; i < n; ++i) y[i] += sd * normal(rng);
    }
    return y;
}

// Cholesky-based exact draw at arbitrary locations (oracle scale only).
inline Vector simulate_dense(const CovarianceModel& model, const Matrix& S, std::uint64_t seed) {
    const DenseGP gp(model, S);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(S.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    return gp.chol.llt.matrixL() * z;
}

// Kriging from the k nearest observations of each prediction location.
inline std::pair<Vector, Vector> local_krige(const CovarianceModel& model, const Matrix& S,
                                             const Vector& y, const Matrix& SP, int k) {
    const int n = static_cast<int>(S.rows());
    if (k > n) throw std::invalid_argument("local_krige: neighbor count exceeds data size");
    if (n == 0) {
        Vector mean = Vector::Zero(SP.rows()), var(SP.rows());
        for (Eigen::Index i = 0; i < SP.rows(); ++i) var[i] = kernel(model, SP.row(i), SP.row(i));
        return {std::move(mean), std::move(var)};
    }

    Vector mean(SP.rows()), var(SP.rows());
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (Eigen::Index p = 0; p < SP.rows(); ++p) {
        const Point s = SP.row(p);
        for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
        std::nth_element(idx.begin(), idx.begin() + (k - 1), idx.end(), [&](int a, int b) {
            return (S.row(a) - s).squaredNorm() < (S.row(b) - s).squaredNorm();
        });
        Matrix Sk(k, S.cols());
        Vector yk(k);
        for (int i = 0; i < k; ++i) {
            Sk.row(i) = S.row(idx[static_cast<std::size_t>(i)]);
            yk[i] = y[idx[static_cast<std::size_t>(i)]];
        }
        const auto [m, v] = exact_krige(model, Sk, yk, Matrix(s));
        mean[p] = m[0];
        var[p] = v[0];
    }
    return {std::move(mean), std::move(var)};
}

}  // namespace mra
