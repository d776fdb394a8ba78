#pragma once

// Upward-sweep posterior quantities: per-leaf summaries, the merge/update step
// at non-leaf regions, and posterior weight moments.

#include <Eigen/Dense>

#include <vector>

#include "mra/prior.hpp"

namespace mra {

// Message passed from a region to its parent: blocks indexed by ancestor
// resolutions k >= l (the symmetric partner is derived on demand), the
// omega vectors, and the log-determinant / quadratic-form contributions.
struct RegionSummary {
    std::vector<std::vector<Matrix>> A;  // A[k][l] for l <= k, r_k x r_l
    std::vector<Vector> omega;           // omega[k], length r_k
    double d = 0.0;
    double u = 0.0;

    int top() const { return static_cast<int>(A.size()) - 1; }

    std::size_t block_count() const {
        std::size_t c = 0;
        for (const auto& row : A) c += row.size();
        return c + omega.size();
    }
};

struct PosteriorFactors {
    // by node id, populated for non-leaf nodes
    std::vector<Matrix> Ktilde_inv;
    std::vector<CholFactor> Ktilde_chol;
    std::vector<std::vector<std::vector<Matrix>>> A;  // A[k][l], l <= k <= level
    std::vector<std::vector<Vector>> omega;           // omega[k], k = 0..level
    // by node id, all nodes
    std::vector<double> d;
    std::vector<double> u;
    int n_obs = 0;

    double d_root() const { return d[0]; }
    double u_root() const { return u[0]; }

    double loglik() const {
        constexpr double log2pi = 1.8378770664093454836;
        return -0.5 * (d_root() + u_root() + n_obs * log2pi);
    }
};

// Summaries computed directly from the definition at the finest resolution:
// A~[k][l] = B^k' Sigma^-1 B^l, omega~[k] = B^k' Sigma^-1 y, d = log|Sigma|,
// u = y' Sigma^-1 y, all through the leaf-Sigma Cholesky.
inline RegionSummary leaf_summaries(const PartitionTree& tree, const PriorFactors& prior,
                                    int leaf_id) {
    const int M = tree.depth();
    const int q = tree.leaf_ordinal(leaf_id);
    const auto& B = prior.leaf_B[static_cast<std::size_t>(q)];
    const auto& chol = prior.leaf_sigma_chol[static_cast<std::size_t>(q)];
    const Vector& y = tree.leaf_values[static_cast<std::size_t>(q)];

    RegionSummary s;
    s.A.resize(static_cast<std::size_t>(M));
    s.omega.resize(static_cast<std::size_t>(M));
    std::vector<Matrix> solved(static_cast<std::size_t>(M));
    for (int l = 0; l < M; ++l)
        solved[static_cast<std::size_t>(l)] = chol.solve(B[static_cast<std::size_t>(l)]);
    const Vector ysol = chol.solve(y);
    for (int k = 0; k < M; ++k) {
        s.A[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(k) + 1);
        for (int l = 0; l <= k; ++l)
            s.A[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)] =
                B[static_cast<std::size_t>(k)].transpose() * solved[static_cast<std::size_t>(l)];
        s.omega[static_cast<std::size_t>(k)] = B[static_cast<std::size_t>(k)].transpose() * ysol;
    }
    if (y.size() > 0) {
        s.d = chol.logdet;
        s.u = y.dot(ysol);
    }
    return s;
}

// Eq-style merge at a non-leaf region: sums the children's summaries, forms
// the posterior precision of this region's weights, and emits the updated
// summary for the parent. Child order must be fixed (ascending j) so parallel
// and serial runs agree bit for bit.
inline RegionSummary merge_and_update(const PartitionTree& tree, const PriorFactors& prior,
                                      int node, const std::vector<const RegionSummary*>& children,
                                      PosteriorFactors& out) {
    const int m = tree.node_level(node);

    // A[k][l] and omega[k] for k,l = 0..m as child sums
    std::vector<std::vector<Matrix>> A(static_cast<std::size_t>(m) + 1);
    std::vector<Vector> omega(static_cast<std::size_t>(m) + 1);
    double d = 0.0, u = 0.0;
    for (int k = 0; k <= m; ++k) {
        A[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(k) + 1);
        for (int l = 0; l <= k; ++l) {
            Matrix sum = children.front()->A[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)];
            for (std::size_t c = 1; c < children.size(); ++c)
                sum += children[c]->A[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)];
            A[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)] = std::move(sum);
        }
        Vector osum = children.front()->omega[static_cast<std::size_t>(k)];
        for (std::size_t c = 1; c < children.size(); ++c)
            osum += children[c]->omega[static_cast<std::size_t>(k)];
        omega[static_cast<std::size_t>(k)] = std::move(osum);
    }
    for (const auto* c : children) {
        d += c->d;
        u += c->u;
    }

    const Matrix& Kinv = prior.Kinv[static_cast<std::size_t>(node)];
    Matrix Ktinv = Kinv + A[static_cast<std::size_t>(m)][static_cast<std::size_t>(m)];
    const double scale = Kinv.size() ? 1.0 + Kinv.diagonal().cwiseAbs().maxCoeff() : 1.0;
    CholFactor Ktchol = chol_with_jitter(Ktinv, scale,
                                         "Ktilde^-1 of region " + path_to_string(tree.path_of(node)));

    RegionSummary s;
    s.A.resize(static_cast<std::size_t>(m));
    s.omega.resize(static_cast<std::size_t>(m));
    const Vector wsol = Ktchol.solve(omega[static_cast<std::size_t>(m)]);
    // emit blocks for k,l <= m-1; T[l] = Ktilde A^{m,l}, and A^{k,m} = (A^{m,k})'
    std::vector<Matrix> T(static_cast<std::size_t>(m));
    for (int l = 0; l < m; ++l)
        T[static_cast<std::size_t>(l)] =
            Ktchol.solve(A[static_cast<std::size_t>(m)][static_cast<std::size_t>(l)]);
    for (int k = 0; k < m; ++k) {
        s.A[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(k) + 1);
        for (int l = 0; l <= k; ++l)
            s.A[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)] =
                A[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)] -
                A[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)].transpose() *
                    T[static_cast<std::size_t>(l)];
        s.omega[static_cast<std::size_t>(k)] =
            omega[static_cast<std::size_t>(k)] -
            A[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)].transpose() * wsol;
    }
    s.d = Ktchol.logdet - prior.Kinv_chol[static_cast<std::size_t>(node)].logdet + d;
    s.u = -omega[static_cast<std::size_t>(m)].dot(wsol) + u;

    out.Ktilde_inv[static_cast<std::size_t>(node)] = std::move(Ktinv);
    out.Ktilde_chol[static_cast<std::size_t>(node)] = std::move(Ktchol);
    out.A[static_cast<std::size_t>(node)] = std::move(A);
    out.omega[static_cast<std::size_t>(node)] = std::move(omega);
    out.d[static_cast<std::size_t>(node)] = s.d;
    out.u[static_cast<std::size_t>(node)] = s.u;
    return s;
}

// Posterior N(Ktilde omega^m, Ktilde) of the region's weight vector.
inline std::pair<Vector, Matrix> posterior_weight_moments(const PosteriorFactors& post, int node) {
    const auto& chol = post.Ktilde_chol[static_cast<std::size_t>(node)];
    const auto& omega = post.omega[static_cast<std::size_t>(node)];
    const int m = static_cast<int>(omega.size()) - 1;
    const Eigen::Index r = chol.dim();
    if (r == 0) return {Vector(0), Matrix(0, 0)};
    Vector mean = chol.solve(omega[static_cast<std::size_t>(m)]);
    Matrix cov = chol.solve(Matrix(Matrix::Identity(r, r)));
    return {std::move(mean), std::move(cov)};
}

}  // namespace mra
