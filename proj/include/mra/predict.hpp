#pragma once

// Joint spatial prediction: prior prediction quantities, the downward
// posterior-basis sweep, marginal summaries and joint sampling.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "mra/inference.hpp"

namespace mra {

// Prediction locations bucketed by leaf without touching the tree's
// observation buckets.
struct PredictionBuckets {
    std::vector<Matrix> pts;                 // by leaf ordinal
    std::vector<std::vector<int>> rows;      // original row indices
    int total = 0;
};

inline PredictionBuckets bucket_predictions(const PartitionTree& tree, const Matrix& SP) {
    PredictionBuckets b;
    b.pts.assign(static_cast<std::size_t>(tree.n_leaves()), Matrix(0, tree.dim()));
    b.rows.assign(static_cast<std::size_t>(tree.n_leaves()), {});
    b.total = static_cast<int>(SP.rows());
    for (int i = 0; i < b.total; ++i) {
        Point s = SP.row(i);
        if (!tree.domain.contains(s))
            throw std::invalid_argument("prediction location " + std::to_string(i) +
                                        " lies outside the domain");
        b.rows[static_cast<std::size_t>(tree.leaf_ordinal(tree.locate_leaf(s)))].push_back(i);
    }
    for (int q = 0; q < tree.n_leaves(); ++q) {
        const auto& r = b.rows[static_cast<std::size_t>(q)];
        Matrix pts(static_cast<Eigen::Index>(r.size()), tree.dim());
        for (std::size_t i = 0; i < r.size(); ++i)
            pts.row(static_cast<Eigen::Index>(i)) = SP.row(r[i]);
        b.pts[static_cast<std::size_t>(q)] = std::move(pts);
    }
    return b;
}

// Per-leaf prior prediction quantities: U^l = v_l(S^P, Q_l) for l < M,
// L = v_M(S^P, S_leaf) and V^P = v_M(S^P, S^P). The nugget is excluded:
// predictions target the process, not the observations.
struct LeafPredPrior {
    std::vector<Matrix> U;  // l = 0..M-1
    Matrix L;
    Matrix VP;
};

inline LeafPredPrior compute_pred_prior_leaf(const PartitionTree& tree,
                                             const CovarianceModel& model,
                                             const PriorFactors& prior, int leaf_id,
                                             const Matrix& pts) {
    const int M = tree.depth();
    LeafPredPrior out;
    auto chain = ancestor_chain(tree, model, prior, leaf_id, M - 1);
    out.U = chain_basis(model, prior, chain, pts, M - 1);

    const int q = tree.leaf_ordinal(leaf_id);
    const auto& B = prior.leaf_B[static_cast<std::size_t>(q)];
    out.L = cov_matrix(model, pts, tree.leaf_locations[static_cast<std::size_t>(q)]);
    out.VP = cov_matrix(model, pts, pts);
    for (int l = 0; l < M; ++l) {
        const int node = chain[static_cast<std::size_t>(l)].node;
        if (tree.knots[static_cast<std::size_t>(node)].rows() == 0) continue;
        const auto& Ul = out.U[static_cast<std::size_t>(l)];
        out.L.noalias() -= Ul * prior.apply_K(node, B[static_cast<std::size_t>(l)].transpose());
        out.VP.noalias() -= Ul * prior.apply_K(node, Ul.transpose());
    }
    return out;
}

// Retained leaf output of the basis sweep plus residual moments.
struct LeafPredictive {
    std::vector<Matrix> Bt;  // Bt[m] = B~^{m+1,m}, m = 0..M-1
    Vector resid_mean;       // L Sigma^-1 y
    Matrix resid_cov;        // V^P - L Sigma^-1 L'
};

inline LeafPredictive posterior_basis_sweep_leaf(const PartitionTree& tree,
                                                 const PriorFactors& prior,
                                                 const PosteriorFactors& post, int leaf_id,
                                                 const LeafPredPrior& pp) {
    const int M = tree.depth();
    const int q = tree.leaf_ordinal(leaf_id);
    const auto& chol = prior.leaf_sigma_chol[static_cast<std::size_t>(q)];
    const auto& B = prior.leaf_B[static_cast<std::size_t>(q)];
    const Vector& y = tree.leaf_values[static_cast<std::size_t>(q)];
    const auto anc = tree.ancestors(leaf_id);

    LeafPredictive out;
    out.Bt.resize(static_cast<std::size_t>(M));

    // l = M from the definition
    std::vector<Matrix> bt(static_cast<std::size_t>(M));
    for (int k = 0; k < M; ++k)
        bt[static_cast<std::size_t>(k)] =
            pp.U[static_cast<std::size_t>(k)] -
            pp.L * chol.solve(B[static_cast<std::size_t>(k)]);
    if (M > 0) out.Bt[static_cast<std::size_t>(M - 1)] = bt[static_cast<std::size_t>(M - 1)];

    // recursion for l = M-1..1, applied for k <= l-1 only
    for (int l = M - 1; l >= 1; --l) {
        const int node = anc[static_cast<std::size_t>(l)];
        const auto& Kt = post.Ktilde_chol[static_cast<std::size_t>(node)];
        const auto& Al = post.A[static_cast<std::size_t>(node)];
        for (int k = 0; k < l; ++k) {
            bt[static_cast<std::size_t>(k)].noalias() -=
                bt[static_cast<std::size_t>(l)] *
                Kt.solve(Al[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)]);
        }
        out.Bt[static_cast<std::size_t>(l - 1)] = bt[static_cast<std::size_t>(l - 1)];
    }

    out.resid_mean = pp.L * chol.solve(y);
    out.resid_cov = pp.VP - pp.L * chol.solve(Matrix(pp.L.transpose()));
    if (y.size() == 0) {
        out.resid_mean = Vector::Zero(pp.VP.rows());
        out.resid_cov = pp.VP;
    }
    return out;
}

// Compactly stored joint posterior predictive distribution.
struct PredictiveDistribution {
    const PartitionTree* tree = nullptr;
    PredictionBuckets buckets;
    std::vector<LeafPredictive> leaves;     // by leaf ordinal; empty buckets -> empty blocks
    std::vector<Vector> eta_mean;           // by node id (non-leaf): Ktilde omega^m
    std::vector<const CholFactor*> Ktchol;  // by node id, borrowed from PosteriorFactors
    int n_pred = 0;
};

// Marginal posterior mean and variance per prediction location, in the
// original row order. include_nugget adds sigma^2_eps (predicting z, not y).
inline std::pair<Vector, Vector> predict_marginals(const PredictiveDistribution& pd,
                                                   double nugget_to_add = 0.0) {
    const PartitionTree& tree = *pd.tree;
    const int M = tree.depth();
    Vector mean = Vector::Zero(pd.n_pred), var = Vector::Zero(pd.n_pred);
    for (int q = 0; q < tree.n_leaves(); ++q) {
        const auto& rows = pd.buckets.rows[static_cast<std::size_t>(q)];
        if (rows.empty()) continue;
        const auto& lp = pd.leaves[static_cast<std::size_t>(q)];
        const auto anc = tree.ancestors(tree.node_id(M, q));
        Vector mu = lp.resid_mean;
        Vector v2 = lp.resid_cov.diagonal();
        for (int m = 0; m < M; ++m) {
            const int node = anc[static_cast<std::size_t>(m)];
            const auto& Kt = *pd.Ktchol[static_cast<std::size_t>(node)];
            if (Kt.dim() == 0) continue;
            const auto& Btm = lp.Bt[static_cast<std::size_t>(m)];
            mu.noalias() += Btm * pd.eta_mean[static_cast<std::size_t>(node)];
            // diag(Bt Ktilde Bt') via a triangular solve against chol(Ktilde^-1)
            Matrix X = Kt.llt.matrixL().solve(Btm.transpose());
            v2 += X.colwise().squaredNorm().transpose();
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
            mean[rows[i]] = mu[static_cast<Eigen::Index>(i)];
            var[rows[i]] = v2[static_cast<Eigen::Index>(i)] + nugget_to_add;
        }
    }
    return {std::move(mean), std::move(var)};
}

// Dense joint predictive covariance (test-scale); original row order.
inline Matrix predictive_covariance(const PredictiveDistribution& pd) {
    const PartitionTree& tree = *pd.tree;
    const int M = tree.depth();
    Matrix Psi = Matrix::Zero(pd.n_pred, pd.n_pred);
    std::vector<int> occupied;
    for (int q = 0; q < tree.n_leaves(); ++q)
        if (!pd.buckets.rows[static_cast<std::size_t>(q)].empty()) occupied.push_back(q);

    auto scatter = [&](int qa, int qb, const Matrix& block) {
        const auto& ra = pd.buckets.rows[static_cast<std::size_t>(qa)];
        const auto& rb = pd.buckets.rows[static_cast<std::size_t>(qb)];
        for (std::size_t i = 0; i < ra.size(); ++i)
            for (std::size_t j = 0; j < rb.size(); ++j) {
                Psi(ra[i], rb[j]) = block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                Psi(rb[j], ra[i]) = block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
    };

    for (std::size_t a = 0; a < occupied.size(); ++a)
        for (std::size_t b = a; b < occupied.size(); ++b) {
            const int qa = occupied[a], qb = occupied[b];
            const auto& la = pd.leaves[static_cast<std::size_t>(qa)];
            const auto& lb = pd.leaves[static_cast<std::size_t>(qb)];
            RegionPath pa = tree.path_of(tree.node_id(M, qa));
            RegionPath pb = tree.path_of(tree.node_id(M, qb));
            int p = 0;
            while (p < M && pa[static_cast<std::size_t>(p)] == pb[static_cast<std::size_t>(p)]) ++p;
            const int top = (qa == qb) ? M - 1 : std::min(p, M - 1);

            Matrix block = Matrix::Zero(la.resid_mean.size(), lb.resid_mean.size());
            if (qa == qb) block = la.resid_cov;
            const auto anc = tree.ancestors(tree.node_id(M, qa));
            for (int m = 0; m <= top; ++m) {
                const int node = anc[static_cast<std::size_t>(m)];
                const auto& Kt = *pd.Ktchol[static_cast<std::size_t>(node)];
                if (Kt.dim() == 0) continue;
                block.noalias() += la.Bt[static_cast<std::size_t>(m)] *
                                   Kt.solve(Matrix(lb.Bt[static_cast<std::size_t>(m)].transpose()));
            }
            scatter(qa, qb, block);
        }
    return Psi;
}

// Joint draws via per-region weight draws and per-leaf residual draws;
// cross-leaf dependence enters through the shared ancestor weights.
inline Matrix sample_predictive(const PredictiveDistribution& pd, int count, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample_predictive: count must be >= 1");
    const PartitionTree& tree = *pd.tree;
    const int M = tree.depth();

    // pre-factor residual covariances (jitter for the interpolation-degenerate case)
    std::vector<CholFactor> resid_chol(static_cast<std::size_t>(tree.n_leaves()));
    for (int q = 0; q < tree.n_leaves(); ++q) {
        if (pd.buckets.rows[static_cast<std::size_t>(q)].empty()) continue;
        const Matrix& C = pd.leaves[static_cast<std::size_t>(q)].resid_cov;
        const double scale = 1.0 + C.diagonal().cwiseAbs().maxCoeff();
        Matrix Cj = C;
        Cj.diagonal().array() += 1e-12 * scale;
        resid_chol[static_cast<std::size_t>(q)] =
            chol_with_jitter(Cj, scale, "residual covariance of a prediction leaf");
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix draws(count, pd.n_pred);
    for (int rep = 0; rep < count; ++rep) {
        // region weight draws in fixed node order
        std::vector<Vector> eta(static_cast<std::size_t>(tree.total_nodes()));
        for (int node = 0; node < tree.level_offset[static_cast<std::size_t>(M)]; ++node) {
            const auto& Kt = *pd.Ktchol[static_cast<std::size_t>(node)];
            const Eigen::Index r = Kt.dim();
            Vector z(r);
            for (Eigen::Index i = 0; i < r; ++i) z[i] = normal(rng);
            // Ktilde = (L L')^{-1}: mean + L'^{-1} z has covariance Ktilde
            Vector draw = pd.eta_mean[static_cast<std::size_t>(node)];
            if (r > 0)
                draw += Kt.llt.matrixL().transpose().solve(z);
            eta[static_cast<std::size_t>(node)] = std::move(draw);
        }
        for (int q = 0; q < tree.n_leaves(); ++q) {
            const auto& rows = pd.buckets.rows[static_cast<std::size_t>(q)];
            if (rows.empty()) continue;
            const auto& lp = pd.leaves[static_cast<std::size_t>(q)];
            const auto anc = tree.ancestors(tree.node_id(M, q));
            const auto& rc = resid_chol[static_cast<std::size_t>(q)];
            Vector z(rc.dim());
            for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
            Vector val = lp.resid_mean + rc.llt.matrixL() * z;
            for (int m = 0; m < M; ++m) {
                const int node = anc[static_cast<std::size_t>(m)];
                if (pd.Ktchol[static_cast<std::size_t>(node)]->dim() == 0) continue;
                val.noalias() += lp.Bt[static_cast<std::size_t>(m)] * eta[static_cast<std::size_t>(node)];
            }
            for (std::size_t i = 0; i < rows.size(); ++i)
                draws(rep, rows[i]) = val[static_cast<Eigen::Index>(i)];
        }
    }
    return draws;
}

}  // namespace mra
