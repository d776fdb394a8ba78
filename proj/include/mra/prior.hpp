#pragma once

// Prior multi-resolution factors: the W-recursion over knot sets, per-region
// precision blocks K^{-1}, leaf basis matrices B and leaf covariances Sigma,
// plus point evaluation of the approximated covariance C_M.

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

#include "mra/covariance.hpp"
#include "mra/geometry.hpp"
#include "mra/linalg.hpp"

namespace mra {

struct PriorFactors {
    // by node id; populated for non-leaf nodes only
    std::vector<Matrix> Kinv;
    std::vector<CholFactor> Kinv_chol;
    // by leaf ordinal
    std::vector<std::vector<Matrix>> leaf_B;  // B^l for l = 0..M-1, |S_leaf| x r_l
    std::vector<Matrix> leaf_sigma;           // v_M(S,S) + nugget*I
    std::vector<CholFactor> leaf_sigma_chol;

    // K x = (K^{-1})^{-1} x for the region's weight prior
    Matrix apply_K(int node, const Matrix& rhs) const {
        return Kinv_chol[static_cast<std::size_t>(node)].solve(rhs);
    }
};

// W^l = v_l(Q_region, Q_ancestor-at-l) for one region, driven by the chain of
// ancestor blocks. `anc_W[k]` holds the ancestor-at-level-l blocks v_k(Q_l, Q_k).
namespace detail {

struct AncestorBlocks {
    int node = -1;
    const Matrix* Q = nullptr;
    std::vector<Matrix> W;  // W[k] = v_k(Q_node, Q_anc_k), k = 0..level-1
};

// One step of the W-recursion: v_l(P, Q_l) for l = 0..top, where P are rows of
// `pts` inside the region whose ancestors (levels 0..top) are described by `chain`.
inline std::vector<Matrix> w_recursion(const CovarianceModel& model, const PriorFactors& prior,
                                       const std::vector<AncestorBlocks>& chain, const Matrix& pts,
                                       int top) {
    if (top < 0) return {};
    std::vector<Matrix> W(static_cast<std::size_t>(top) + 1);
    for (int l = 0; l <= top; ++l) {
        const auto& anc_l = chain[static_cast<std::size_t>(l)];
        Matrix w = cov_matrix(model, pts, *anc_l.Q);
        for (int k = 0; k < l; ++k) {
            const auto& anc_k = chain[static_cast<std::size_t>(k)];
            if (anc_k.Q->rows() == 0) continue;
            w.noalias() -= W[static_cast<std::size_t>(k)] *
                           prior.apply_K(anc_k.node, anc_l.W[static_cast<std::size_t>(k)].transpose());
        }
        W[static_cast<std::size_t>(l)] = std::move(w);
    }
    return W;
}

}  // namespace detail

inline PriorFactors compute_prior(const PartitionTree& tree, const CovarianceModel& model) {
    model.validate();
    const int M = tree.depth();
    PriorFactors prior;
    prior.Kinv.resize(static_cast<std::size_t>(tree.total_nodes()));
    prior.Kinv_chol.resize(static_cast<std::size_t>(tree.total_nodes()));
    prior.leaf_B.resize(static_cast<std::size_t>(tree.n_leaves()));
    prior.leaf_sigma.resize(static_cast<std::size_t>(tree.n_leaves()));
    prior.leaf_sigma_chol.resize(static_cast<std::size_t>(tree.n_leaves()));

    // depth-first pass; ancestor W-blocks live only while descendants need them
    std::vector<detail::AncestorBlocks> chain;
    auto visit = [&](auto&& self, int node) -> void {
        const int m = tree.node_level(node);
        const Matrix& Q = tree.knots[static_cast<std::size_t>(node)];

        // cross-level blocks against strict ancestors, then the self block v_m(Q,Q)
        auto W = detail::w_recursion(model, prior, chain, Q, m - 1);
        Matrix self_block = cov_matrix(model, Q, Q);
        for (int k = 0; k < m; ++k) {
            const auto& anc_k = chain[static_cast<std::size_t>(k)];
            if (anc_k.Q->rows() == 0) continue;
            self_block.noalias() -= W[static_cast<std::size_t>(k)] *
                                    prior.apply_K(anc_k.node, W[static_cast<std::size_t>(k)].transpose());
        }

        if (m < M) {
            prior.Kinv[static_cast<std::size_t>(node)] = std::move(self_block);
            prior.Kinv_chol[static_cast<std::size_t>(node)] =
                chol_with_jitter(prior.Kinv[static_cast<std::size_t>(node)], model.variance,
                                 "K^-1 of region " + path_to_string(tree.path_of(node)));
            chain.push_back({node, &Q, std::move(W)});
            for (int j = 0; j < tree.branching[static_cast<std::size_t>(m)]; ++j)
                self(self, tree.child(node, j));
            chain.pop_back();
        } else {
            const int q = tree.leaf_ordinal(node);
            Matrix sigma = std::move(self_block);
            sigma.diagonal().array() += model.nugget;
            prior.leaf_B[static_cast<std::size_t>(q)] = std::move(W);
            prior.leaf_sigma_chol[static_cast<std::size_t>(q)] =
                chol_with_jitter(sigma, model.variance,
                                 "Sigma of leaf " + path_to_string(tree.path_of(node)));
            prior.leaf_sigma[static_cast<std::size_t>(q)] = std::move(sigma);
        }
    };
    visit(visit, 0);
    return prior;
}

// Rebuilds the ancestor cross-blocks v_k(Q_l, Q_k) for levels 0..top along the
// path to `node` (they are not retained by compute_prior).
inline std::vector<detail::AncestorBlocks> ancestor_chain(const PartitionTree& tree,
                                                          const CovarianceModel& model,
                                                          const PriorFactors& prior, int node,
                                                          int top) {
    if (top < 0) return {};
    std::vector<int> ids;
    {
        int id = node;
        for (int m = tree.node_level(node); m > top; --m) id = tree.parent(id);
        for (int m = top; m >= 0; --m) {
            ids.push_back(id);
            if (m > 0) id = tree.parent(id);
        }
    }
    std::vector<detail::AncestorBlocks> chain;
    for (int l = 0; l <= top; ++l) {
        const int id = ids[static_cast<std::size_t>(top - l)];
        chain.push_back({id, &tree.knots[static_cast<std::size_t>(id)], {}});
        chain.back().W = detail::w_recursion(model, prior, chain, *chain.back().Q, l - 1);
    }
    return chain;
}

// Basis rows v_l(pts, Q_l) for l = 0..top for points inside the region at the
// chain's deepest level.
inline std::vector<Matrix> chain_basis(const CovarianceModel& model, const PriorFactors& prior,
                                       const std::vector<detail::AncestorBlocks>& chain,
                                       const Matrix& pts, int top) {
    return detail::w_recursion(model, prior, chain, pts, top);
}

// Covariance function C_M of the approximating process. Excludes the nugget
// unless s1 and s2 are the identical location.
inline double mra_covariance(const PriorFactors& prior, const PartitionTree& tree,
                             const CovarianceModel& model, const Point& s1, const Point& s2) {
    if (!tree.domain.contains(s1) || !tree.domain.contains(s2))
        throw std::invalid_argument("mra_covariance: location outside domain");
    const int leaf1 = tree.locate_leaf(s1);
    const int leaf2 = tree.locate_leaf(s2);
    const double nug = (s1 == s2) ? model.nugget : 0.0;
    if (leaf1 == leaf2) return kernel(model, s1, s2) + nug;

    // deepest common region: sum of basis terms up to that resolution
    RegionPath p1 = tree.path_of(leaf1), p2 = tree.path_of(leaf2);
    int p = 0;
    while (p1[static_cast<std::size_t>(p)] == p2[static_cast<std::size_t>(p)]) ++p;
    auto chain = ancestor_chain(tree, model, prior, leaf1, p);

    Matrix a1(1, tree.dim()), a2(1, tree.dim());
    a1.row(0) = s1;
    a2.row(0) = s2;
    auto b1 = chain_basis(model, prior, chain, a1, p);
    auto chain2 = ancestor_chain(tree, model, prior, leaf2, p);
    auto b2 = chain_basis(model, prior, chain2, a2, p);

    double c = 0.0;
    for (int l = 0; l <= p; ++l) {
        const int node = chain[static_cast<std::size_t>(l)].node;
        if (tree.knots[static_cast<std::size_t>(node)].rows() == 0) continue;
        c += (b1[static_cast<std::size_t>(l)] *
              prior.apply_K(node, b2[static_cast<std::size_t>(l)].transpose()))(0, 0);
    }
    return c + nug;
}

// Dense C_M over a location set; oracle/test path, refused above `cap`.
inline Matrix dense_mra_cov_matrix(const PriorFactors& prior, const PartitionTree& tree,
                                   const CovarianceModel& model, const Matrix& S, int cap = 2000) {
    if (S.rows() > cap)
        throw std::invalid_argument("dense_mra_cov_matrix: location count exceeds oracle cap");
    const int M = tree.depth();
    const int n = static_cast<int>(S.rows());

    // group rows by leaf and evaluate each leaf's basis chain once
    struct Group {
        int leaf;
        RegionPath path;
        std::vector<int> rows;
        Matrix pts;
        std::vector<Matrix> basis;  // l = 0..M-1
        Matrix vM;                  // within-leaf remainder covariance
        std::vector<int> anc;       // ancestor node ids, levels 0..M-1
    };
    std::vector<Group> groups;
    {
        std::vector<int> group_of(static_cast<std::size_t>(tree.n_leaves()), -1);
        for (int i = 0; i < n; ++i) {
            const int leaf = tree.locate_leaf(S.row(i));
            const int q = tree.leaf_ordinal(leaf);
            if (group_of[static_cast<std::size_t>(q)] < 0) {
                group_of[static_cast<std::size_t>(q)] = static_cast<int>(groups.size());
                groups.push_back({leaf, tree.path_of(leaf), {}, {}, {}, {}, {}});
            }
            groups[static_cast<std::size_t>(group_of[static_cast<std::size_t>(q)])].rows.push_back(i);
        }
    }
    for (auto& g : groups) {
        g.pts.resize(static_cast<Eigen::Index>(g.rows.size()), tree.dim());
        for (std::size_t i = 0; i < g.rows.size(); ++i)
            g.pts.row(static_cast<Eigen::Index>(i)) = S.row(g.rows[i]);
        auto chain = ancestor_chain(tree, model, prior, g.leaf, M - 1);
        g.basis = chain_basis(model, prior, chain, g.pts, M - 1);
        g.vM = cov_matrix(model, g.pts, g.pts);
        for (int l = 0; l < M; ++l) {
            const int node = chain[static_cast<std::size_t>(l)].node;
            g.anc.push_back(node);
            if (tree.knots[static_cast<std::size_t>(node)].rows() == 0) continue;
            g.vM.noalias() -= g.basis[static_cast<std::size_t>(l)] *
                              prior.apply_K(node, g.basis[static_cast<std::size_t>(l)].transpose());
        }
    }

    Matrix C(n, n);
    for (std::size_t gi = 0; gi < groups.size(); ++gi)
        for (std::size_t gj = gi; gj < groups.size(); ++gj) {
            const auto& a = groups[gi];
            const auto& b = groups[gj];
            Matrix block;
            if (gi == gj) {
                block = a.vM;
                for (int l = 0; l < M; ++l) {
                    const int node = a.anc[static_cast<std::size_t>(l)];
                    if (tree.knots[static_cast<std::size_t>(node)].rows() == 0) continue;
                    block.noalias() +=
                        a.basis[static_cast<std::size_t>(l)] *
                        prior.apply_K(node, a.basis[static_cast<std::size_t>(l)].transpose());
                }
            } else {
                int p = 0;
                while (a.path[static_cast<std::size_t>(p)] == b.path[static_cast<std::size_t>(p)]) ++p;
                block = Matrix::Zero(a.pts.rows(), b.pts.rows());
                for (int l = 0; l <= p; ++l) {
                    const int node = a.anc[static_cast<std::size_t>(l)];
                    if (tree.knots[static_cast<std::size_t>(node)].rows() == 0) continue;
                    block.noalias() +=
                        a.basis[static_cast<std::size_t>(l)] *
                        prior.apply_K(node, b.basis[static_cast<std::size_t>(l)].transpose());
                }
            }
            for (std::size_t i = 0; i < a.rows.size(); ++i)
                for (std::size_t j = 0; j < b.rows.size(); ++j) {
                    double c = block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                    if (S.row(a.rows[i]) == S.row(b.rows[j])) c += model.nugget;
                    C(a.rows[i], b.rows[j]) = c;
                    C(b.rows[j], a.rows[i]) = c;
                }
        }
    return C;
}

}  // namespace mra
