// Acceptance gate: one checked criterion per test case, each printing a single
// PASS/FAIL line with its pinned tolerances.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdio>
#include <random>

#include "helpers.hpp"
#include "mra/executor.hpp"
#include "mra/fit.hpp"
#include "mra/metrics.hpp"
#include "mra/oracle.hpp"

using namespace mra;
using testref::unit_domain;

namespace {

double now() {
    static const auto t0 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("ACCEPTANCE %2d: %s — %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

CovarianceModel study_model() {
    CovarianceModel m;
    m.family = CovarianceModel::Family::Matern15;
    m.variance = 0.95;
    m.range = 0.05;
    m.nugget = 0.05;
    return m;
}

// Stratified locations: one point per cell of a near-square lattice, keeping
// neighboring points separated (stable conditioning at nugget 0).
Matrix stratified_locations(int n, int d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.1, 0.9);
    Matrix S(n, d);
    if (d == 1) {
        for (int i = 0; i < n; ++i) S(i, 0) = (i + unif(rng)) / n;
        return S;
    }
    int k = 1;
    while (k * k < n) ++k;
    for (int i = 0; i < n; ++i) {
        S(i, 0) = (i % k + unif(rng)) / k;
        S(i, 1) = (i / k + unif(rng)) / k;
    }
    return S;
}

// Equidistant-style knots with a level-dependent phase so that a child's knot
// lattice never reproduces an ancestor knot exactly (odd branching factors can
// otherwise align lattices across levels and make v_l(Q,Q) singular).
KnotStrategy phased_knots(int r, int levels, int d) {
    auto fn = [r, d](const Box& box, const RegionPath& path) {
        const double phase = 0.31 + 0.11 * static_cast<double>(path.size() % 5);
        Matrix Q(r, d);
        if (d == 1) {
            for (int i = 0; i < r; ++i)
                Q(i, 0) = box.lower[0] + (i + phase) / r * (box.upper[0] - box.lower[0]);
            return Q;
        }
        int k = 1;
        while (k * k < r) ++k;
        for (int i = 0; i < r; ++i) {
            Q(i, 0) = box.lower[0] + (i % k + phase) / k * (box.upper[0] - box.lower[0]);
            Q(i, 1) = box.lower[1] + (i / k + phase) / k * (box.upper[1] - box.lower[1]);
        }
        return Q;
    };
    return KnotStrategy::user(fn, std::vector<int>(static_cast<std::size_t>(levels), r));
}

struct BuiltCase {
    PartitionTree tree;
    CovarianceModel model;
    PriorFactors prior;
    PosteriorFactors post;
    Matrix S;
    Vector y;
};

BuiltCase build_case(int n, int d, int M, int J, int r, bool matern, double nugget,
                     std::uint64_t seed) {
    BuiltCase c;
    c.model.family = matern ? CovarianceModel::Family::Matern15
                            : CovarianceModel::Family::Exponential;
    c.model.variance = 1.0;
    c.model.range = 0.3;
    c.model.nugget = nugget;
    std::mt19937_64 rng(seed);
    c.S = stratified_locations(n, d, rng);
    c.y.resize(n);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < n; ++i) c.y[i] = normal(rng);
    c.tree = build_partition(unit_domain(d), std::vector<int>(static_cast<std::size_t>(M), J));
    assign_locations(c.tree, c.S, &c.y);
    place_knots(c.tree, phased_knots(r, M, d));
    c.prior = compute_prior(c.tree, c.model);
    c.post = run_upward(c.tree, c.prior);
    return c;
}

PartitionTree study_tree(int n, int M, int J, int r, const Vector& y) {
    auto tree = build_partition(unit_domain(1), std::vector<int>(static_cast<std::size_t>(M), J));
    assign_locations(tree, regular_grid_1d(n), &y);
    place_knots(tree, KnotStrategy::equidistant_uniform(r, M));
    return tree;
}

double slope_loglog(const std::vector<double>& ns, const std::vector<double>& ts) {
    const std::size_t k = ns.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < k; ++i) {
        mx += std::log(ns[i]);
        my += std::log(ts[i]);
    }
    mx /= static_cast<double>(k);
    my /= static_cast<double>(k);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < k; ++i) {
        sxx += (std::log(ns[i]) - mx) * (std::log(ns[i]) - mx);
        sxy += (std::log(ns[i]) - mx) * (std::log(ts[i]) - my);
    }
    return sxy / sxx;
}

}  // namespace

TEST_CASE("criterion 1: exactness under screening", "[acceptance]") {
    const double t0 = now();
    CovarianceModel model;
    model.family = CovarianceModel::Family::Exponential;
    model.variance = 1.0;
    model.range = 0.3;
    model.nugget = 0.0;

    // 60-point grid with a held-out gap of 6 -> n = 54 equispaced observations
    std::vector<double> locs;
    for (int i = 0; i < 60; ++i)
        if (i < 27 || i > 32) locs.push_back((i + 0.5) / 60.0);
    const int n = static_cast<int>(locs.size());
    Matrix S(n, 1);
    for (int i = 0; i < n; ++i) S(i, 0) = locs[static_cast<std::size_t>(i)];
    const Vector y = simulate_dense(model, S, 2024);

    std::vector<int> branching{3, 3, 3};
    auto tree = build_partition(unit_domain(1), branching);
    assign_locations(tree, S, &y);
    place_knots(tree, KnotStrategy::child_boundaries(3, branching));
    const auto prior = compute_prior(tree, model);
    const auto post = run_upward(tree, prior);

    const double ll_mra = post.loglik();
    const double ll_exact = exact_loglik(model, S, y);
    const double rel = std::abs(ll_mra - ll_exact) / std::abs(ll_exact);

    const Matrix SP = regular_grid_1d(200);
    const auto pd = run_downward(tree, model, prior, post, SP);
    const auto [mean, var] = predict_marginals(pd);
    const auto [mean_exact, var_exact] = exact_krige(model, S, y, SP);
    const double mean_diff = (mean - mean_exact).cwiseAbs().maxCoeff();
    const double secs = now() - t0;

    const bool pass = rel < 1e-6 && mean_diff < 1e-6 && secs < 5.0;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "loglik rel err %.3g (<1e-6), kriging mean max diff %.3g (<1e-6), %.2f s (<5)",
                  rel, mean_diff, secs);
    report(1, pass, buf);
    CHECK(rel < 1e-6);
    CHECK(mean_diff < 1e-6);
    CHECK(secs < 5.0);
}

TEST_CASE("criterion 2: recursion matches the dense oracle on random configs", "[acceptance]") {
    const double t0 = now();
    std::mt19937_64 meta(555);
    double worst_ll = 0.0, worst_pred = 0.0;
    for (int cfg = 0; cfg < 20; ++cfg) {
        const int d = 1 + static_cast<int>(meta() % 2);
        const int n = 50 + static_cast<int>(meta() % 251);
        const int M = 1 + static_cast<int>(meta() % 3);
        const int J = 2 + static_cast<int>(meta() % 3);
        const int r = 2 + static_cast<int>(meta() % 5);
        const bool matern = (cfg % 2) == 0;
        const double nugget = (meta() % 2) ? 0.05 : 0.0;
        auto c = build_case(n, d, M, J, r, matern, nugget, 9000 + static_cast<std::uint64_t>(cfg));

        // reorder the data to the tree's leaf order for the dense comparison
        Matrix S(n, d);
        Vector y(n);
        int idx = 0;
        for (int q = 0; q < c.tree.n_leaves(); ++q) {
            const Matrix& L = c.tree.leaf_locations[static_cast<std::size_t>(q)];
            for (Eigen::Index i = 0; i < L.rows(); ++i, ++idx) {
                S.row(idx) = L.row(i);
                y[idx] = c.tree.leaf_values[static_cast<std::size_t>(q)][i];
            }
        }
        const Matrix C = dense_mra_cov_matrix(c.prior, c.tree, c.model, S);
        const double dense_ll = testref::gauss_logpdf(y, C);
        worst_ll = std::max(worst_ll,
                            std::abs(c.post.loglik() - dense_ll) / std::abs(dense_ll));

        std::mt19937_64 rng(7000 + static_cast<std::uint64_t>(cfg));
        const Matrix SP = stratified_locations(20, d, rng);
        const auto pd = run_downward(c.tree, c.model, c.prior, c.post, SP);
        const auto [mean, var] = predict_marginals(pd);

        Matrix all(n + 20, d);
        all << S, SP;
        const Matrix Cfull = dense_mra_cov_matrix(c.prior, c.tree, c.model, all);
        Matrix C22 = Cfull.bottomRightCorner(20, 20);
        C22.diagonal().array() -= c.model.nugget;
        const auto [mw, cw] =
            testref::condition(Cfull.topLeftCorner(n, n), Cfull.topRightCorner(n, 20), C22, y);
        worst_pred = std::max(worst_pred, (mean - mw).cwiseAbs().maxCoeff());
        worst_pred = std::max(worst_pred, (var - cw.diagonal()).cwiseAbs().maxCoeff());
    }
    const double secs = now() - t0;
    const bool pass = worst_ll < 1e-8 && worst_pred < 1e-6 && secs < 60.0;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "20 configs: worst loglik rel err %.3g (<1e-8), worst marginal err %.3g (<1e-6), "
                  "%.1f s (<60)",
                  worst_ll, worst_pred, secs);
    report(2, pass, buf);
    CHECK(worst_ll < 1e-8);
    CHECK(worst_pred < 1e-6);
    CHECK(secs < 60.0);
}

TEST_CASE("criterion 3: Woodbury and determinant-lemma identities per region", "[acceptance]") {
    auto c = build_case(120, 1, 2, 3, 3, true, 0.05, 333);
    const int M = c.tree.depth();

    // dense covariance of the region's observations using only resolutions >= start
    auto region_sigma = [&](int node, int start) {
        const int m = c.tree.node_level(node);
        // collect subtree leaves
        std::vector<int> leaves;
        for (int q = 0; q < c.tree.n_leaves(); ++q) {
            int id = c.tree.node_id(M, q);
            int anc = id;
            for (int l = M; l > m; --l) anc = c.tree.parent(anc);
            if (anc == node) leaves.push_back(q);
        }
        std::vector<int> offset;
        int total = 0;
        for (int q : leaves) {
            offset.push_back(total);
            total += static_cast<int>(c.tree.leaf_locations[static_cast<std::size_t>(q)].rows());
        }
        Matrix Sig = Matrix::Zero(total, total);
        for (std::size_t a = 0; a < leaves.size(); ++a)
            for (std::size_t b = a; b < leaves.size(); ++b) {
                const int qa = leaves[a], qb = leaves[b];
                const auto& Ba = c.prior.leaf_B[static_cast<std::size_t>(qa)];
                const auto& Bb = c.prior.leaf_B[static_cast<std::size_t>(qb)];
                const auto anc = c.tree.ancestors(c.tree.node_id(M, qa));
                RegionPath pa = c.tree.path_of(c.tree.node_id(M, qa));
                RegionPath pb = c.tree.path_of(c.tree.node_id(M, qb));
                int p = 0;
                while (p < M && pa[static_cast<std::size_t>(p)] == pb[static_cast<std::size_t>(p)])
                    ++p;
                Matrix block;
                if (qa == qb) {
                    block = c.prior.leaf_sigma[static_cast<std::size_t>(qa)];
                    for (int l = start; l < M; ++l)
                        block += Ba[static_cast<std::size_t>(l)] *
                                 c.prior.apply_K(anc[static_cast<std::size_t>(l)],
                                                 Ba[static_cast<std::size_t>(l)].transpose());
                } else {
                    block = Matrix::Zero(Ba[0].rows(), Bb[0].rows());
                    for (int l = start; l <= std::min(p, M - 1); ++l)
                        block += Ba[static_cast<std::size_t>(l)] *
                                 c.prior.apply_K(anc[static_cast<std::size_t>(l)],
                                                 Bb[static_cast<std::size_t>(l)].transpose());
                }
                Sig.block(offset[a], offset[b], block.rows(), block.cols()) = block;
                Sig.block(offset[b], offset[a], block.cols(), block.rows()) = block.transpose();
            }
        return std::make_pair(Sig, leaves);
    };

    double worst_inv = 0.0, worst_logdet = 0.0;
    for (int m = 0; m < M; ++m)
        for (int qq = 0; qq < c.tree.level_count(m); ++qq) {
            const int node = c.tree.node_id(m, qq);
            auto [Sig, leaves] = region_sigma(node, m);

            // V: block-diagonal over the children's subtrees (resolutions >= m+1)
            Matrix V = Matrix::Zero(Sig.rows(), Sig.cols());
            Matrix B(Sig.rows(), c.tree.knots[static_cast<std::size_t>(node)].rows());
            int off = 0;
            for (int j = 0; j < c.tree.branching[static_cast<std::size_t>(m)]; ++j) {
                auto [Vj, lj] = region_sigma(c.tree.child(node, j), m + 1);
                V.block(off, off, Vj.rows(), Vj.cols()) = Vj;
                off += static_cast<int>(Vj.rows());
            }
            int row = 0;
            for (int q : leaves) {
                const Matrix& Bq =
                    c.prior.leaf_B[static_cast<std::size_t>(q)][static_cast<std::size_t>(m)];
                B.middleRows(row, Bq.rows()) = Bq;
                row += static_cast<int>(Bq.rows());
            }

            const Matrix Ktinv = c.post.Ktilde_inv[static_cast<std::size_t>(node)];
            const Matrix Kt = Ktinv.inverse();
            const Matrix Vinv = V.inverse();
            const Matrix smw = Vinv - Vinv * B * Kt * B.transpose() * Vinv;
            worst_inv = std::max(worst_inv, (Sig.inverse() - smw).cwiseAbs().maxCoeff());

            const double logdet_dense =
                Eigen::LDLT<Matrix>(Sig).vectorD().array().log().sum();
            worst_logdet =
                std::max(worst_logdet,
                         std::abs(c.post.d[static_cast<std::size_t>(node)] - logdet_dense));
        }

    const bool pass = worst_inv < 1e-8 && worst_logdet < 1e-8;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "worst |Sigma^-1 - SMW| %.3g (<1e-8), worst |log det| err %.3g (<1e-8)",
                  worst_inv, worst_logdet);
    report(3, pass, buf);
    CHECK(worst_inv < 1e-8);
    CHECK(worst_logdet < 1e-8);
}

TEST_CASE("criterion 4: validity of the approximate covariance", "[acceptance]") {
    std::mt19937_64 rng(444);
    double min_eig = 0.0, worst_leaf = 0.0, worst_diag = 0.0;
    for (int rep = 0; rep < 4; ++rep) {
        const int d = 1 + rep % 2;
        auto c = build_case(150 + 10 * rep, d, 2, 2 + rep % 2, 3, rep % 2 == 0, 0.0,
                            4400 + static_cast<std::uint64_t>(rep));
        const Matrix S = testref::random_locations(180, d, rng);
        const Matrix C = dense_mra_cov_matrix(c.prior, c.tree, c.model, S);
        Eigen::SelfAdjointEigenSolver<Matrix> es(C);
        min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
        for (Eigen::Index i = 0; i < S.rows(); ++i)
            worst_diag = std::max(worst_diag,
                                  std::abs(C(i, i) - kernel(c.model, S.row(i), S.row(i))));

        // same-leaf pairs
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        int checked = 0;
        while (checked < 250) {
            Point a(d), b(d);
            for (int k = 0; k < d; ++k) a[k] = unif(rng);
            const int leaf = c.tree.locate_leaf(a);
            const Box& box = c.tree.boxes[static_cast<std::size_t>(leaf)];
            for (int k = 0; k < d; ++k)
                b[k] = box.lower[k] + unif(rng) * (box.upper[k] - box.lower[k]);
            if (c.tree.locate_leaf(b) != leaf) continue;
            worst_leaf = std::max(worst_leaf,
                                  std::abs(mra_covariance(c.prior, c.tree, c.model, a, b) -
                                           kernel(c.model, a, b)));
            ++checked;
        }
    }
    const bool pass = min_eig >= -1e-8 && worst_leaf < 1e-8 && worst_diag < 1e-8;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "min eigenvalue %.3g (>=-1e-8), same-leaf dev %.3g (<1e-8), diagonal dev %.3g "
                  "(<1e-8)",
                  min_eig, worst_leaf, worst_diag);
    report(4, pass, buf);
    CHECK(min_eig >= -1e-8);
    CHECK(worst_leaf < 1e-8);
    CHECK(worst_diag < 1e-8);
}

TEST_CASE("criterion 5: oracle cross-validation", "[acceptance]") {
    const auto model = study_model();
    const int n = 512;
    const Vector y = simulate_1d_circulant(model, n, 505);
    const double dense = exact_loglik(model, regular_grid_1d(n), y);
    const double dl = durbin_levinson_loglik(model_acvf(model, n, 1.0 / n), y);
    const double rel = std::abs(dl - dense) / std::abs(dense);

    // Monte Carlo moment checks on the circulant simulator; the process has
    // known mean zero, so non-centered moments estimate the acvf without bias
    const int reps = 500, ng = 1024;
    std::vector<double> v0(reps), c1(reps);
    for (int r = 0; r < reps; ++r) {
        const Vector z = simulate_1d_circulant(model, ng, 20000 + static_cast<std::uint64_t>(r));
        double v = 0.0, c = 0.0;
        for (int i = 0; i < ng; ++i) v += z[i] * z[i];
        for (int i = 0; i + 1 < ng; ++i) c += z[i] * z[i + 1];
        v0[static_cast<std::size_t>(r)] = v / ng;
        c1[static_cast<std::size_t>(r)] = c / (ng - 1);
    }
    auto mean_se = [&](const std::vector<double>& x) {
        double m = 0.0;
        for (double a : x) m += a;
        m /= static_cast<double>(x.size());
        double s = 0.0;
        for (double a : x) s += (a - m) * (a - m);
        s = std::sqrt(s / static_cast<double>(x.size() - 1));
        return std::make_pair(m, s / std::sqrt(static_cast<double>(x.size())));
    };
    const auto [var_hat, var_se] = mean_se(v0);
    const auto [cov1_hat, cov1_se] = mean_se(c1);

    const auto acvf = model_acvf(model, 2, 1.0 / ng);
    const double total_var = model.variance + model.nugget;  // == acvf[0]

    const bool var_ok = std::abs(var_hat - total_var) / total_var < 0.05;
    const bool acf_ok = std::abs(cov1_hat - acvf[1]) < 3.0 * cov1_se;
    const bool pass = rel < 1e-8 && var_ok && acf_ok;
    char buf[300];
    std::snprintf(buf, sizeof buf,
                  "DL vs dense rel err %.3g (<1e-8); MC var %.4f vs %.4f (5%%); lag-1 acvf %.4f vs "
                  "%.4f (3 SE = %.4f)",
                  rel, var_hat, total_var, cov1_hat, acvf[1], 3.0 * cov1_se);
    report(5, pass, buf);
    CHECK(rel < 1e-8);
    CHECK(var_ok);
    CHECK(acf_ok);
}

// Knot layout for the desk-scale comparison: clusters of `per` knots straddling
// each internal child boundary (screening-oriented placement), remaining knots
// equidistant. Even `per` keeps all knots distinct within a region.
KnotStrategy boundary_cluster_knots(int r, int levels, int per, double eps) {
    auto fn = [r, per, eps](const Box& box, const RegionPath&) {
        const double w = box.upper[0] - box.lower[0];
        Matrix Q(r, 1);
        int k = 0;
        for (int b = 1; b <= 3; ++b)
            for (int i = 0; i < per; ++i)
                Q(k++, 0) = box.lower[0] + w * (b / 4.0 + eps * (i - (per - 1) / 2.0));
        const int rest = r - k;
        for (int i = 0; i < rest; ++i) Q(k++, 0) = box.lower[0] + w * (i + 0.5) / rest;
        return Q;
    };
    return KnotStrategy::user(fn, std::vector<int>(static_cast<std::size_t>(levels), r));
}

TEST_CASE("criterion 6: log-score ordering at desk scale", "[acceptance]") {
    const double t0 = now();
    const auto model = study_model();
    const int n = 30720;
    double exact_sum = 0.0, mra_sum = 0.0, onera_sum = 0.0;
    for (int s = 0; s < 5; ++s) {
        const Vector y = simulate_1d_circulant(model, n, 600 + static_cast<std::uint64_t>(s));
        exact_sum += durbin_levinson_loglik(model_acvf(model, n, 1.0 / n), y);

        // M-RA: r=30, J=4, M=5 with boundary-cluster knots
        auto mra_t = build_partition(unit_domain(1), {4, 4, 4, 4, 4});
        assign_locations(mra_t, regular_grid_1d(n), &y);
        place_knots(mra_t, boundary_cluster_knots(30, 5, 6, 0.01));
        mra_sum += loglikelihood(mra_t, model, 4);

        // 1-RA F: fixed rank r=240 at resolution 0, J = n/240 blocks
        auto one_t = build_partition(unit_domain(1), {n / 240});
        assign_locations(one_t, regular_grid_1d(n), &y);
        place_knots(one_t, KnotStrategy::equidistant({240}));
        onera_sum += loglikelihood(one_t, model, 4);
    }
    const double exact_m = exact_sum / 5, mra_m = mra_sum / 5, onera_m = onera_sum / 5;
    const double secs = now() - t0;
    const bool order_ok = exact_m >= mra_m && mra_m >= onera_m;
    const bool gap_ok = (exact_m - mra_m) < (exact_m - onera_m);
    const bool pass = order_ok && gap_ok && secs < 600.0;
    char buf[300];
    std::snprintf(buf, sizeof buf,
                  "mean log-scores exact %.1f >= M-RA %.1f >= 1-RA-F %.1f; gaps %.2f < %.2f; %.0f "
                  "s (<600)",
                  exact_m, mra_m, onera_m, exact_m - mra_m, exact_m - onera_m, secs);
    report(6, pass, buf);
    CHECK(order_ok);
    CHECK(gap_ok);
    CHECK(secs < 600.0);
}

TEST_CASE("criterion 7: quasilinear and cubic scaling slopes", "[acceptance]") {
    const auto model = study_model();
    std::vector<double> ns{1920, 7680, 30720, 122880};
    std::vector<double> ts;
    for (double nd : ns) {
        const int n = static_cast<int>(nd);
        int M = 0;
        for (int w = n / 30; w > 1; w /= 4) ++M;
        const Vector y = simulate_1d_circulant(model, n, 700);
        auto tree = study_tree(n, M, 4, 30, y);
        double best = 1e100;
        for (int rep = 0; rep < 2; ++rep) {
            const double t0 = now();
            volatile double ll = loglikelihood(tree, model, 1);
            (void)ll;
            best = std::min(best, now() - t0);
        }
        ts.push_back(best);
    }
    const double mra_slope = slope_loglog(ns, ts);

    CovarianceModel dm;
    dm.family = CovarianceModel::Family::Exponential;
    dm.variance = 1.0;
    dm.range = 0.1;
    dm.nugget = 0.05;
    // the cubic-scaling part of the dense oracle: factorize + solve + logdet
    // with the covariance matrix assembled outside the timer
    std::vector<double> dns{256, 512, 1024, 2048};
    std::vector<double> dts;
    for (double nd : dns) {
        const int n = static_cast<int>(nd);
        const Matrix S = regular_grid_1d(n);
        const Vector y = simulate_1d_circulant(dm, n, 701);
        const Matrix C = cov_matrix(dm, S, S, true);
        double best = 1e100;
        for (int rep = 0; rep < 5; ++rep) {
            const double t0 = now();
            Eigen::LLT<Matrix> llt(C);
            const Vector alpha = llt.solve(y);
            volatile double ll =
                -0.5 * (2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum() +
                        y.dot(alpha) + n * kLog2Pi);
            (void)ll;
            best = std::min(best, now() - t0);
        }
        dts.push_back(best);
    }
    const double dense_slope = slope_loglog(dns, dts);

    const bool pass = mra_slope >= 0.7 && mra_slope <= 1.6 && dense_slope >= 2.5 &&
                      dense_slope <= 3.5;
    char buf[256];
    std::snprintf(buf, sizeof buf, "M-RA slope %.2f (in [0.7,1.6]); dense slope %.2f (in [2.5,3.5])",
                  mra_slope, dense_slope);
    report(7, pass, buf);
    CHECK(mra_slope >= 0.7);
    CHECK(mra_slope <= 1.6);
    CHECK(dense_slope >= 2.5);
    CHECK(dense_slope <= 3.5);
}

TEST_CASE("criterion 8: bitwise parallel determinism", "[acceptance]") {
    const auto model = study_model();
    const int n = 30720;
    const Vector y = simulate_1d_circulant(model, n, 800);
    auto tree = study_tree(n, 5, 4, 30, y);
    const auto prior = compute_prior(tree, model);
    const Matrix SP = regular_grid_1d(100);

    const auto post1 = run_upward(tree, prior, 1);
    const auto pd1 = run_downward(tree, model, prior, post1, SP, 1);
    const auto [m1, v1] = predict_marginals(pd1);
    bool identical = true;
    for (int workers : {2, 4, 8}) {
        const auto post = run_upward(tree, prior, workers);
        const auto pd = run_downward(tree, model, prior, post, SP, workers);
        const auto [m, v] = predict_marginals(pd);
        if (post.loglik() != post1.loglik() || (m - m1).cwiseAbs().maxCoeff() != 0.0 ||
            (v - v1).cwiseAbs().maxCoeff() != 0.0)
            identical = false;
    }
    report(8, identical,
           identical ? "loglik and predictions bitwise identical for workers {1,2,4,8}"
                     : "outputs differ across worker counts");
    CHECK(identical);
}

TEST_CASE("criterion 9: maximum-likelihood parameter recovery", "[acceptance]") {
    const auto truth = study_model();
    const int n = 4096;
    double var_sum = 0, range_sum = 0, nug_sum = 0;
    bool trace_ok = true;
    for (int s = 0; s < 5; ++s) {
        const Vector y = simulate_1d_circulant(truth, n, 1700 + static_cast<std::uint64_t>(s));
        auto tree = study_tree(n, 3, 4, 30, y);
        CovarianceModel init;
        init.family = truth.family;
        init.variance = 1.0;
        init.range = 0.1;
        init.nugget = 0.1;
        FitOptions opts;
        opts.max_iters = 400;
        const auto res = fit(tree, truth.family, init, opts);
        var_sum += res.model.variance;
        range_sum += res.model.range;
        nug_sum += res.model.nugget;

        double best = -std::numeric_limits<double>::infinity();
        for (const auto& e : res.trace) {
            if (e.loglik > best) best = e.loglik;  // accepted improvements only
        }
        if (std::abs(best - res.loglik) > 1e-6) trace_ok = false;
    }
    const double v = var_sum / 5, r = range_sum / 5, g = nug_sum / 5;
    const double ev = std::abs(v - truth.variance) / truth.variance;
    const double er = std::abs(r - truth.range) / truth.range;
    const double eg = std::abs(g - truth.nugget) / truth.nugget;
    const bool pass = ev < 0.15 && er < 0.15 && eg < 0.15 && trace_ok;
    char buf[300];
    std::snprintf(buf, sizeof buf,
                  "seed-averaged estimates (%.3f, %.4f, %.4f) vs (0.95, 0.05, 0.05): rel errs "
                  "%.1f%%, %.1f%%, %.1f%% (<15%%); trace %s",
                  v, r, g, 100 * ev, 100 * er, 100 * eg,
                  trace_ok ? "non-decreasing" : "violated");
    report(9, pass, buf);
    CHECK(ev < 0.15);
    CHECK(er < 0.15);
    CHECK(eg < 0.15);
    CHECK(trace_ok);
}

TEST_CASE("criterion 10: CRPS correctness", "[acceptance]") {
    std::mt19937_64 rng(1000);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::uniform_real_distribution<double> us(0.02, 4.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double mu = u(rng), y = u(rng), sd = us(rng);
        worst = std::max(worst,
                         std::abs(crps_normal(y, mu, sd) - testref::crps_quadrature(y, mu, sd)));
    }
    const double limit0 = crps_normal(1.234, 1.234, 1e-14);
    const bool pass = worst < 1e-6 && limit0 < 1e-10;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "max |closed form - quadrature| %.3g (<1e-6); CRPS(mu=y, sd->0) = %.3g (->0)",
                  worst, limit0);
    report(10, pass, buf);
    CHECK(worst < 1e-6);
    CHECK(limit0 < 1e-10);
}
